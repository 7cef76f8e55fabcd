#pragma once

#include "mfglab/grid.hpp"
#include "mfglab/norms.hpp"
#include "mfglab/kernel.hpp"
#include "mfglab/measures.hpp"
#include "mfglab/coupling.hpp"
#include "mfglab/pde.hpp"
#include "mfglab/mfg.hpp"
#include "mfglab/nash.hpp"
#include "mfglab/particles.hpp"
#include "mfglab/io.hpp"
#include "mfglab/harness.hpp"
