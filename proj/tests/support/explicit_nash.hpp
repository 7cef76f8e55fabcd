#pragma once

// Test-support oracle: a fully explicit re-implementation of the two-player
// system with plain loops, independent of the library's IMEX/FFT path.

#include <cmath>
#include <vector>

#include "mfglab/coupling.hpp"
#include "mfglab/grid.hpp"

namespace mfglab_test {

inline std::vector<std::vector<double>> explicit_nash_oracle(const mfglab::ProblemSpec& spec,
                                                             double epsilon, int m, double horizon,
                                                             double dt_cap) {
    using namespace mfglab;
    const double h = 1.0 / m;
    const int steps = static_cast<int>(std::ceil(horizon / std::min(dt_cap, 0.2 * h * h)));
    const double dt = horizon / steps;
    const std::size_t n = static_cast<std::size_t>(m) * m;

    MollifiedCoupling fc(spec.coupling, epsilon, TorusGrid(1, m));
    auto idx = [m](int a, int b) { return static_cast<std::size_t>(a) * m + b; };

    std::vector<std::vector<double>> coupling(2, std::vector<double>(n));
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) {
            EmpiricalMeasure em1, em2;
            em1.atoms.push_back({b * h});
            em2.atoms.push_back({a * h});
            coupling[0][idx(a, b)] = mollified_eval_empirical(fc, em1, {a * h}).value;
            coupling[1][idx(a, b)] = mollified_eval_empirical(fc, em2, {b * h}).value;
        }

    std::vector<std::vector<double>> v(2, std::vector<double>(n));
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) {
            v[0][idx(a, b)] = spec.terminal.g({a * h});
            v[1][idx(a, b)] = spec.terminal.g({b * h});
        }

    auto phi = [](double s) { return std::sqrt(1.0 + s) - 1.0; };
    std::vector<std::vector<double>> vn = v;
    for (int step = 0; step < steps; ++step) {
        for (int i = 0; i < 2; ++i) {
            const int j = 1 - i;
            for (int a = 0; a < m; ++a)
                for (int b = 0; b < m; ++b) {
                    const int ap = (a + 1) % m, am = (a + m - 1) % m;
                    const int bp = (b + 1) % m, bm = (b + m - 1) % m;
                    const std::size_t c = idx(a, b);
                    const double lap = (v[i][idx(ap, b)] + v[i][idx(am, b)] - 2 * v[i][c]) / (h * h) +
                                       (v[i][idx(a, bp)] + v[i][idx(a, bm)] - 2 * v[i][c]) / (h * h);
                    const int own_p = i == 0 ? static_cast<int>(idx(ap, b)) : static_cast<int>(idx(a, bp));
                    const int own_m = i == 0 ? static_cast<int>(idx(am, b)) : static_cast<int>(idx(a, bm));
                    const double dmin = (v[i][c] - v[i][own_m]) / h;
                    const double dpl = (v[i][own_p] - v[i][c]) / h;
                    const double gm = std::max(dmin, 0.0), gp = std::min(dpl, 0.0);
                    const double x_own = (i == 0 ? a : b) * h;
                    const double ham = phi(gm * gm + gp * gp) + spec.hamiltonian.pot_amp * std::cos(two_pi * x_own);
                    const int oth_p = j == 0 ? static_cast<int>(idx(ap, b)) : static_cast<int>(idx(a, bp));
                    const int oth_m = j == 0 ? static_cast<int>(idx(am, b)) : static_cast<int>(idx(a, bm));
                    const double jdm = (v[j][c] - v[j][oth_m]) / h;
                    const double jdp = (v[j][oth_p] - v[j][c]) / h;
                    const double jgm = std::max(jdm, 0.0), jgp = std::min(jdp, 0.0);
                    const double sj = jgm * jgm + jgp * jgp;
                    const double cmj = jgm / std::sqrt(1.0 + sj);
                    const double cpj = jgp / std::sqrt(1.0 + sj);
                    const double cross = cmj * (v[i][c] - v[i][oth_m]) / h + cpj * (v[i][oth_p] - v[i][c]) / h;
                    vn[i][c] = v[i][c] + dt * (lap - ham - cross + coupling[i][c]);
                }
        }
        v.swap(vn);
    }
    return v;
}

}  // namespace mfglab_test
