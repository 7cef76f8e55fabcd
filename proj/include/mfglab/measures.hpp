#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "mfglab/grid.hpp"
#include "mfglab/kernel.hpp"
#include "mfglab/norms.hpp"
#include "mfglab/rng.hpp"

namespace mfglab {

// Probability density on the grid: nonnegative nodes, unit discrete mass.
struct DensityField {
    static constexpr double mass_tol = 1e-10;

    ScalarField field;

    DensityField() = default;

    explicit DensityField(ScalarField f, bool renormalize = false) : field(std::move(f)) {
        if (field.time) throw std::invalid_argument("DensityField: spatial fields only");
        double mass = 0.0;
        for (double& v : field.values) {
            if (v < 0.0) {
                if (v < -1e-12) throw std::invalid_argument("DensityField: negative node value");
                v = 0.0;
            }
            mass += v;
        }
        mass *= field.grid.cell_volume();
        if (renormalize) {
            if (!(mass > 0.0)) throw std::invalid_argument("DensityField: zero total mass");
            for (double& v : field.values) v /= mass;
        } else if (std::fabs(mass - 1.0) > mass_tol) {
            throw std::invalid_argument("DensityField: mass differs from 1 beyond tolerance");
        }
    }

    const TorusGrid& grid() const { return field.grid; }
    double mass() const {
        double m = 0.0;
        for (double v : field.values) m += v;
        return m * field.grid.cell_volume();
    }
};

inline DensityField uniform_density(const TorusGrid& g) {
    return DensityField(ScalarField(g, 1.0));
}

// Uniform atoms with one original index optionally excluded,
// weight 1/(count after exclusion) each.
struct EmpiricalMeasure {
    std::vector<std::vector<double>> atoms;
    int excluded_index = -1;  // index in the originating point list, -1 if none

    std::size_t count() const { return atoms.size(); }
    double weight() const { return 1.0 / static_cast<double>(atoms.size()); }
};

inline EmpiricalMeasure empirical(const std::vector<std::vector<double>>& points, int exclude) {
    if (points.size() < 2)
        throw std::invalid_argument("empirical: need at least two points, weight 1/(N-1) undefined otherwise");
    if (exclude < 0 || exclude >= static_cast<int>(points.size()))
        throw std::invalid_argument("empirical: excluded index out of range");
    EmpiricalMeasure em;
    em.excluded_index = exclude;
    for (int j = 0; j < static_cast<int>(points.size()); ++j)
        if (j != exclude) em.atoms.push_back(points[j]);
    return em;
}

inline EmpiricalMeasure all_atoms(const std::vector<std::vector<double>>& points) {
    if (points.empty()) throw std::invalid_argument("all_atoms: empty point list");
    EmpiricalMeasure em;
    for (const auto& p : points) em.atoms.push_back(p);
    return em;
}

namespace detail {

// one circle measure: optional grid density (cells centered at nodes) plus atoms
struct CircleMeasure {
    const DensityField* density = nullptr;
    std::vector<double> atoms;    // positions in [0,1)
    double atom_weight = 0.0;
};

// piecewise-linear G = F_mu - F_nu on [0,1): segments plus jump events
struct CdfDiff {
    std::vector<double> pos;      // segment start positions, ascending, pos[0] = 0
    std::vector<double> val;      // G at segment start (after jumps)
    std::vector<double> slope;    // G' on the segment
};

inline CdfDiff build_cdf_diff(const CircleMeasure& mu, const CircleMeasure& nu) {
    std::vector<double> brk{0.0};
    auto add_density_breaks = [&brk](const DensityField* d) {
        if (!d) return;
        const int m = d->grid().points_per_axis;
        const double h = d->grid().spacing();
        for (int i = 0; i < m; ++i) brk.push_back(wrap_unit((i + 0.5) * h));
    };
    add_density_breaks(mu.density);
    add_density_breaks(nu.density);
    for (double a : mu.atoms) brk.push_back(wrap_unit(a));
    for (double a : nu.atoms) brk.push_back(wrap_unit(a));
    std::sort(brk.begin(), brk.end());
    brk.erase(std::unique(brk.begin(), brk.end()), brk.end());

    auto density_at = [](const DensityField* d, double t) -> double {
        if (!d) return 0.0;
        const int m = d->grid().points_per_axis;
        const double h = d->grid().spacing();
        int cell = static_cast<int>(std::floor(t / h + 0.5)) % m;  // node whose cell contains t
        if (cell < 0) cell += m;
        return d->field.values[cell];
    };
    auto jump_at = [](const CircleMeasure& msr, double t) -> double {
        double j = 0.0;
        for (double a : msr.atoms)
            if (wrap_unit(a) == t) j += msr.atom_weight;
        return j;
    };

    CdfDiff g;
    double cur = 0.0;
    for (std::size_t k = 0; k < brk.size(); ++k) {
        const double t = brk[k];
        cur += jump_at(mu, t) - jump_at(nu, t);
        const double mid = t + 1e-13;
        g.pos.push_back(t);
        g.val.push_back(cur);
        const double sl = density_at(mu.density, wrap_unit(mid)) - density_at(nu.density, wrap_unit(mid));
        g.slope.push_back(sl);
        const double next = (k + 1 < brk.size()) ? brk[k + 1] : 1.0;
        cur += sl * (next - t);
    }
    return g;
}

// Lebesgue measure of { t : G(t) <= c }
inline double sublevel_measure(const CdfDiff& g, double c) {
    double meas = 0.0;
    for (std::size_t k = 0; k < g.pos.size(); ++k) {
        const double a = g.pos[k];
        const double b = (k + 1 < g.pos.size()) ? g.pos[k + 1] : 1.0;
        const double len = b - a;
        const double g0 = g.val[k];
        const double g1 = g0 + g.slope[k] * len;
        if (g.slope[k] == 0.0) {
            if (g0 <= c) meas += len;
        } else {
            const double lo = std::min(g0, g1), hi = std::max(g0, g1);
            if (c >= hi) meas += len;
            else if (c > lo) meas += len * (c - lo) / (hi - lo);
        }
    }
    return meas;
}

inline double integral_abs(const CdfDiff& g, double c) {
    double acc = 0.0;
    for (std::size_t k = 0; k < g.pos.size(); ++k) {
        const double a = g.pos[k];
        const double b = (k + 1 < g.pos.size()) ? g.pos[k + 1] : 1.0;
        const double len = b - a;
        const double g0 = g.val[k] - c;
        const double g1 = g0 + g.slope[k] * len;
        if (g0 * g1 >= 0.0) {
            acc += 0.5 * std::fabs(g0 + g1) * len;
        } else {
            const double tc = len * g0 / (g0 - g1);  // crossing point
            acc += 0.5 * std::fabs(g0) * tc + 0.5 * std::fabs(g1) * (len - tc);
        }
    }
    return acc;
}

// exact circular W1 = min_c int |G - c|, optimal c = Lebesgue median of G
inline double w1_from_cdf(const CdfDiff& g) {
    double lo = g.val[0], hi = g.val[0];
    for (std::size_t k = 0; k < g.pos.size(); ++k) {
        const double len = ((k + 1 < g.pos.size()) ? g.pos[k + 1] : 1.0) - g.pos[k];
        const double g1 = g.val[k] + g.slope[k] * len;
        lo = std::min({lo, g.val[k], g1});
        hi = std::max({hi, g.val[k], g1});
    }
    if (hi - lo < 1e-300) return integral_abs(g, lo);
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (sublevel_measure(g, mid) < 0.5) lo = mid;
        else hi = mid;
    }
    return integral_abs(g, 0.5 * (lo + hi));
}

inline CircleMeasure as_circle(const DensityField& d) {
    if (d.grid().dim != 1)
        throw std::invalid_argument("w1_circle supports d = 1 only; use w1_bound in higher dimension");
    CircleMeasure cm;
    cm.density = &d;
    return cm;
}

inline CircleMeasure as_circle(const EmpiricalMeasure& em) {
    CircleMeasure cm;
    for (const auto& a : em.atoms) {
        if (a.size() != 1)
            throw std::invalid_argument("w1_circle supports d = 1 only; use w1_bound in higher dimension");
        cm.atoms.push_back(wrap_unit(a[0]));
    }
    cm.atom_weight = em.weight();
    return cm;
}

}  // namespace detail

// Exact Monge-Kantorovich distance on the circle via the shifted-CDF formula.
template <typename Mu, typename Nu>
double w1_circle(const Mu& mu, const Nu& nu) {
    const auto cm = detail::as_circle(mu);
    const auto cn = detail::as_circle(nu);
    return detail::w1_from_cdf(detail::build_cdf_diff(cm, cn));
}

namespace detail {

// project a measure onto grid cells (mass per node) for the greedy plan
inline std::vector<double> cell_masses(const DensityField& d, const TorusGrid& g) {
    if (!(d.grid() == g)) throw std::invalid_argument("w1_bound: density grid mismatch");
    std::vector<double> m(g.node_count());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = d.field.values[i] * g.cell_volume();
    return m;
}

inline std::vector<double> cell_masses(const EmpiricalMeasure& em, const TorusGrid& g) {
    std::vector<double> m(g.node_count(), 0.0);
    const double h = g.spacing();
    std::vector<int> mi(g.dim);
    for (const auto& a : em.atoms) {
        for (int ax = 0; ax < g.dim; ++ax)
            mi[ax] = static_cast<int>(std::floor(wrap_unit(a[ax]) / h + 0.5)) % g.points_per_axis;
        m[g.flat(mi)] += em.weight();
    }
    return m;
}

inline double projection_allowance(const DensityField&, const TorusGrid&) { return 0.0; }
inline double projection_allowance(const EmpiricalMeasure&, const TorusGrid& g) { return 0.5 * g.spacing() * std::sqrt(static_cast<double>(g.dim)); }

template <typename M>
const TorusGrid& bound_grid(const M& m, const TorusGrid& fallback) {
    if constexpr (std::is_same_v<M, DensityField>) return m.grid();
    else { (void)m; return fallback; }
}

}  // namespace detail

struct W1Bound {
    double lower = 0.0;
    double upper = 0.0;
};

// Sandwich bounds for d_1 in any dimension: the lower bound pairs against a
// fixed dictionary of 1-Lipschitz test functions, the upper bound is the cost
// of a greedy sequential plan along the lexicographic torus path.
template <typename Mu, typename Nu>
W1Bound w1_bound(const Mu& mu, const Nu& nu) {
    static const TorusGrid fallback(1, 256);
    const TorusGrid* g = nullptr;
    if constexpr (std::is_same_v<Mu, DensityField>) g = &mu.grid();
    else if constexpr (std::is_same_v<Nu, DensityField>) g = &nu.grid();
    TorusGrid grid = g ? *g : fallback;

    // lower bound: 1-Lipschitz dictionary (trig waves scaled to unit Lipschitz
    // constant plus distance functions to a few anchors)
    auto pair_with = [&](auto&& phi) {
        double acc = 0.0;
        if constexpr (std::is_same_v<Mu, DensityField>) {
            for (std::size_t i = 0; i < mu.field.nodes(); ++i)
                acc += mu.field.values[i] * phi(mu.grid().node_point(i));
            acc *= mu.grid().cell_volume();
        } else {
            for (const auto& a : mu.atoms) acc += mu.weight() * phi(a);
        }
        if constexpr (std::is_same_v<Nu, DensityField>) {
            double sub = 0.0;
            for (std::size_t i = 0; i < nu.field.nodes(); ++i)
                sub += nu.field.values[i] * phi(nu.grid().node_point(i));
            acc -= sub * nu.grid().cell_volume();
        } else {
            for (const auto& a : nu.atoms) acc -= nu.weight() * phi(a);
        }
        return acc;
    };

    W1Bound out;
    const int d = grid.dim;
    // nodal quadrature of a 1-Lipschitz function against a cell-supported
    // density is off by at most h/4 per unit mass; subtract that slack so the
    // bound stays below the cell-based exact distance
    double quad_slack = 0.0;
    if constexpr (std::is_same_v<Mu, DensityField>) quad_slack += 0.25 * mu.grid().spacing() * std::sqrt(static_cast<double>(d));
    if constexpr (std::is_same_v<Nu, DensityField>) quad_slack += 0.25 * nu.grid().spacing() * std::sqrt(static_cast<double>(d));
    for (int q = 1; q <= 8; ++q)
        for (int ax = 0; ax < d; ++ax)
            for (int kind = 0; kind < 2; ++kind) {
                auto phi = [q, ax, kind](const std::vector<double>& x) {
                    const double th = two_pi * q * x[ax];
                    return (kind ? std::sin(th) : std::cos(th)) / (two_pi * q);
                };
                out.lower = std::max(out.lower, std::fabs(pair_with(phi)) - quad_slack);
            }
    for (int anchor = 0; anchor < 8; ++anchor) {
        std::vector<double> y(d, 0.0);
        y[0] = anchor / 8.0;
        auto phi = [y](const std::vector<double>& x) { return torus_dist(x, y); };
        out.lower = std::max(out.lower, std::fabs(pair_with(phi)) - quad_slack);
    }
    if (out.lower < 0.0) out.lower = 0.0;

    // upper bound: sequential balancing along the flat index order; every
    // consecutive pair of cells is torus-adjacent in the fastest axis
    auto ma = detail::cell_masses(mu, grid);
    auto mb = detail::cell_masses(nu, grid);
    const double h = grid.spacing();
    double cum = 0.0, cost = 0.0;
    for (std::size_t i = 0; i < ma.size(); ++i) {
        cum += ma[i] - mb[i];
        double step = h;
        if ((i + 1) % grid.points_per_axis == 0) step = h * std::sqrt(2.0);  // row turn
        if (i + 1 < ma.size()) cost += std::fabs(cum) * step;
    }
    cost += detail::projection_allowance(mu, grid) + detail::projection_allowance(nu, grid);
    out.upper = cost;
    if (out.upper < out.lower) out.upper = out.lower;  // roundoff guard
    return out;
}

// Kernel-density projection of an atomic measure onto the grid, renormalized
// to exact unit discrete mass.
inline DensityField project_to_grid(const EmpiricalMeasure& em, const TorusGrid& grid, double bandwidth) {
    if (em.atoms.empty()) throw std::invalid_argument("project_to_grid: empty measure");
    if (bandwidth < grid.spacing())
        throw std::invalid_argument("project_to_grid: bandwidth below grid spacing");
    Mollifier kde(bandwidth, grid);
    ScalarField f(grid);
    std::vector<double> dx(grid.dim);
    for (std::size_t i = 0; i < grid.node_count(); ++i) {
        const auto x = grid.node_point(i);
        double acc = 0.0;
        for (const auto& a : em.atoms) {
            for (int ax = 0; ax < grid.dim; ++ax) dx[ax] = Mollifier::coord_delta(x[ax], a[ax]);
            acc += kde.eval(dx);
        }
        f.values[i] = acc * em.weight();
    }
    return DensityField(std::move(f), /*renormalize=*/true);
}

// Inverse-CDF sampling of the cell-piecewise-constant density; deterministic
// under the seed.
inline std::vector<std::vector<double>> sample(const DensityField& m, int count, std::uint64_t seed) {
    if (count <= 0) throw std::invalid_argument("sample: count must be positive");
    const TorusGrid& g = m.grid();
    std::vector<double> cum(g.node_count());
    double acc = 0.0;
    for (std::size_t i = 0; i < cum.size(); ++i) {
        acc += m.field.values[i] * g.cell_volume();
        cum[i] = acc;
    }
    const double total = acc;
    SplitMix64 rng(derive_stream(seed, 0x5a4d504cULL));
    std::vector<std::vector<double>> pts;
    pts.reserve(count);
    const double h = g.spacing();
    for (int s = 0; s < count; ++s) {
        const double u = rng.uniform() * total;
        const auto it = std::lower_bound(cum.begin(), cum.end(), u);
        std::size_t cell = static_cast<std::size_t>(it - cum.begin());
        if (cell >= cum.size()) cell = cum.size() - 1;
        auto x = g.node_point(cell);
        for (int ax = 0; ax < g.dim; ++ax)
            x[ax] = wrap_unit(x[ax] - 0.5 * h + rng.uniform() * h);
        pts.push_back(std::move(x));
    }
    return pts;
}

}  // namespace mfglab
