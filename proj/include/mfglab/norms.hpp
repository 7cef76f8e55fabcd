#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "mfglab/grid.hpp"

namespace mfglab {

namespace detail {

// deterministic node subset: all nodes when small, strided otherwise
inline std::vector<std::size_t> probe_nodes(std::size_t count, std::size_t cap) {
    std::vector<std::size_t> out;
    if (count <= cap) {
        out.resize(count);
        for (std::size_t i = 0; i < count; ++i) out[i] = i;
        return out;
    }
    const std::size_t stride = (count + cap - 1) / cap;
    for (std::size_t i = 0; i < count; i += stride) out.push_back(i);
    return out;
}

inline double holder_seminorm_sampled(const ScalarField& f, double alpha, std::size_t cap) {
    const auto nodes = probe_nodes(f.nodes(), cap);
    double semi = 0.0;
    std::vector<std::vector<double>> pts(nodes.size());
    for (std::size_t a = 0; a < nodes.size(); ++a) pts[a] = f.grid.node_point(nodes[a]);
    for (std::size_t a = 0; a < nodes.size(); ++a)
        for (std::size_t b = a + 1; b < nodes.size(); ++b) {
            const double dist = torus_dist(pts[a], pts[b]);
            if (dist <= 0.0) continue;
            const double q = std::fabs(f.values[nodes[a]] - f.values[nodes[b]]) / std::pow(dist, alpha);
            semi = std::max(semi, q);
        }
    return semi;
}

}  // namespace detail

// Discrete surrogate for ||f||_{C^alpha}: max|f| plus the Hoelder quotient
// maximized over a deterministic pair set (all pairs for M^d <= 4096,
// stride-subsampled beyond that). A lower bound of the exact norm, monotone
// in the sampled pair set.
inline double holder_norm_probe(const ScalarField& f, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("holder_norm_probe: alpha must lie in (0,1)");
    if (f.time) throw std::invalid_argument("holder_norm_probe: spatial fields only");
    double m = 0.0;
    for (double v : f.values) m = std::max(m, std::fabs(v));
    return m + detail::holder_seminorm_sampled(f, alpha, 4096);
}

// Same probe with alpha in (0,1]; alpha = 1 measures the Lipschitz quotient.
inline double holder_norm_probe_closed(const ScalarField& f, double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0))
        throw std::invalid_argument("holder_norm_probe_closed: alpha must lie in (0,1]");
    double m = 0.0;
    for (double v : f.values) m = std::max(m, std::fabs(v));
    return m + detail::holder_seminorm_sampled(f, alpha, 4096);
}

// One trigonometric dictionary entry: u(x) = prod_a factor(2 pi q_a x_a).
struct DualDictEntry {
    std::vector<int> freq;       // q_a >= 0
    std::vector<int> kind;       // 0: constant one, 1: cos, 2: sin (per axis)
    double norm_bound = 1.0;     // upper bound of ||u||_{k+alpha}

    double eval(const std::vector<double>& x) const {
        double v = 1.0;
        for (std::size_t a = 0; a < freq.size(); ++a) {
            const double th = two_pi * freq[a] * x[a];
            if (kind[a] == 1) v *= std::cos(th);
            else if (kind[a] == 2) v *= std::sin(th);
        }
        return v;
    }
};

namespace detail {

// ||u||_{k+alpha} upper bound for a unit-amplitude trig product:
// sup|D^l u| = prod (2 pi q_a)^{l_a}, and the Hoelder seminorm of a smooth g
// obeys Hoel_alpha(g) <= (2||g||)^(1-alpha) ||Dg||^alpha.
inline double trig_norm_bound(const std::vector<int>& freq, int k, double alpha) {
    const int d = static_cast<int>(freq.size());
    std::vector<double> w(d);
    for (int a = 0; a < d; ++a) w[a] = two_pi * freq[a];

    double total = 0.0;
    double top = 0.0;  // sum over |l| = k of the Hoelder bounds
    std::vector<int> l(d, 0);
    // enumerate multi-indices with |l| <= k
    const auto sup_dl = [&](const std::vector<int>& li) {
        double s = 1.0;
        for (int a = 0; a < d; ++a) s *= std::pow(w[a], li[a]);
        return s;
    };
    std::vector<std::vector<int>> all;
    std::vector<int> cur(d, 0);
    const auto rec = [&](auto&& self, int axis, int rem) -> void {
        if (axis == d) {
            all.push_back(cur);
            return;
        }
        for (int v = 0; v <= rem; ++v) {
            cur[axis] = v;
            self(self, axis + 1, rem - v);
        }
        cur[axis] = 0;
    };
    rec(rec, 0, k);
    for (const auto& li : all) {
        int order = 0;
        for (int a = 0; a < d; ++a) order += li[a];
        const double sup = sup_dl(li);
        total += sup;
        if (order == k) {
            // ||D(D^l u)|| <= sup * sum_a w_a (gradient of the product)
            double grad = 0.0;
            for (int a = 0; a < d; ++a) grad += w[a];
            const double hol = (grad > 0.0)
                ? std::pow(2.0 * sup, 1.0 - alpha) * std::pow(sup * grad, alpha)
                : 0.0;
            top += hol;
        }
    }
    return total + top;
}

}  // namespace detail

inline std::vector<DualDictEntry> dual_dictionary(int dim, int k, double alpha, int max_freq = 8) {
    if (k < 1 || k > 4) throw std::invalid_argument("dual_dictionary: k must be 1..4");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("dual_dictionary: alpha in (0,1)");
    std::vector<DualDictEntry> dict;
    // constant test function, ||1||_{k+alpha} = 1
    dict.push_back({std::vector<int>(dim, 0), std::vector<int>(dim, 0), 1.0});
    if (dim == 1) {
        for (int q = 1; q <= max_freq; ++q)
            for (int kind = 1; kind <= 2; ++kind) {
                DualDictEntry e{{q}, {kind}, detail::trig_norm_bound({q}, k, alpha)};
                dict.push_back(e);
            }
        return dict;
    }
    // d >= 2: axis-aligned modes only (desk-scale dictionary)
    for (int ax = 0; ax < dim; ++ax)
        for (int q = 1; q <= max_freq; ++q)
            for (int kind = 1; kind <= 2; ++kind) {
                std::vector<int> freq(dim, 0), kd(dim, 0);
                freq[ax] = q;
                kd[ax] = kind;
                dict.push_back({freq, kd, detail::trig_norm_bound(freq, k, alpha)});
            }
    return dict;
}

// Lower bound of ||rho||_{-(k+alpha)} over the trigonometric dictionary,
// monotone in dictionary size.
inline double dual_norm_probe(const ScalarField& rho, int k, double alpha, int max_freq = 8) {
    const auto dict = dual_dictionary(rho.grid.dim, k, alpha, max_freq);
    if (dict.empty()) throw std::runtime_error("dual_norm_probe: empty dictionary");
    const double vol = rho.grid.cell_volume();
    double best = 0.0;
    for (const auto& e : dict) {
        double pair = 0.0;
        for (std::size_t i = 0; i < rho.nodes(); ++i)
            pair += rho.values[i] * e.eval(rho.grid.node_point(i));
        pair *= vol;
        best = std::max(best, std::fabs(pair) / e.norm_bound);
    }
    return best;
}

namespace detail {

inline ScalarField central_diff(const ScalarField& f, int axis) {
    ScalarField out(f.grid);
    const double inv2h = 1.0 / (2.0 * f.grid.spacing());
    for (std::size_t i = 0; i < f.nodes(); ++i) {
        out.values[i] = (f.values[neighbor(i, axis, +1, f.grid.dim, f.grid.points_per_axis)] -
                         f.values[neighbor(i, axis, -1, f.grid.dim, f.grid.points_per_axis)]) * inv2h;
    }
    return out;
}

inline ScalarField second_diff(const ScalarField& f, int axis) {
    ScalarField out(f.grid);
    const double invh2 = 1.0 / (f.grid.spacing() * f.grid.spacing());
    for (std::size_t i = 0; i < f.nodes(); ++i) {
        out.values[i] = (f.values[neighbor(i, axis, +1, f.grid.dim, f.grid.points_per_axis)] -
                         2.0 * f.values[i] +
                         f.values[neighbor(i, axis, -1, f.grid.dim, f.grid.points_per_axis)]) * invh2;
    }
    return out;
}

}  // namespace detail

// Discrete C^{4+alpha} estimate: sums the sup of axis-pure finite-difference
// derivatives up to order 4 plus the sampled Hoelder quotient of the top one.
inline double c4_norm_probe(const ScalarField& f, double alpha) {
    double total = sup_norm(f.values);
    double top_semi = 0.0;
    for (int ax = 0; ax < f.grid.dim; ++ax) {
        ScalarField d1 = detail::central_diff(f, ax);
        ScalarField d2 = detail::second_diff(f, ax);
        ScalarField d3 = detail::central_diff(d2, ax);
        ScalarField d4 = detail::second_diff(d2, ax);
        total += sup_norm(d1.values) + sup_norm(d2.values) + sup_norm(d3.values) + sup_norm(d4.values);
        top_semi = std::max(top_semi, detail::holder_seminorm_sampled(d4, alpha, 1024));
    }
    return total + top_semi;
}

}  // namespace mfglab
