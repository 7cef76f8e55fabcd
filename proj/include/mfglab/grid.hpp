#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mfglab {

inline constexpr double two_pi = 6.283185307179586476925286766559;

// Uniform grid on the unit torus T^d = R^d / Z^d, M nodes per axis at
// x_i = i*h with h = 1/M. All index arithmetic wraps modulo M.
struct TorusGrid {
    int dim = 1;
    int points_per_axis = 8;

    TorusGrid() = default;
    TorusGrid(int d, int m) : dim(d), points_per_axis(m) {
        if (d < 1) throw std::invalid_argument("TorusGrid: dim must be >= 1");
        if (m < 8) throw std::invalid_argument("TorusGrid: points_per_axis must be >= 8");
    }

    double spacing() const { return 1.0 / static_cast<double>(points_per_axis); }
    double cell_volume() const { return std::pow(spacing(), dim); }

    std::size_t node_count() const {
        std::size_t n = 1;
        for (int a = 0; a < dim; ++a) n *= static_cast<std::size_t>(points_per_axis);
        return n;
    }

    int wrap(int i) const {
        const int m = points_per_axis;
        int r = i % m;
        return r < 0 ? r + m : r;
    }

    // row-major flat index; axis dim-1 is fastest
    std::size_t flat(const std::vector<int>& multi) const {
        std::size_t idx = 0;
        for (int a = 0; a < dim; ++a) idx = idx * points_per_axis + wrap(multi[a]);
        return idx;
    }

    std::vector<int> unflat(std::size_t idx) const {
        std::vector<int> multi(dim);
        for (int a = dim - 1; a >= 0; --a) {
            multi[a] = static_cast<int>(idx % points_per_axis);
            idx /= points_per_axis;
        }
        return multi;
    }

    std::vector<double> node_point(std::size_t idx) const {
        auto mi = unflat(idx);
        std::vector<double> x(dim);
        for (int a = 0; a < dim; ++a) x[a] = mi[a] * spacing();
        return x;
    }

    bool operator==(const TorusGrid& other) const {
        return dim == other.dim && points_per_axis == other.points_per_axis;
    }
};

struct TimeGrid {
    double t0 = 0.0;
    double horizon = 1.0;
    int steps = 1;

    TimeGrid() = default;
    TimeGrid(double start, double T, int K) : t0(start), horizon(T), steps(K) {
        if (!(T > start)) throw std::invalid_argument("TimeGrid: horizon must exceed t0");
        if (K < 1) throw std::invalid_argument("TimeGrid: steps must be >= 1");
    }

    double dt() const { return (horizon - t0) / steps; }
    double node(int k) const { return k == steps ? horizon : t0 + k * dt(); }

    bool operator==(const TimeGrid& other) const {
        return t0 == other.t0 && horizon == other.horizon && steps == other.steps;
    }
};

// geodesic distance between two points of [0,1)^d (componentwise wrap)
inline double torus_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = std::fabs(a[i] - b[i]);
        d = std::min(d, 1.0 - d);
        s += d * d;
    }
    return std::sqrt(s);
}

inline double wrap_unit(double x) {
    double r = x - std::floor(x);
    if (r >= 1.0) r = 0.0;  // guards x = -1e-18
    return r;
}

// Scalar samples on a TorusGrid, optionally with a leading time axis.
// values has (steps+1) * M^d entries when time-dependent, M^d otherwise.
struct ScalarField {
    TorusGrid grid;
    std::optional<TimeGrid> time;
    std::vector<double> values;

    ScalarField() = default;

    explicit ScalarField(TorusGrid g, double fill = 0.0)
        : grid(g), values(g.node_count(), fill) {}

    ScalarField(TorusGrid g, TimeGrid tg, double fill = 0.0)
        : grid(g), time(tg),
          values(static_cast<std::size_t>(tg.steps + 1) * g.node_count(), fill) {}

    std::size_t nodes() const { return grid.node_count(); }
    int time_slices() const { return time ? time->steps + 1 : 1; }

    double* slice(int k) { return values.data() + static_cast<std::size_t>(k) * nodes(); }
    const double* slice(int k) const { return values.data() + static_cast<std::size_t>(k) * nodes(); }

    double& at(std::size_t node) { return values[node]; }
    double at(std::size_t node) const { return values[node]; }
    double& at(int k, std::size_t node) { return values[static_cast<std::size_t>(k) * nodes() + node]; }
    double at(int k, std::size_t node) const { return values[static_cast<std::size_t>(k) * nodes() + node]; }

    // spatial slice as its own field
    ScalarField slice_field(int k) const {
        ScalarField f(grid);
        const double* s = slice(k);
        for (std::size_t i = 0; i < nodes(); ++i) f.values[i] = s[i];
        return f;
    }

    void check_finite(const char* who) const {
        for (std::size_t i = 0; i < values.size(); ++i)
            if (!std::isfinite(values[i]))
                throw std::runtime_error(std::string(who) + ": non-finite value at flat index " + std::to_string(i));
    }
};

// d components per node, planar layout: component-major within a time slice.
struct VectorField {
    TorusGrid grid;
    std::optional<TimeGrid> time;
    std::vector<double> values;

    VectorField() = default;

    explicit VectorField(TorusGrid g, double fill = 0.0)
        : grid(g), values(g.node_count() * g.dim, fill) {}

    VectorField(TorusGrid g, TimeGrid tg, double fill = 0.0)
        : grid(g), time(tg),
          values(static_cast<std::size_t>(tg.steps + 1) * g.node_count() * g.dim, fill) {}

    std::size_t nodes() const { return grid.node_count(); }

    double& at(int k, int axis, std::size_t node) {
        return values[(static_cast<std::size_t>(k) * grid.dim + axis) * nodes() + node];
    }
    double at(int k, int axis, std::size_t node) const {
        return values[(static_cast<std::size_t>(k) * grid.dim + axis) * nodes() + node];
    }
    double& at(int axis, std::size_t node) { return at(0, axis, node); }
    double at(int axis, std::size_t node) const { return at(0, axis, node); }

    double max_abs() const {
        double m = 0.0;
        for (double v : values) m = std::max(m, std::fabs(v));
        return m;
    }
};

// index of the neighbor one step along `axis`, on a row-major tensor grid
// with `m` points per axis
inline std::size_t neighbor(std::size_t idx, int axis, int step, int dim, int m) {
    std::size_t stride = 1;
    for (int a = dim - 1; a > axis; --a) stride *= m;
    const std::size_t coord = (idx / stride) % m;
    int c = static_cast<int>(coord) + step;
    c %= m;
    if (c < 0) c += m;
    return idx + (static_cast<std::size_t>(c) - coord) * stride;
}

// periodic central differences, exact-zero on constants
inline VectorField gradient(const ScalarField& f) {
    if (f.time) throw std::invalid_argument("gradient: expected a spatial field or a single slice");
    f.check_finite("gradient");
    const TorusGrid& g = f.grid;
    VectorField out(g);
    const double inv2h = 1.0 / (2.0 * g.spacing());
    for (int ax = 0; ax < g.dim; ++ax)
        for (std::size_t i = 0; i < g.node_count(); ++i) {
            const double fp = f.values[neighbor(i, ax, +1, g.dim, g.points_per_axis)];
            const double fm = f.values[neighbor(i, ax, -1, g.dim, g.points_per_axis)];
            out.at(ax, i) = (fp - fm) * inv2h;
        }
    return out;
}

// 3-point (per axis) periodic Laplacian
inline ScalarField laplacian(const ScalarField& f) {
    if (f.time) throw std::invalid_argument("laplacian: expected a spatial field");
    const TorusGrid& g = f.grid;
    ScalarField out(g);
    const double invh2 = 1.0 / (g.spacing() * g.spacing());
    for (std::size_t i = 0; i < g.node_count(); ++i) {
        double s = 0.0;
        for (int ax = 0; ax < g.dim; ++ax) {
            s += f.values[neighbor(i, ax, +1, g.dim, g.points_per_axis)] +
                 f.values[neighbor(i, ax, -1, g.dim, g.points_per_axis)] - 2.0 * f.values[i];
        }
        out.values[i] = s * invh2;
    }
    return out;
}

// Periodic multilinear interpolation of one spatial slice at x in [0,1)^d.
inline double interpolate_slice(const TorusGrid& g, const double* slice, const std::vector<double>& x) {
    const int d = g.dim, m = g.points_per_axis;
    const double h = g.spacing();
    std::vector<int> base(d);
    std::vector<double> frac(d);
    for (int a = 0; a < d; ++a) {
        const double u = wrap_unit(x[a]) / h;
        int b = static_cast<int>(std::floor(u));
        double fr = u - b;
        if (b >= m) { b -= m; }
        base[a] = b;
        frac[a] = fr;
    }
    double acc = 0.0;
    const int corners = 1 << d;
    std::vector<int> multi(d);
    for (int c = 0; c < corners; ++c) {
        double w = 1.0;
        for (int a = 0; a < d; ++a) {
            const int bit = (c >> a) & 1;
            w *= bit ? frac[a] : (1.0 - frac[a]);
            multi[a] = base[a] + bit;
        }
        if (w != 0.0) acc += w * slice[g.flat(multi)];
    }
    return acc;
}

// Multilinear in space, linear in time. Reproduces nodal values exactly.
inline double interpolate(const ScalarField& f, double t, const std::vector<double>& x) {
    if (!f.time) return interpolate_slice(f.grid, f.values.data(), x);
    const TimeGrid& tg = *f.time;
    const double eps_t = 1e-12 * std::max(1.0, std::fabs(tg.horizon));
    if (t < tg.t0 - eps_t || t > tg.horizon + eps_t)
        throw std::out_of_range("interpolate: t outside [t0, T]");
    double u = (t - tg.t0) / tg.dt();
    if (u < 0.0) u = 0.0;
    if (u > tg.steps) u = tg.steps;
    int k = static_cast<int>(std::floor(u));
    if (k >= tg.steps) k = tg.steps - 1;
    const double w = u - k;
    const double lo = interpolate_slice(f.grid, f.slice(k), x);
    if (w == 0.0) return lo;
    const double hi = interpolate_slice(f.grid, f.slice(k + 1), x);
    return (1.0 - w) * lo + w * hi;
}

inline double sup_norm(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::fabs(x));
    return m;
}

inline double sup_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

}  // namespace mfglab
