#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "mfglab/fft.hpp"
#include "mfglab/grid.hpp"

namespace mfglab {

namespace detail {

// bump profile on |t| < 1, C^inf with compact support
inline double bump_raw(double t) {
    const double t2 = t * t;
    if (t2 >= 1.0) return 0.0;
    return std::exp(-1.0 / (1.0 - t2));
}

// mass of the radial bump on the unit ball of R^d: |S^{d-1}| times the
// radial integral of raw(r) r^{d-1} (Simpson quadrature)
inline double bump_mass(int dim) {
    const int n = 4096;
    const double dr = 1.0 / n;
    double acc = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double r = i * dr;
        const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        acc += w * bump_raw(r) * std::pow(r, dim - 1);
    }
    const double pi = two_pi / 2.0;
    const double surf = 2.0 * std::pow(pi, dim / 2.0) / std::tgamma(dim / 2.0);
    return surf * acc * dr / 3.0;
}

}  // namespace detail

// Smooth symmetric nonnegative kernel with support in the epsilon-ball,
// xi_eps(x) = eps^{-d} xi(x/eps), periodized onto the torus. Two views are
// kept: analytic point evaluation (continuous unit mass) and grid samples
// renormalized to exact unit discrete mass.
class Mollifier {
public:
    Mollifier(double epsilon, const TorusGrid& grid)
        : eps_(epsilon), grid_(grid), cont_mass_(detail::bump_mass(grid.dim)) {
        if (!(epsilon > 0.0)) throw std::invalid_argument("Mollifier: epsilon must be positive");
        build_samples();
    }

    double epsilon() const { return eps_; }
    const TorusGrid& grid() const { return grid_; }
    const std::vector<double>& samples() const { return samples_; }

    // true when the support covers less than one grid cell per axis
    bool under_resolved() const { return eps_ < grid_.spacing(); }

    // Periodized analytic evaluation at a displacement vector. Components are
    // canonicalized to their absolute value first so evenness holds bit-exactly.
    double eval(const std::vector<double>& dx) const {
        const int d = grid_.dim;
        const int reach = static_cast<int>(std::ceil(eps_)) + 1;
        std::vector<double> adx(d);
        for (int a = 0; a < d; ++a) adx[a] = std::fabs(dx[a]);
        double acc = 0.0;
        std::vector<int> shift(d, -reach);
        while (true) {
            double r2 = 0.0;
            for (int a = 0; a < d; ++a) {
                const double c = adx[a] + shift[a];
                r2 += c * c;
            }
            acc += detail::bump_raw(std::sqrt(r2) / eps_);
            int a = d - 1;
            while (a >= 0 && ++shift[a] > reach) shift[a--] = -reach;
            if (a < 0) break;
        }
        return acc / (cont_mass_ * std::pow(eps_, d));
    }

    // displacement between two scalar coordinates, shortest representative
    static double coord_delta(double a, double b) {
        double d = a - b;
        d -= std::round(d);
        return d;
    }

private:
    void build_samples() {
        samples_.resize(grid_.node_count());
        double mass = 0.0;
        for (std::size_t i = 0; i < samples_.size(); ++i) {
            auto x = grid_.node_point(i);
            for (double& c : x) {
                c -= std::round(c);  // distance representative in [-1/2, 1/2)
            }
            samples_[i] = eval(x);
            mass += samples_[i];
        }
        mass *= grid_.cell_volume();
        if (!(mass > 0.0)) throw std::runtime_error("Mollifier: degenerate sample mass");
        for (double& s : samples_) s /= mass;  // exact unit discrete mass
    }

    double eps_;
    TorusGrid grid_;
    double cont_mass_;
    std::vector<double> samples_;
};

// Circular convolution (k * a)_i = h^d sum_o k_o a_{i-o}. The sum runs over
// kernel offsets in a fixed order, which makes grid-aligned translation
// equivariance bit-exact.
inline std::vector<double> conv_direct(const TorusGrid& g, const std::vector<double>& kernel,
                                       const std::vector<double>& a) {
    const std::size_t n = g.node_count();
    if (kernel.size() != n || a.size() != n) throw std::invalid_argument("conv_direct: size mismatch");
    std::vector<double> out(n, 0.0);
    const int d = g.dim;
    std::vector<int> mi(d), mo(d), src(d);
    for (std::size_t i = 0; i < n; ++i) {
        mi = g.unflat(i);
        double acc = 0.0;
        for (std::size_t o = 0; o < n; ++o) {
            mo = g.unflat(o);
            for (int adx = 0; adx < d; ++adx) src[adx] = mi[adx] - mo[adx];
            acc += kernel[o] * a[g.flat(src)];
        }
        out[i] = acc * g.cell_volume();
    }
    return out;
}

// same convolution through the FFT (power-of-two grids)
inline std::vector<double> conv_fft(const TorusGrid& g, const std::vector<double>& kernel,
                                    const std::vector<double>& a) {
    const std::size_t n = g.node_count();
    if (kernel.size() != n || a.size() != n) throw std::invalid_argument("conv_fft: size mismatch");
    std::vector<std::size_t> dims(g.dim, static_cast<std::size_t>(g.points_per_axis));
    TensorFFT fft(dims);
    std::vector<cplx> ka(n), aa(n);
    for (std::size_t i = 0; i < n; ++i) {
        ka[i] = cplx(kernel[i], 0.0);
        aa[i] = cplx(a[i], 0.0);
    }
    fft.transform(ka.data(), false);
    fft.transform(aa.data(), false);
    for (std::size_t i = 0; i < n; ++i) aa[i] *= ka[i];
    fft.transform(aa.data(), true);
    std::vector<double> out(n);
    const double vol = g.cell_volume();
    for (std::size_t i = 0; i < n; ++i) out[i] = aa[i].real() * vol;
    return out;
}

// Offset-ordered direct summation in one dimension (shift equivariance stays
// bit-exact and the grids are small); FFT beyond.
inline std::vector<double> convolve(const TorusGrid& g, const std::vector<double>& kernel,
                                    const std::vector<double>& a) {
    if (g.dim == 1) {
        const std::size_t n = g.node_count();
        std::vector<double> out(n, 0.0);
        const int m = g.points_per_axis;
        for (int i = 0; i < m; ++i) {
            double acc = 0.0;
            for (int o = 0; o < m; ++o) {
                int src = i - o;
                if (src < 0) src += m;
                acc += kernel[o] * a[src];
            }
            out[i] = acc * g.cell_volume();
        }
        return out;
    }
    if (is_pow2(static_cast<std::size_t>(g.points_per_axis))) return conv_fft(g, kernel, a);
    return conv_direct(g, kernel, a);
}

}  // namespace mfglab
