#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "mfglab/grid.hpp"
#include "mfglab/kernel.hpp"
#include "mfglab/measures.hpp"
#include "mfglab/norms.hpp"
#include "mfglab/rng.hpp"

namespace mfglab {

// H(x,p) = phi(|p|^2) + pot_amp cos(2 pi x_1) with phi(s) = sqrt(1+s) - 1.
// Globally Lipschitz in p with |D_pH| < 1, and D^2_pp H positive definite
// everywhere.
struct Hamiltonian {
    double pot_amp = 0.1;
    double lipschitz_bound = 1.0;

    static double phi(double s) { return std::sqrt(1.0 + s) - 1.0; }
    static double dphi(double s) { return 0.5 / std::sqrt(1.0 + s); }
    static double ddphi(double s) { return -0.25 * std::pow(1.0 + s, -1.5); }
    static double dddphi(double s) { return 0.375 * std::pow(1.0 + s, -2.5); }

    double potential(const std::vector<double>& x) const { return pot_amp * std::cos(two_pi * x[0]); }

    double eval(const std::vector<double>& x, const std::vector<double>& p) const {
        double s = 0.0;
        for (double c : p) s += c * c;
        return phi(s) + potential(x);
    }

    std::vector<double> grad_p(const std::vector<double>& x, const std::vector<double>& p) const {
        (void)x;
        double s = 0.0;
        for (double c : p) s += c * c;
        std::vector<double> g(p.size());
        const double f = 2.0 * dphi(s);
        for (std::size_t i = 0; i < p.size(); ++i) g[i] = f * p[i];
        return g;
    }

    std::vector<std::vector<double>> hess_pp(const std::vector<double>& x, const std::vector<double>& p) const {
        (void)x;
        double s = 0.0;
        for (double c : p) s += c * c;
        const int d = static_cast<int>(p.size());
        std::vector<std::vector<double>> hh(d, std::vector<double>(d, 0.0));
        const double a = 2.0 * dphi(s), b = 4.0 * ddphi(s);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) hh[i][j] = (i == j ? a : 0.0) + b * p[i] * p[j];
        return hh;
    }

    // scalar-p shortcuts used by the d = 1 solvers
    double hp1(double p) const { return 2.0 * dphi(p * p) * p; }
    double hpp1(double p) const { return 2.0 * dphi(p * p) + 4.0 * ddphi(p * p) * p * p; }
    double hppp1(double p) const { return 12.0 * p * ddphi(p * p) + 8.0 * p * p * p * dddphi(p * p); }
};

// F(x,m) = slope m + quad m^2 / 2 + shape_amp sin(2 pi x_1).
// dF/dm = slope + quad m >= slope for m >= 0, quad >= 0.
struct LocalCoupling {
    double slope = 1.0;
    double quad = 0.0;
    double shape_amp = 0.5;

    double delta() const { return slope; }
    double f(const std::vector<double>& x, double m) const {
        return slope * m + 0.5 * quad * m * m + shape_amp * std::sin(two_pi * x[0]);
    }
    double fm(const std::vector<double>&, double m) const { return slope + quad * m; }
    double fmm(const std::vector<double>&, double) const { return quad; }
};

struct TerminalCost {
    double amp = 0.2;
    double g(const std::vector<double>& x) const { return amp * std::cos(two_pi * x[0]); }
};

struct ProblemSpec {
    Hamiltonian hamiltonian;
    LocalCoupling coupling;
    TerminalCost terminal;
};

enum class ProblemProfile { Default, Decoupled, Nonlinear, Mild };

inline ProblemSpec default_problem(ProblemProfile profile = ProblemProfile::Default) {
    ProblemSpec s;
    switch (profile) {
        case ProblemProfile::Default:
            break;
        case ProblemProfile::Decoupled:
            s.hamiltonian.pot_amp = 0.0;
            s.coupling = LocalCoupling{0.0, 0.0, 0.0};
            s.terminal.amp = 0.0;
            break;
        case ProblemProfile::Nonlinear:
            s.coupling.quad = 0.5;
            break;
        case ProblemProfile::Mild:
            s.hamiltonian.pot_amp = 0.05;
            s.coupling.shape_amp = 0.25;
            s.terminal.amp = 0.1;
            break;
    }
    return s;
}

// F^eps(x, m) = xi^eps * F(., xi^eps * m(.)): the local coupling seen through
// a double periodic convolution. Holds the grid-bound kernel.
class MollifiedCoupling {
public:
    MollifiedCoupling(LocalCoupling base, double epsilon, const TorusGrid& grid)
        : base_(base), moll_(epsilon, grid) {}

    const LocalCoupling& base() const { return base_; }
    const Mollifier& mollifier() const { return moll_; }
    double epsilon() const { return moll_.epsilon(); }
    const TorusGrid& grid() const { return moll_.grid(); }

    // smooth density path: conv, pointwise F, conv
    ScalarField eval(const DensityField& m) const {
        require_grid(m.grid());
        return eval_raw(m.field.values);
    }

    // same pipeline on a raw nonnegative sample vector (solver-internal)
    ScalarField eval_raw(const std::vector<double>& mvals) const {
        const TorusGrid& g = grid();
        auto inner = convolve(g, moll_.samples(), mvals);
        std::vector<double> w(inner.size());
        for (std::size_t i = 0; i < inner.size(); ++i)
            w[i] = base_.f(g.node_point(i), inner[i]);
        auto outer = convolve(g, moll_.samples(), w);
        ScalarField out(g);
        out.values = std::move(outer);
        return out;
    }

    // action of dF^eps/dm at base density mvals on a signed perturbation rho:
    // xi^eps * ( F_m(., xi^eps * m) . (xi^eps * rho) )
    std::vector<double> deriv_action(const std::vector<double>& mvals, const std::vector<double>& rho) const {
        const TorusGrid& g = grid();
        auto im = convolve(g, moll_.samples(), mvals);
        auto ir = convolve(g, moll_.samples(), rho);
        std::vector<double> w(im.size());
        for (std::size_t i = 0; i < im.size(); ++i)
            w[i] = base_.fm(g.node_point(i), im[i]) * ir[i];
        return convolve(g, moll_.samples(), w);
    }

    // action of d2F^eps/dm2 on (rho, rho):
    // xi^eps * ( F_mm(., xi^eps * m) . (xi^eps * rho)^2 )
    std::vector<double> second_deriv_action(const std::vector<double>& mvals, const std::vector<double>& rho) const {
        const TorusGrid& g = grid();
        auto im = convolve(g, moll_.samples(), mvals);
        auto ir = convolve(g, moll_.samples(), rho);
        std::vector<double> w(im.size());
        for (std::size_t i = 0; i < im.size(); ++i)
            w[i] = base_.fmm(g.node_point(i), im[i]) * ir[i] * ir[i];
        return convolve(g, moll_.samples(), w);
    }

private:
    void require_grid(const TorusGrid& g) const {
        if (!(g == grid())) throw std::invalid_argument("MollifiedCoupling: grid mismatch");
    }

    LocalCoupling base_;
    Mollifier moll_;
};

struct EmpiricalEval {
    double value = 0.0;
    bool under_resolved = false;
};

// F^eps(x, m^{N,i}): the inner convolution is evaluated at the exact atom
// positions (no grid projection of the atoms), the outer one by quadrature on
// the grid. Grid-aligned atoms reuse the renormalized kernel samples so that
// translations act bit-exactly.
inline EmpiricalEval mollified_eval_empirical(const MollifiedCoupling& fc, const EmpiricalMeasure& em,
                                              const std::vector<double>& x) {
    if (em.atoms.empty()) throw std::invalid_argument("mollified_eval_empirical: empty measure");
    const TorusGrid& g = fc.grid();
    const Mollifier& k = fc.mollifier();
    const double h = g.spacing();

    bool aligned = true;
    std::vector<std::size_t> atom_nodes(em.atoms.size());
    for (std::size_t j = 0; j < em.atoms.size() && aligned; ++j) {
        std::vector<int> mi(g.dim);
        for (int ax = 0; ax < g.dim; ++ax) {
            const double u = wrap_unit(em.atoms[j][ax]) / h;
            const double r = std::round(u);
            if (std::fabs(u - r) > 1e-12) { aligned = false; break; }
            mi[ax] = static_cast<int>(r);
        }
        if (aligned) atom_nodes[j] = g.flat(mi);
    }

    std::vector<double> inner(g.node_count(), 0.0);
    const double w = em.weight();
    if (aligned) {
        const auto& s = k.samples();
        std::vector<int> diff(g.dim);
        for (std::size_t i = 0; i < inner.size(); ++i) {
            const auto mi = g.unflat(i);
            double acc = 0.0;
            for (std::size_t j = 0; j < em.atoms.size(); ++j) {
                const auto mj = g.unflat(atom_nodes[j]);
                for (int ax = 0; ax < g.dim; ++ax) diff[ax] = mi[ax] - mj[ax];
                acc += s[g.flat(diff)];
            }
            inner[i] = acc * w;
        }
    } else {
        std::vector<double> dx(g.dim);
        for (std::size_t i = 0; i < inner.size(); ++i) {
            const auto xi = g.node_point(i);
            double acc = 0.0;
            for (const auto& a : em.atoms) {
                for (int ax = 0; ax < g.dim; ++ax) dx[ax] = Mollifier::coord_delta(xi[ax], a[ax]);
                acc += k.eval(dx);
            }
            inner[i] = acc * w;
        }
    }

    std::vector<double> fw(inner.size());
    for (std::size_t i = 0; i < inner.size(); ++i)
        fw[i] = fc.base().f(g.node_point(i), inner[i]);

    // outer quadrature at the query point
    double val = 0.0;
    bool xa = true;
    std::vector<int> xmi(g.dim);
    for (int ax = 0; ax < g.dim; ++ax) {
        const double u = wrap_unit(x[ax]) / h;
        const double r = std::round(u);
        if (std::fabs(u - r) > 1e-12) { xa = false; break; }
        xmi[ax] = static_cast<int>(r);
    }
    if (xa) {
        const auto& s = k.samples();
        std::vector<int> diff(g.dim);
        for (std::size_t i = 0; i < fw.size(); ++i) {
            const auto mi = g.unflat(i);
            for (int ax = 0; ax < g.dim; ++ax) diff[ax] = xmi[ax] - mi[ax];
            val += s[g.flat(diff)] * fw[i];
        }
    } else {
        std::vector<double> dx(g.dim);
        for (std::size_t i = 0; i < fw.size(); ++i) {
            const auto yi = g.node_point(i);
            for (int ax = 0; ax < g.dim; ++ax) dx[ax] = Mollifier::coord_delta(wrap_unit(x[ax]), yi[ax]);
            val += k.eval(dx) * fw[i];
        }
    }
    val *= g.cell_volume();
    return {val, k.under_resolved()};
}

// discrete pairing int (F^eps(m1) - F^eps(m2)) d(m1 - m2); Lasry-Lions
// monotonicity makes it nonnegative up to roundoff
inline double monotonicity_probe(const MollifiedCoupling& fc, const DensityField& m1, const DensityField& m2) {
    if (!(m1.grid() == m2.grid()) || !(m1.grid() == fc.grid()))
        throw std::invalid_argument("monotonicity_probe: grid mismatch");
    const auto f1 = fc.eval(m1);
    const auto f2 = fc.eval(m2);
    double acc = 0.0;
    for (std::size_t i = 0; i < f1.nodes(); ++i)
        acc += (f1.values[i] - f2.values[i]) * (m1.field.values[i] - m2.field.values[i]);
    return acc * fc.grid().cell_volume();
}

// Random trigonometric density with spectral decay k^{-(1+alpha)}, scaled so
// its C^alpha probe stays below target_norm and the density stays positive.
inline DensityField random_holder_density(const TorusGrid& g, double alpha, double target_norm,
                                          std::uint64_t seed, int max_mode = 0) {
    if (g.dim != 1) throw std::invalid_argument("random_holder_density: d = 1 sampler");
    if (max_mode <= 0) max_mode = std::min(g.points_per_axis / 4, 32);
    SplitMix64 rng(derive_stream(seed, 0xC0FFEEULL));
    ScalarField gfield(g);
    for (int k = 1; k <= max_mode; ++k) {
        const double amp = std::pow(static_cast<double>(k), -(1.0 + alpha));
        const double phase = rng.uniform() * two_pi;
        const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        for (std::size_t i = 0; i < g.node_count(); ++i) {
            const double x = g.node_point(i)[0];
            gfield.values[i] += sign * amp * std::cos(two_pi * k * x + phase);
        }
    }
    double sup = sup_norm(gfield.values);
    const double semi = detail::holder_seminorm_sampled(gfield, std::min(alpha, 1.0), 4096);
    const double a_norm = 0.9 * (target_norm - 1.0) / std::max(sup + semi, 1e-14);
    const double a_pos = 0.98 / std::max(sup, 1e-14);
    const double a = std::min(a_norm, a_pos);
    if (!(a > 0.0)) throw std::runtime_error("random_holder_density: no admissible amplitude for target norm");
    ScalarField m(g, 1.0);
    for (std::size_t i = 0; i < g.node_count(); ++i) m.values[i] += a * gfield.values[i];
    return DensityField(std::move(m), /*renormalize=*/true);
}

// Empirical lower bound for k^{R,alpha}_eps: the sup-norm gap between the
// mollified and the local coupling, maximized over sampled densities of
// C^alpha probe norm <= R. The sample set mixes random rough fields with the
// single-mode near-extremizers m = 1 + A cos(2 pi k x), whose C^alpha budget
// sits entirely at one scale.
inline double closeness_probe(const MollifiedCoupling& fc, double R, double alpha, int samples,
                              std::uint64_t seed = 2024) {
    if (samples < 1) throw std::invalid_argument("closeness_probe: samples must be >= 1");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("closeness_probe: alpha in (0,1]");
    const TorusGrid& g = fc.grid();

    const auto gap_for = [&](const DensityField& m) {
        const auto feps = fc.eval(m);
        double gap = 0.0;
        for (std::size_t i = 0; i < g.node_count(); ++i) {
            const double loc = fc.base().f(g.node_point(i), m.field.values[i]);
            gap = std::max(gap, std::fabs(feps.values[i] - loc));
        }
        return gap;
    };

    double worst = 0.0;
    bool any = false;
    for (int s = 0; s < samples; ++s) {
        DensityField m = random_holder_density(g, alpha, R, derive_stream(seed, s));
        if (holder_norm_probe_closed(m.field, alpha) > R)
            throw std::runtime_error("closeness_probe: sampler exceeded the norm constraint");
        worst = std::max(worst, gap_for(m));
        any = true;
    }
    for (int k = 1; k <= g.points_per_axis / 4; k = k < 4 ? k + 1 : (3 * k) / 2) {
        // alpha-seminorm of cos(2 pi k x) ~ (2 pi k)^alpha * 2^(1-alpha)
        const double semi = std::pow(two_pi * k, alpha) * std::pow(2.0, 1.0 - alpha);
        double amp = 0.9 * (R - 1.0) / (1.0 + semi);
        amp = std::min(amp, 0.95);
        if (!(amp > 0.0)) continue;
        ScalarField f(g);
        for (std::size_t i = 0; i < g.node_count(); ++i)
            f.values[i] = 1.0 + amp * std::cos(two_pi * k * g.node_point(i)[0]);
        DensityField m(f);
        if (holder_norm_probe_closed(m.field, alpha) > R) continue;
        worst = std::max(worst, gap_for(m));
        any = true;
    }
    if (!any) throw std::runtime_error("closeness_probe: no admissible density in the sampler");
    return worst;
}

// Discrete C^4 estimate of x -> F^eps(x, m), maximized over a deterministic
// density sample set. Tracks the blow-up order of K^{(0)}_{eps,alpha}.
inline double regularity_probe(const MollifiedCoupling& fc, double alpha) {
    const TorusGrid& g = fc.grid();
    std::vector<DensityField> probes;
    probes.push_back(uniform_density(g));
    {
        ScalarField spike(g, 0.0);
        spike.values[g.node_count() / 3] = 1.0 / g.cell_volume();  // single-cell atom
        probes.push_back(DensityField(std::move(spike)));
    }
    probes.push_back(random_holder_density(g, std::min(alpha, 0.99), 4.0, 77));
    double worst = 0.0;
    for (const auto& m : probes) {
        const auto feps = fc.eval(m);
        worst = std::max(worst, c4_norm_probe(feps, std::min(alpha, 0.99)));
    }
    return worst;
}

}  // namespace mfglab
