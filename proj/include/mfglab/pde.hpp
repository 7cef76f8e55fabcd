#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "mfglab/coupling.hpp"
#include "mfglab/fft.hpp"
#include "mfglab/grid.hpp"

namespace mfglab {

namespace stencil {

inline std::size_t axis_stride(const TorusGrid& g, int axis) {
    std::size_t s = 1;
    for (int a = g.dim - 1; a > axis; --a) s *= static_cast<std::size_t>(g.points_per_axis);
    return s;
}

// walk every periodic line along `axis`, calling f(line_base_indices...) with
// idx(k) = base + off + k*stride
template <typename F>
inline void for_each_line(const TorusGrid& g, int axis, F&& f) {
    const std::size_t stride = axis_stride(g, axis);
    const std::size_t m = static_cast<std::size_t>(g.points_per_axis);
    const std::size_t block = stride * m;
    const std::size_t total = g.node_count();
    for (std::size_t base = 0; base < total; base += block)
        for (std::size_t off = 0; off < stride; ++off) f(base + off, stride, m);
}

// one-sided differences along an axis
inline void one_sided(const TorusGrid& g, int axis, const std::vector<double>& u,
                      std::vector<double>& dminus, std::vector<double>& dplus) {
    const double invh = 1.0 / g.spacing();
    for_each_line(g, axis, [&](std::size_t start, std::size_t stride, std::size_t m) {
        for (std::size_t k = 0; k < m; ++k) {
            const std::size_t i = start + k * stride;
            const std::size_t ip = start + ((k + 1) % m) * stride;
            const std::size_t im = start + ((k + m - 1) % m) * stride;
            dminus[i] = (u[i] - u[im]) * invh;
            dplus[i] = (u[ip] - u[i]) * invh;
        }
    });
}

// out += scale * sum_ax [ cm . D-w + cp . D+w ]   (cm >= 0 >= cp)
inline void apply_transport(const TorusGrid& g, const std::vector<int>& axes,
                            const std::vector<std::vector<double>>& cm,
                            const std::vector<std::vector<double>>& cp,
                            const std::vector<double>& w, std::vector<double>& out, double scale) {
    const double invh = 1.0 / g.spacing();
    for (std::size_t a = 0; a < axes.size(); ++a) {
        const auto& cma = cm[a];
        const auto& cpa = cp[a];
        for_each_line(g, axes[a], [&](std::size_t start, std::size_t stride, std::size_t m) {
            for (std::size_t k = 0; k < m; ++k) {
                const std::size_t i = start + k * stride;
                const std::size_t ip = start + ((k + 1) % m) * stride;
                const std::size_t im = start + ((k + m - 1) % m) * stride;
                out[i] += scale * invh * (cma[i] * (w[i] - w[im]) + cpa[i] * (w[ip] - w[i]));
            }
        });
    }
}

// out += scale * sum_ax [ D+(am . dens) + D-(ap . dens) ]
// This is exactly -T^T dens for T = apply_transport(am, ap, .), so the
// forward density step is the transpose of the backward transport step.
inline void flux_divergence(const TorusGrid& g, const std::vector<int>& axes,
                            const std::vector<std::vector<double>>& am,
                            const std::vector<std::vector<double>>& ap,
                            const std::vector<double>& dens, std::vector<double>& out, double scale) {
    const double invh = 1.0 / g.spacing();
    for (std::size_t a = 0; a < axes.size(); ++a) {
        const auto& ama = am[a];
        const auto& apa = ap[a];
        for_each_line(g, axes[a], [&](std::size_t start, std::size_t stride, std::size_t m) {
            for (std::size_t k = 0; k < m; ++k) {
                const std::size_t i = start + k * stride;
                const std::size_t ip = start + ((k + 1) % m) * stride;
                const std::size_t im = start + ((k + m - 1) % m) * stride;
                out[i] += scale * invh * (ama[ip] * dens[ip] - ama[i] * dens[i] +
                                          apa[i] * dens[i] - apa[im] * dens[im]);
            }
        });
    }
}

// out += scale * sum_ax centered difference of c[ax]
inline void centered_divergence(const TorusGrid& g, const std::vector<int>& axes,
                                const std::vector<std::vector<double>>& c,
                                std::vector<double>& out, double scale) {
    const double inv2h = 0.5 / g.spacing();
    for (std::size_t a = 0; a < axes.size(); ++a) {
        const auto& ca = c[a];
        for_each_line(g, axes[a], [&](std::size_t start, std::size_t stride, std::size_t m) {
            for (std::size_t k = 0; k < m; ++k) {
                const std::size_t i = start + k * stride;
                const std::size_t ip = start + ((k + 1) % m) * stride;
                const std::size_t im = start + ((k + m - 1) % m) * stride;
                out[i] += scale * inv2h * (ca[ip] - ca[im]);
            }
        });
    }
}

}  // namespace stencil

// Engquist-Osher / Osher-Sethian upwind data for H(x,p) = phi(|p|^2) + a(x)
// over a group of tensor axes (all axes for the MFG solver, one player axis
// for the Nash solver). The a.e. derivative of the numerical Hamiltonian is
// the transport operator with coefficients (cm, cp), which is what makes the
// discrete forward-backward pair exactly adjoint.
struct UpwindHamiltonian {
    const TorusGrid* grid = nullptr;
    std::vector<int> axes;
    std::vector<std::vector<double>> gm, gp;   // max(D-,0), min(D+,0) per axis
    std::vector<double> s;                     // sum of squares of gm, gp
    std::vector<double> d1, d2, d3;            // phi', phi'', phi''' at s
    std::vector<std::vector<double>> cm, cp;   // transport coefficients

    void build(const TorusGrid& g, const std::vector<int>& group, const std::vector<double>& u,
               bool with_second = false) {
        grid = &g;
        axes = group;
        const std::size_t n = u.size();
        gm.assign(axes.size(), std::vector<double>(n));
        gp.assign(axes.size(), std::vector<double>(n));
        cm.assign(axes.size(), std::vector<double>(n));
        cp.assign(axes.size(), std::vector<double>(n));
        s.assign(n, 0.0);
        std::vector<double> dm(n), dp(n);
        for (std::size_t a = 0; a < axes.size(); ++a) {
            stencil::one_sided(g, axes[a], u, dm, dp);
            for (std::size_t i = 0; i < n; ++i) {
                gm[a][i] = dm[i] > 0.0 ? dm[i] : 0.0;
                gp[a][i] = dp[i] < 0.0 ? dp[i] : 0.0;
                s[i] += gm[a][i] * gm[a][i] + gp[a][i] * gp[a][i];
            }
        }
        d1.resize(n);
        for (std::size_t i = 0; i < n; ++i) d1[i] = Hamiltonian::dphi(s[i]);
        if (with_second) {
            d2.resize(n);
            d3.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                d2[i] = Hamiltonian::ddphi(s[i]);
                d3[i] = Hamiltonian::dddphi(s[i]);
            }
        }
        for (std::size_t a = 0; a < axes.size(); ++a)
            for (std::size_t i = 0; i < n; ++i) {
                cm[a][i] = 2.0 * d1[i] * gm[a][i];
                cp[a][i] = 2.0 * d1[i] * gp[a][i];
            }
    }

    double kinetic(std::size_t i) const { return Hamiltonian::phi(s[i]); }

    double cfl_coefficient() const {
        double worst = 0.0;
        for (std::size_t i = 0; i < s.size(); ++i) {
            double row = 0.0;
            for (std::size_t a = 0; a < axes.size(); ++a) row += cm[a][i] - cp[a][i];
            worst = std::max(worst, row);
        }
        return worst;
    }
};

// exact directional derivatives of UpwindHamiltonian quantities along a
// perturbation z (and, for the second order, a curvature direction w)
struct UpwindDerivatives {
    std::vector<std::vector<double>> dgm, dgp;  // active-side differences of z
    std::vector<double> ds;
    std::vector<std::vector<double>> dcm, dcp;  // coefficient perturbations
    std::vector<double> quad;                   // Gamma Dz . Dz surrogate

    void build_first(const UpwindHamiltonian& base, const std::vector<double>& z) {
        const TorusGrid& g = *base.grid;
        const std::size_t n = z.size();
        dgm.assign(base.axes.size(), std::vector<double>(n));
        dgp.assign(base.axes.size(), std::vector<double>(n));
        ds.assign(n, 0.0);
        std::vector<double> dm(n), dp(n);
        for (std::size_t a = 0; a < base.axes.size(); ++a) {
            stencil::one_sided(g, base.axes[a], z, dm, dp);
            for (std::size_t i = 0; i < n; ++i) {
                dgm[a][i] = base.gm[a][i] > 0.0 ? dm[i] : 0.0;
                dgp[a][i] = base.gp[a][i] < 0.0 ? dp[i] : 0.0;
                ds[i] += 2.0 * (base.gm[a][i] * dgm[a][i] + base.gp[a][i] * dgp[a][i]);
            }
        }
        dcm.assign(base.axes.size(), std::vector<double>(n));
        dcp.assign(base.axes.size(), std::vector<double>(n));
        for (std::size_t a = 0; a < base.axes.size(); ++a)
            for (std::size_t i = 0; i < n; ++i) {
                dcm[a][i] = 2.0 * base.d2[i] * ds[i] * base.gm[a][i] + 2.0 * base.d1[i] * dgm[a][i];
                dcp[a][i] = 2.0 * base.d2[i] * ds[i] * base.gp[a][i] + 2.0 * base.d1[i] * dgp[a][i];
            }
        quad.assign(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double sq = 0.0;
            for (std::size_t a = 0; a < base.axes.size(); ++a)
                sq += dgm[a][i] * dgm[a][i] + dgp[a][i] * dgp[a][i];
            quad[i] = base.d2[i] * ds[i] * ds[i] + 2.0 * base.d1[i] * sq;
        }
    }

    // second-order coefficient perturbations along (z, w); build_first(z) must
    // have run against the same base
    void second_coeffs(const UpwindHamiltonian& base, const std::vector<double>& w,
                       std::vector<std::vector<double>>& dcm2, std::vector<std::vector<double>>& dcp2) const {
        const TorusGrid& g = *base.grid;
        const std::size_t n = w.size();
        std::vector<std::vector<double>> d2gm(base.axes.size(), std::vector<double>(n));
        std::vector<std::vector<double>> d2gp(base.axes.size(), std::vector<double>(n));
        std::vector<double> dm(n), dp(n), d2s(n, 0.0);
        for (std::size_t a = 0; a < base.axes.size(); ++a) {
            stencil::one_sided(g, base.axes[a], w, dm, dp);
            for (std::size_t i = 0; i < n; ++i) {
                d2gm[a][i] = base.gm[a][i] > 0.0 ? dm[i] : 0.0;
                d2gp[a][i] = base.gp[a][i] < 0.0 ? dp[i] : 0.0;
                d2s[i] += 2.0 * (dgm[a][i] * dgm[a][i] + dgp[a][i] * dgp[a][i]) +
                          2.0 * (base.gm[a][i] * d2gm[a][i] + base.gp[a][i] * d2gp[a][i]);
            }
        }
        dcm2.assign(base.axes.size(), std::vector<double>(n));
        dcp2.assign(base.axes.size(), std::vector<double>(n));
        for (std::size_t a = 0; a < base.axes.size(); ++a)
            for (std::size_t i = 0; i < n; ++i) {
                dcm2[a][i] = 2.0 * base.d3[i] * ds[i] * ds[i] * base.gm[a][i] +
                             2.0 * base.d2[i] * (d2s[i] * base.gm[a][i] + 2.0 * ds[i] * dgm[a][i]) +
                             2.0 * base.d1[i] * d2gm[a][i];
                dcp2[a][i] = 2.0 * base.d3[i] * ds[i] * ds[i] * base.gp[a][i] +
                             2.0 * base.d2[i] * (d2s[i] * base.gp[a][i] + 2.0 * ds[i] * dgp[a][i]) +
                             2.0 * base.d1[i] * d2gp[a][i];
            }
    }

    // second derivative of the numerical Hamiltonian minus the transported w
    // part: phi'' ds^2 + 2 phi' sum(dgm^2 + dgp^2) (equals `quad`)
};

enum class TimeDirection { Forward, Backward };

struct ParabolicProblem {
    TimeDirection direction = TimeDirection::Forward;
    TorusGrid grid;
    TimeGrid time;
    VectorField drift;    // V(t,x), defined at every time node
    ScalarField source;   // f(t,x)
    ScalarField data;     // initial (forward) or terminal (backward) slice
};

struct DivergenceFormProblem {
    TorusGrid grid;
    TimeGrid time;
    DensityField m0;
    VectorField drift;                 // b(t,x): solves dm/dt - Lap m - div(m b) = 0
    const VectorField* extra_flux = nullptr;  // optional c(t,x), centered divergence
};

struct FokkerPlanckResult {
    ScalarField density;      // space-time
    int clamp_events = 0;
    double clamped_mass = 0.0;
};

namespace detail {

inline void split_drift(const TorusGrid& g, const VectorField& v, int k,
                        std::vector<std::vector<double>>& cm, std::vector<std::vector<double>>& cp) {
    const std::size_t n = g.node_count();
    cm.assign(g.dim, std::vector<double>(n));
    cp.assign(g.dim, std::vector<double>(n));
    for (int ax = 0; ax < g.dim; ++ax)
        for (std::size_t i = 0; i < n; ++i) {
            const double val = v.at(k, ax, i);
            if (!std::isfinite(val)) throw std::runtime_error("drift field has a non-finite entry");
            cm[ax][i] = val > 0.0 ? val : 0.0;
            cp[ax][i] = val < 0.0 ? val : 0.0;
        }
}

inline void check_cfl(const TorusGrid& g, const TimeGrid& tg, double coeff) {
    const double dt = tg.dt();
    const double h = g.spacing();
    if (dt * coeff / h > 1.0 + 1e-12) {
        const double suggestion = h / coeff;
        throw std::runtime_error("CFL violation: dt*|V|/h = " + std::to_string(dt * coeff / h) +
                                 " > 1; use dt <= " + std::to_string(suggestion));
    }
}

inline double slice_sup(const double* p, std::size_t n) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::fabs(p[i]));
    return m;
}

}  // namespace detail

// IMEX step for dw/dt - Lap w + V.Dw = f: upwind advection and source
// explicit, diffusion implicit through the FFT-diagonalized 3-point stencil.
// The discrete maximum principle ||w(t)|| <= ||w0|| + |t - t0| ||f|| is
// checked on every run.
inline ScalarField solve_parabolic(const ParabolicProblem& p) {
    const TorusGrid& g = p.grid;
    const TimeGrid& tg = p.time;
    const std::size_t n = g.node_count();
    if (p.data.nodes() != n) throw std::invalid_argument("solve_parabolic: data size mismatch");
    p.data.check_finite("solve_parabolic data");

    double vmax = 0.0;
    for (double v : p.drift.values) {
        if (!std::isfinite(v)) throw std::runtime_error("solve_parabolic: non-finite drift");
        vmax = std::max(vmax, std::fabs(v));
    }
    detail::check_cfl(g, tg, vmax * g.dim);

    std::vector<std::size_t> dims(g.dim, static_cast<std::size_t>(g.points_per_axis));
    ImplicitDiffusion diff(dims, g.spacing(), tg.dt());

    ScalarField w(g, tg);
    std::vector<int> all_axes(g.dim);
    for (int a = 0; a < g.dim; ++a) all_axes[a] = a;
    std::vector<std::vector<double>> cm, cp;
    std::vector<double> cur(n), next(n);
    const double dt = tg.dt();

    const bool fwd = p.direction == TimeDirection::Forward;
    const int start = fwd ? 0 : tg.steps;
    for (std::size_t i = 0; i < n; ++i) cur[i] = p.data.values[i];
    for (std::size_t i = 0; i < n; ++i) w.at(start, i) = cur[i];

    double bound = detail::slice_sup(cur.data(), n);
    for (int step = 0; step < tg.steps; ++step) {
        const int from = fwd ? step : tg.steps - step;
        const int to = fwd ? step + 1 : tg.steps - step - 1;
        const int coeff_level = fwd ? from : from;  // explicit side of the step
        detail::split_drift(g, p.drift, coeff_level, cm, cp);

        next = cur;
        stencil::apply_transport(g, all_axes, cm, cp, cur, next, -dt);
        const double* f = p.source.slice(coeff_level);
        double fsup = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            next[i] += dt * f[i];
            fsup = std::max(fsup, std::fabs(f[i]));
        }
        diff.apply(next);

        bound += dt * fsup;
        const double sup = detail::slice_sup(next.data(), n);
        if (sup > bound + 1e-10 * (1.0 + bound))
            throw std::runtime_error("solve_parabolic: discrete maximum principle violated");

        for (std::size_t i = 0; i < n; ++i) w.at(to, i) = next[i];
        cur.swap(next);
    }
    return w;
}

// Conservative upwind Fokker-Planck step, transpose of the backward transport
// stencil: unit mass per slice is exact up to roundoff, positivity holds
// under the advective CFL.
inline FokkerPlanckResult solve_fokker_planck(const DivergenceFormProblem& p) {
    const TorusGrid& g = p.grid;
    const TimeGrid& tg = p.time;
    const std::size_t n = g.node_count();
    double vmax = 0.0;
    for (double v : p.drift.values) vmax = std::max(vmax, std::fabs(v));
    detail::check_cfl(g, tg, vmax * g.dim);

    std::vector<std::size_t> dims(g.dim, static_cast<std::size_t>(g.points_per_axis));
    ImplicitDiffusion diff(dims, g.spacing(), tg.dt());

    FokkerPlanckResult res;
    res.density = ScalarField(g, tg);
    std::vector<int> all_axes(g.dim);
    for (int a = 0; a < g.dim; ++a) all_axes[a] = a;

    std::vector<double> cur = p.m0.field.values;
    const double vol = g.cell_volume();
    double mass_prev = 0.0;
    for (double v : cur) mass_prev += v;
    mass_prev *= vol;
    for (std::size_t i = 0; i < n; ++i) res.density.at(0, i) = cur[i];

    std::vector<std::vector<double>> cm, cp, cvec;
    std::vector<double> next(n);
    const double dt = tg.dt();
    for (int k = 0; k < tg.steps; ++k) {
        diff.apply(cur);                       // half step: symmetric diffusion
        detail::split_drift(g, p.drift, k + 1, cm, cp);
        next = cur;
        stencil::flux_divergence(g, all_axes, cm, cp, cur, next, dt);
        if (p.extra_flux) {
            cvec.assign(g.dim, std::vector<double>(n));
            for (int ax = 0; ax < g.dim; ++ax)
                for (std::size_t i = 0; i < n; ++i) cvec[ax][i] = p.extra_flux->at(k + 1, ax, i);
            stencil::centered_divergence(g, all_axes, cvec, next, dt);
        }

        double mass = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (next[i] < 0.0) {
                if (next[i] < -1e-12) {
                    ++res.clamp_events;
                }
                res.clamped_mass += -next[i] * vol;
                next[i] = 0.0;
            }
            mass += next[i];
        }
        mass *= vol;
        if (std::fabs(mass - mass_prev) > 1e-8)
            throw std::runtime_error("solve_fokker_planck: conservativity fault, mass drift " +
                                     std::to_string(mass - mass_prev));
        if (mass > 0.0 && std::fabs(mass - mass_prev) > 0.0) {
            const double fix = mass_prev / mass;
            for (std::size_t i = 0; i < n; ++i) next[i] *= fix;
        }
        cur.swap(next);
        for (std::size_t i = 0; i < n; ++i) res.density.at(k + 1, i) = cur[i];
        mass_prev = 0.0;
        for (double v : cur) mass_prev += v;
        mass_prev *= vol;
    }
    return res;
}

// | <w(T), rho(T)> - <w(t0), rho(t0)> | for the adjoint backward/forward pair
// driven by the same V and zero sources
inline double adjoint_consistency_check(const TorusGrid& g, const TimeGrid& tg, const VectorField& V) {
    ScalarField terminal(g);
    ScalarField rho0(g);
    for (std::size_t i = 0; i < g.node_count(); ++i) {
        const auto x = g.node_point(i);
        terminal.values[i] = std::cos(two_pi * x[0]) + 0.3 * std::sin(2.0 * two_pi * x[0]);
        rho0.values[i] = 1.0 + 0.5 * std::cos(two_pi * x[0]);
    }
    ParabolicProblem bp;
    bp.direction = TimeDirection::Backward;
    bp.grid = g;
    bp.time = tg;
    bp.drift = V;
    bp.source = ScalarField(g, tg, 0.0);
    bp.data = terminal;
    const ScalarField w = solve_parabolic(bp);

    DivergenceFormProblem fp;
    fp.grid = g;
    fp.time = tg;
    fp.m0 = DensityField(rho0);
    fp.drift = V;
    const FokkerPlanckResult rho = solve_fokker_planck(fp);

    const double vol = g.cell_volume();
    double a = 0.0, b = 0.0;
    for (std::size_t i = 0; i < g.node_count(); ++i) {
        a += w.at(tg.steps, i) * rho.density.at(tg.steps, i);
        b += w.at(0, i) * rho.density.at(0, i);
    }
    return std::fabs(a - b) * vol;
}

}  // namespace mfglab
