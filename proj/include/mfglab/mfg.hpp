#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "mfglab/coupling.hpp"
#include "mfglab/fft.hpp"
#include "mfglab/grid.hpp"
#include "mfglab/measures.hpp"
#include "mfglab/pde.hpp"

namespace mfglab {

enum class CouplingKind { Local, Mollified };

struct PicardDivergence : std::runtime_error {
    std::vector<double> history;
    explicit PicardDivergence(std::vector<double> h)
        : std::runtime_error("Picard iteration did not reach tolerance; last residual " +
                             std::to_string(h.empty() ? -1.0 : h.back())),
          history(std::move(h)) {}
};

struct MFGOptions {
    double tol = 1e-10;
    double lambda = 0.4;
    int max_iters = 2000;
    const ScalarField* m_init_path = nullptr;   // optional Picard starting path
    const ScalarField* mms_source_u = nullptr;  // manufactured-solution sources
    const ScalarField* mms_source_m = nullptr;
};

struct MFGSolution {
    CouplingKind kind = CouplingKind::Local;
    double epsilon = 0.0;
    ScalarField u;  // space-time value function, u(T) = G exactly
    ScalarField m;  // space-time density, m(t0) = m0 exactly
    int iterations = 0;
    double fixed_point_residual = 0.0;
    std::vector<double> residual_history;
};

namespace detail {

struct CoeffCache {
    // upwind transport coefficients of the current u at levels 1..K
    std::vector<std::vector<std::vector<double>>> cm, cp;  // [level][axis][node]
};

inline void hjb_backward(const ProblemSpec& spec, const TorusGrid& g, const TimeGrid& tg,
                         const std::vector<std::vector<double>>& sources, ImplicitDiffusion& diff,
                         ScalarField& u, CoeffCache* cache, const ScalarField* mms) {
    const std::size_t n = g.node_count();
    const double dt = tg.dt();
    std::vector<int> all_axes(g.dim);
    for (int a = 0; a < g.dim; ++a) all_axes[a] = a;

    std::vector<double> pot(n);
    for (std::size_t i = 0; i < n; ++i) pot[i] = spec.hamiltonian.potential(g.node_point(i));
    for (std::size_t i = 0; i < n; ++i) u.at(tg.steps, i) = spec.terminal.g(g.node_point(i));

    UpwindHamiltonian ham;
    std::vector<double> cur(n), next(n);
    for (std::size_t i = 0; i < n; ++i) cur[i] = u.at(tg.steps, i);
    if (cache) {
        cache->cm.assign(tg.steps + 1, {});
        cache->cp.assign(tg.steps + 1, {});
    }
    for (int k = tg.steps; k >= 1; --k) {
        ham.build(g, all_axes, cur);
        if (cache) {
            cache->cm[k] = ham.cm;
            cache->cp[k] = ham.cp;
        }
        const std::vector<double>& src = sources[k];
        for (std::size_t i = 0; i < n; ++i)
            next[i] = cur[i] - dt * (ham.kinetic(i) + pot[i] - src[i]);
        if (mms) {
            const double* e = mms->slice(k);
            for (std::size_t i = 0; i < n; ++i) next[i] += dt * e[i];
        }
        diff.apply(next);
        for (std::size_t i = 0; i < n; ++i) u.at(k - 1, i) = next[i];
        cur.swap(next);
    }
}

inline void fp_forward(const TorusGrid& g, const TimeGrid& tg, const CoeffCache& cache,
                       const std::vector<double>& m0, ImplicitDiffusion& diff, ScalarField& m,
                       const ScalarField* mms) {
    const std::size_t n = g.node_count();
    const double dt = tg.dt();
    std::vector<int> all_axes(g.dim);
    for (int a = 0; a < g.dim; ++a) all_axes[a] = a;

    std::vector<double> cur = m0, next(n);
    for (std::size_t i = 0; i < n; ++i) m.at(0, i) = cur[i];
    for (int k = 0; k < tg.steps; ++k) {
        diff.apply(cur);
        next = cur;
        stencil::flux_divergence(g, all_axes, cache.cm[k + 1], cache.cp[k + 1], cur, next, dt);
        if (mms) {
            const double* e = mms->slice(k + 1);
            for (std::size_t i = 0; i < n; ++i) next[i] += dt * e[i];
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (next[i] < 0.0 && next[i] > -1e-12) next[i] = 0.0;
            m.at(k + 1, i) = next[i];
        }
        cur.swap(next);
    }
}

}  // namespace detail

// Damped Picard iteration on the density path: HJB backward against the
// current m, Fokker-Planck forward with the upwind coefficients of the fresh
// u, relaxation by lambda. Stops when the undamped update falls below tol.
inline MFGSolution solve_mfg(const ProblemSpec& spec, const TorusGrid& g, const TimeGrid& tg,
                             const DensityField& m0, CouplingKind kind, double epsilon,
                             const MFGOptions& opt = {}) {
    if (!is_pow2(static_cast<std::size_t>(g.points_per_axis)))
        throw std::invalid_argument("solve_mfg: points_per_axis must be a power of two");
    if (!(m0.grid() == g)) throw std::invalid_argument("solve_mfg: m0 grid mismatch");
    const double cfl = tg.dt() * spec.hamiltonian.lipschitz_bound * g.dim / g.spacing();
    if (cfl > 1.0 + 1e-12)
        throw std::runtime_error("solve_mfg: CFL violation, dt*Lip*d/h = " + std::to_string(cfl));
    if (kind == CouplingKind::Local) {
        for (double v : m0.field.values)
            if (!(v > 0.0))
                throw std::invalid_argument("solve_mfg: local coupling requires strictly positive m0");
    }
    if (!(opt.tol > 0.0)) throw std::invalid_argument("solve_mfg: tol must be positive");

    const std::size_t n = g.node_count();
    std::unique_ptr<MollifiedCoupling> fc;
    if (kind == CouplingKind::Mollified)
        fc = std::make_unique<MollifiedCoupling>(spec.coupling, epsilon, g);

    std::vector<std::size_t> dims(g.dim, static_cast<std::size_t>(g.points_per_axis));
    ImplicitDiffusion diff(dims, g.spacing(), tg.dt());

    MFGSolution sol;
    sol.kind = kind;
    sol.epsilon = kind == CouplingKind::Mollified ? epsilon : 0.0;
    sol.u = ScalarField(g, tg);
    sol.m = ScalarField(g, tg);

    // initial density path: frozen m0 unless the caller provided a guess
    if (opt.m_init_path) {
        if (opt.m_init_path->values.size() != sol.m.values.size())
            throw std::invalid_argument("solve_mfg: initial path size mismatch");
        sol.m.values = opt.m_init_path->values;
        for (std::size_t i = 0; i < n; ++i) sol.m.at(0, i) = m0.field.values[i];
    } else {
        for (int k = 0; k <= tg.steps; ++k)
            for (std::size_t i = 0; i < n; ++i) sol.m.at(k, i) = m0.field.values[i];
    }

    std::vector<std::vector<double>> sources(tg.steps + 1, std::vector<double>(n));
    detail::CoeffCache cache;
    ScalarField m_new(g, tg);

    for (int it = 0; it < opt.max_iters; ++it) {
        for (int k = 0; k <= tg.steps; ++k) {
            if (kind == CouplingKind::Mollified) {
                std::vector<double> mv(sol.m.slice(k), sol.m.slice(k) + n);
                sources[k] = fc->eval_raw(mv).values;
            } else {
                for (std::size_t i = 0; i < n; ++i)
                    sources[k][i] = spec.coupling.f(g.node_point(i), sol.m.at(k, i));
            }
        }
        detail::hjb_backward(spec, g, tg, sources, diff, sol.u, &cache, opt.mms_source_u);
        detail::fp_forward(g, tg, cache, m0.field.values, diff, m_new, opt.mms_source_m);

        double residual = 0.0;
        for (std::size_t i = 0; i < sol.m.values.size(); ++i)
            residual = std::max(residual, std::fabs(m_new.values[i] - sol.m.values[i]));
        sol.residual_history.push_back(residual);
        sol.iterations = it + 1;
        sol.fixed_point_residual = residual;

        if (residual < opt.tol) return sol;
        const double lam = opt.lambda;
        for (std::size_t i = 0; i < sol.m.values.size(); ++i)
            sol.m.values[i] = (1.0 - lam) * sol.m.values[i] + lam * m_new.values[i];
        for (std::size_t i = 0; i < n; ++i) sol.m.at(0, i) = m0.field.values[i];
    }
    throw PicardDivergence(sol.residual_history);
}

// representation formula: U(t0, ., m0) is the u-slice at t0
inline ScalarField master_eval(const ProblemSpec& spec, const TorusGrid& g, const TimeGrid& tg,
                               const DensityField& m0, double epsilon, const MFGOptions& opt = {}) {
    return solve_mfg(spec, g, tg, m0, CouplingKind::Mollified, epsilon, opt).u.slice_field(0);
}

struct StabilityReport {
    double sup_u_gap = 0.0;
    double grad_gap_L2 = 0.0;
    double m_gap_L2 = 0.0;
    double duality_pairing = 0.0;
    double epsilon = 0.0;
};

// Solves the local and the mollified system on the same discretization and
// reports the stability gaps, plus the sign-probe duality pairing.
inline StabilityReport stability_gap(const ProblemSpec& spec, const TorusGrid& g, const TimeGrid& tg,
                                     const DensityField& m0, double epsilon, const MFGOptions& opt = {}) {
    MFGSolution loc = solve_mfg(spec, g, tg, m0, CouplingKind::Local, 0.0, opt);
    MFGSolution mol = solve_mfg(spec, g, tg, m0, CouplingKind::Mollified, epsilon, opt);
    MollifiedCoupling fc(spec.coupling, epsilon, g);

    StabilityReport rep;
    rep.epsilon = epsilon;
    const std::size_t n = g.node_count();
    const double vol = g.cell_volume();
    const double dt = tg.dt();
    double grad2 = 0.0, m2 = 0.0, pairing = 0.0;
    for (int k = 0; k <= tg.steps; ++k) {
        double sup = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            sup = std::max(sup, std::fabs(mol.u.at(k, i) - loc.u.at(k, i)));
        rep.sup_u_gap = std::max(rep.sup_u_gap, sup);

        const double w = (k == 0 || k == tg.steps) ? 0.5 : 1.0;  // trapezoid in t
        VectorField gl = gradient(loc.u.slice_field(k));
        VectorField gm = gradient(mol.u.slice_field(k));
        for (int ax = 0; ax < g.dim; ++ax)
            for (std::size_t i = 0; i < n; ++i) {
                const double dg = gm.at(ax, i) - gl.at(ax, i);
                grad2 += w * dt * vol * dg * dg;
            }
        std::vector<double> meps(mol.m.slice(k), mol.m.slice(k) + n);
        const auto feps = fc.eval_raw(meps);
        for (std::size_t i = 0; i < n; ++i) {
            const double dm = mol.m.at(k, i) - loc.m.at(k, i);
            m2 += w * dt * vol * dm * dm;
            const double floc = spec.coupling.f(g.node_point(i), loc.m.at(k, i));
            pairing += w * dt * vol * (feps.values[i] - floc) * dm;
        }
    }
    rep.grad_gap_L2 = std::sqrt(grad2);
    rep.m_gap_L2 = std::sqrt(m2);
    rep.duality_pairing = pairing;
    return rep;
}

struct LinearizedSolution {
    int order = 1;
    ScalarField z;    // backward unknown (w at second order), z(T) = 0
    ScalarField rho;  // forward signed unknown (mu at second order)
    int iterations = 0;
    double residual = 0.0;
};

namespace detail {

struct LinearizedWorkspace {
    const TorusGrid* g = nullptr;
    const TimeGrid* tg = nullptr;
    const MFGSolution* base = nullptr;
    const MollifiedCoupling* fc = nullptr;
    std::vector<UpwindHamiltonian> ham;          // per level 1..K at base u
    std::vector<std::vector<double>> m_tilde;    // Sinv m^k, k = 0..K-1
    std::unique_ptr<ImplicitDiffusion> diff;

    void build(const ProblemSpec&, const MollifiedCoupling& coupling, const MFGSolution& b) {
        base = &b;
        fc = &coupling;
        g = &b.u.grid;
        tg = &*b.u.time;
        const std::size_t n = g->node_count();
        std::vector<int> all_axes(g->dim);
        for (int a = 0; a < g->dim; ++a) all_axes[a] = a;
        std::vector<std::size_t> dims(g->dim, static_cast<std::size_t>(g->points_per_axis));
        diff = std::make_unique<ImplicitDiffusion>(dims, g->spacing(), tg->dt());
        ham.resize(tg->steps + 1);
        for (int k = 1; k <= tg->steps; ++k) {
            std::vector<double> uk(b.u.slice(k), b.u.slice(k) + n);
            ham[k].build(*g, all_axes, uk, /*with_second=*/true);
        }
        m_tilde.resize(tg->steps);
        for (int k = 0; k < tg->steps; ++k) {
            m_tilde[k].assign(b.m.slice(k), b.m.slice(k) + n);
            diff->apply(m_tilde[k]);
        }
    }
};

}  // namespace detail

// First-order linearized system around a converged mollified solution: the
// exact a.e. Jacobian of the discrete forward-backward map, so the
// finite-difference oracle on the nonlinear solver matches to O(s).
inline LinearizedSolution solve_linearized_first(const ProblemSpec& spec, const MollifiedCoupling& fc,
                                                 const MFGSolution& base, const ScalarField& rho0,
                                                 double tol = 1e-11, double lambda = 0.5,
                                                 int max_iters = 4000) {
    if (base.kind != CouplingKind::Mollified)
        throw std::invalid_argument("solve_linearized_first: base solution must use the mollified coupling");
    detail::LinearizedWorkspace ws;
    ws.build(spec, fc, base);
    const TorusGrid& g = *ws.g;
    const TimeGrid& tg = *ws.tg;
    const std::size_t n = g.node_count();
    const double dt = tg.dt();

    LinearizedSolution sol;
    sol.order = 1;
    sol.z = ScalarField(g, tg);
    sol.rho = ScalarField(g, tg);
    for (std::size_t i = 0; i < n; ++i) sol.rho.at(0, i) = rho0.values[i];

    UpwindDerivatives ud;
    std::vector<double> cur(n), next(n);
    for (int it = 0; it < max_iters; ++it) {
        // backward z-pass against the current rho path
        ScalarField z_new(g, tg);
        std::fill(cur.begin(), cur.end(), 0.0);
        for (int k = tg.steps; k >= 1; --k) {
            std::vector<double> mk(base.m.slice(k), base.m.slice(k) + n);
            std::vector<double> rk(sol.rho.slice(k), sol.rho.slice(k) + n);
            const auto ksrc = fc.deriv_action(mk, rk);
            next = cur;
            stencil::apply_transport(g, ws.ham[k].axes, ws.ham[k].cm, ws.ham[k].cp, cur, next, -dt);
            for (std::size_t i = 0; i < n; ++i) next[i] += dt * ksrc[i];
            ws.diff->apply(next);
            for (std::size_t i = 0; i < n; ++i) z_new.at(k - 1, i) = next[i];
            cur.swap(next);
        }

        // forward rho-pass against the fresh z path
        ScalarField r_new(g, tg);
        std::vector<double> rho_cur(rho0.values);
        for (std::size_t i = 0; i < n; ++i) r_new.at(0, i) = rho_cur[i];
        for (int k = 0; k < tg.steps; ++k) {
            std::vector<double> zk(z_new.slice(k + 1), z_new.slice(k + 1) + n);
            ud.build_first(ws.ham[k + 1], zk);
            ws.diff->apply(rho_cur);
            next = rho_cur;
            stencil::flux_divergence(g, ws.ham[k + 1].axes, ws.ham[k + 1].cm, ws.ham[k + 1].cp, rho_cur, next, dt);
            stencil::flux_divergence(g, ws.ham[k + 1].axes, ud.dcm, ud.dcp, ws.m_tilde[k], next, dt);
            for (std::size_t i = 0; i < n; ++i) r_new.at(k + 1, i) = next[i];
            rho_cur = next;
        }

        double residual = 0.0;
        for (std::size_t i = 0; i < sol.z.values.size(); ++i) {
            residual = std::max(residual, std::fabs(z_new.values[i] - sol.z.values[i]));
            residual = std::max(residual, std::fabs(r_new.values[i] - sol.rho.values[i]));
        }
        sol.iterations = it + 1;
        sol.residual = residual;
        if (residual < tol) {
            sol.z = std::move(z_new);
            sol.rho = std::move(r_new);
            return sol;
        }
        for (std::size_t i = 0; i < sol.z.values.size(); ++i) {
            sol.z.values[i] = (1.0 - lambda) * sol.z.values[i] + lambda * z_new.values[i];
            sol.rho.values[i] = (1.0 - lambda) * sol.rho.values[i] + lambda * r_new.values[i];
        }
    }
    throw PicardDivergence({sol.residual});
}

// Second-order linearized system: exact second directional derivative of the
// discrete map along rho0; w(T) = 0, mu(t0) = 0.
inline LinearizedSolution solve_linearized_second(const ProblemSpec& spec, const MollifiedCoupling& fc,
                                                  const MFGSolution& base, const LinearizedSolution& first,
                                                  double tol = 1e-11, double lambda = 0.5,
                                                  int max_iters = 4000) {
    detail::LinearizedWorkspace ws;
    ws.build(spec, fc, base);
    const TorusGrid& g = *ws.g;
    const TimeGrid& tg = *ws.tg;
    const std::size_t n = g.node_count();
    const double dt = tg.dt();

    // per-level first-order derivative data and diffused rho
    std::vector<UpwindDerivatives> ud(tg.steps + 1);
    for (int k = 1; k <= tg.steps; ++k) {
        std::vector<double> zk(first.z.slice(k), first.z.slice(k) + n);
        ud[k].build_first(ws.ham[k], zk);
    }
    std::vector<std::vector<double>> rho_tilde(tg.steps);
    for (int k = 0; k < tg.steps; ++k) {
        rho_tilde[k].assign(first.rho.slice(k), first.rho.slice(k) + n);
        ws.diff->apply(rho_tilde[k]);
    }

    LinearizedSolution sol;
    sol.order = 2;
    sol.z = ScalarField(g, tg);
    sol.rho = ScalarField(g, tg);

    std::vector<double> cur(n), next(n);
    std::vector<std::vector<double>> dcm2, dcp2;
    for (int it = 0; it < max_iters; ++it) {
        ScalarField w_new(g, tg);
        std::fill(cur.begin(), cur.end(), 0.0);
        for (int k = tg.steps; k >= 1; --k) {
            std::vector<double> mk(base.m.slice(k), base.m.slice(k) + n);
            std::vector<double> muk(sol.rho.slice(k), sol.rho.slice(k) + n);
            std::vector<double> rk(first.rho.slice(k), first.rho.slice(k) + n);
            const auto k1 = fc.deriv_action(mk, muk);
            const auto k2 = fc.second_deriv_action(mk, rk);
            next = cur;
            stencil::apply_transport(g, ws.ham[k].axes, ws.ham[k].cm, ws.ham[k].cp, cur, next, -dt);
            for (std::size_t i = 0; i < n; ++i)
                next[i] += dt * (k1[i] + k2[i] - ud[k].quad[i]);
            ws.diff->apply(next);
            for (std::size_t i = 0; i < n; ++i) w_new.at(k - 1, i) = next[i];
            cur.swap(next);
        }

        ScalarField mu_new(g, tg);
        std::vector<double> mu_cur(n, 0.0);
        for (int k = 0; k < tg.steps; ++k) {
            std::vector<double> wk(w_new.slice(k + 1), w_new.slice(k + 1) + n);
            ud[k + 1].second_coeffs(ws.ham[k + 1], wk, dcm2, dcp2);
            ws.diff->apply(mu_cur);
            next = mu_cur;
            stencil::flux_divergence(g, ws.ham[k + 1].axes, ws.ham[k + 1].cm, ws.ham[k + 1].cp, mu_cur, next, dt);
            stencil::flux_divergence(g, ws.ham[k + 1].axes, dcm2, dcp2, ws.m_tilde[k], next, dt);
            stencil::flux_divergence(g, ws.ham[k + 1].axes, ud[k + 1].dcm, ud[k + 1].dcp, rho_tilde[k], next, 2.0 * dt);
            for (std::size_t i = 0; i < n; ++i) mu_new.at(k + 1, i) = next[i];
            mu_cur = next;
        }

        double residual = 0.0;
        for (std::size_t i = 0; i < sol.z.values.size(); ++i) {
            residual = std::max(residual, std::fabs(w_new.values[i] - sol.z.values[i]));
            residual = std::max(residual, std::fabs(mu_new.values[i] - sol.rho.values[i]));
        }
        sol.iterations = it + 1;
        sol.residual = residual;
        if (residual < tol) {
            sol.z = std::move(w_new);
            sol.rho = std::move(mu_new);
            return sol;
        }
        for (std::size_t i = 0; i < sol.z.values.size(); ++i) {
            sol.z.values[i] = (1.0 - lambda) * sol.z.values[i] + lambda * w_new.values[i];
            sol.rho.values[i] = (1.0 - lambda) * sol.rho.values[i] + lambda * mu_new.values[i];
        }
    }
    throw PicardDivergence({sol.residual});
}

// int z(t0) rho0 - int int m Gamma Dz.Dz - [monotonicity pairing of dF/dm],
// assembled with the discrete quadratures that make the telescoped identity
// exact. Nonnegative up to Picard residuals.
inline double energy_identity_probe(const ProblemSpec& spec, const MollifiedCoupling& fc,
                                    const MFGSolution& base, const LinearizedSolution& first) {
    detail::LinearizedWorkspace ws;
    ws.build(spec, fc, base);
    const TorusGrid& g = *ws.g;
    const TimeGrid& tg = *ws.tg;
    const std::size_t n = g.node_count();
    const double dt = tg.dt();
    const double vol = g.cell_volume();

    double head = 0.0;
    for (std::size_t i = 0; i < n; ++i) head += first.z.at(0, i) * first.rho.at(0, i);
    head *= vol;

    double quad_term = 0.0, pairing = 0.0;
    UpwindDerivatives ud;
    for (int k = 0; k < tg.steps; ++k) {
        std::vector<double> zk(first.z.slice(k + 1), first.z.slice(k + 1) + n);
        ud.build_first(ws.ham[k + 1], zk);
        for (std::size_t i = 0; i < n; ++i) quad_term += dt * vol * ws.m_tilde[k][i] * ud.quad[i];

        std::vector<double> mk(base.m.slice(k + 1), base.m.slice(k + 1) + n);
        std::vector<double> rk(first.rho.slice(k + 1), first.rho.slice(k + 1) + n);
        const auto ksrc = fc.deriv_action(mk, rk);
        std::vector<double> rt(first.rho.slice(k), first.rho.slice(k) + n);
        ws.diff->apply(rt);
        for (std::size_t i = 0; i < n; ++i) pairing += dt * vol * ksrc[i] * rt[i];
    }
    return head - quad_term - pairing;
}

// mismatch of z(t0,.) against the finite difference of the nonlinear solver
// at m0 + s rho0; decays O(s) when the linearization is exact
inline std::vector<double> measure_derivative_check(const ProblemSpec& spec, const TorusGrid& g,
                                                    const TimeGrid& tg, const DensityField& m0,
                                                    double epsilon, const ScalarField& rho0,
                                                    const std::vector<double>& s_values,
                                                    const MFGOptions& opt = {}) {
    MFGSolution base = solve_mfg(spec, g, tg, m0, CouplingKind::Mollified, epsilon, opt);
    MollifiedCoupling fc(spec.coupling, epsilon, g);
    LinearizedSolution lin = solve_linearized_first(spec, fc, base, rho0, opt.tol);

    std::vector<double> mismatches;
    const std::size_t n = g.node_count();
    for (double s : s_values) {
        ScalarField pert(g);
        for (std::size_t i = 0; i < n; ++i) pert.values[i] = m0.field.values[i] + s * rho0.values[i];
        MFGSolution up = solve_mfg(spec, g, tg, DensityField(pert), CouplingKind::Mollified, epsilon, opt);
        double mis = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double fd = (up.u.at(0, i) - base.u.at(0, i)) / s;
            mis = std::max(mis, std::fabs(lin.z.at(0, i) - fd));
        }
        mismatches.push_back(mis);
    }
    return mismatches;
}

// same for the second derivative against the central second difference
inline std::vector<double> second_derivative_check(const ProblemSpec& spec, const TorusGrid& g,
                                                   const TimeGrid& tg, const DensityField& m0,
                                                   double epsilon, const ScalarField& rho0,
                                                   const std::vector<double>& s_values,
                                                   const MFGOptions& opt = {}) {
    MFGSolution base = solve_mfg(spec, g, tg, m0, CouplingKind::Mollified, epsilon, opt);
    MollifiedCoupling fc(spec.coupling, epsilon, g);
    LinearizedSolution lin = solve_linearized_first(spec, fc, base, rho0, opt.tol);
    LinearizedSolution sec = solve_linearized_second(spec, fc, base, lin, opt.tol);

    std::vector<double> mismatches;
    const std::size_t n = g.node_count();
    for (double s : s_values) {
        ScalarField up_f(g), dn_f(g);
        for (std::size_t i = 0; i < n; ++i) {
            up_f.values[i] = m0.field.values[i] + s * rho0.values[i];
            dn_f.values[i] = m0.field.values[i] - s * rho0.values[i];
        }
        MFGSolution up = solve_mfg(spec, g, tg, DensityField(up_f), CouplingKind::Mollified, epsilon, opt);
        MFGSolution dn = solve_mfg(spec, g, tg, DensityField(dn_f), CouplingKind::Mollified, epsilon, opt);
        double mis = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double fd = (up.u.at(0, i) - 2.0 * base.u.at(0, i) + dn.u.at(0, i)) / (s * s);
            mis = std::max(mis, std::fabs(sec.z.at(0, i) - fd));
        }
        mismatches.push_back(mis);
    }
    return mismatches;
}

}  // namespace mfglab
