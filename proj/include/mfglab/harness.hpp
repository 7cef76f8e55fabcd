#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "mfglab/coupling.hpp"
#include "mfglab/io.hpp"
#include "mfglab/measures.hpp"
#include "mfglab/mfg.hpp"
#include "mfglab/nash.hpp"
#include "mfglab/particles.hpp"
#include "mfglab/pde.hpp"

namespace mfglab {

struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

// least squares on (log x, log y)
inline RateFit fit_rate(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.size() < 3)
        throw std::invalid_argument("fit_rate: need at least 3 matching points");
    const std::size_t n = xs.size();
    std::vector<double> lx(n), ly(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(xs[i] > 0.0) || !(ys[i] > 0.0))
            throw std::domain_error("fit_rate: entries must be positive");
        lx[i] = std::log(xs[i]);
        ly[i] = std::log(ys[i]);
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
        syy += (ly[i] - my) * (ly[i] - my);
    }
    RateFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return fit;
}

// Maps index -> value over [0, count) with at most `workers` cells in flight;
// results land in sweep-index order regardless of completion order.
template <typename F>
auto parallel_map(int count, int workers, F&& f) {
    using R = decltype(f(0));
    std::vector<R> out(count);
    if (workers <= 1) {
        for (int i = 0; i < count; ++i) out[i] = f(i);
        return out;
    }
    int next = 0;
    while (next < count) {
        const int batch = std::min(workers, count - next);
        std::vector<std::future<R>> futs;
        futs.reserve(batch);
        for (int b = 0; b < batch; ++b)
            futs.push_back(std::async(std::launch::async, [&f, idx = next + b] { return f(idx); }));
        for (int b = 0; b < batch; ++b) out[next + b] = futs[b].get();
        next += batch;
    }
    return out;
}

inline double cos_density_value(double x, double amp) { return 1.0 + amp * std::cos(two_pi * x); }

inline DensityField cos_density(const TorusGrid& g, double amp = 0.5) {
    ScalarField f(g);
    for (std::size_t i = 0; i < g.node_count(); ++i)
        f.values[i] = cos_density_value(g.node_point(i)[0], amp);
    return DensityField(std::move(f));
}

// ---------------------------------------------------------------------------
// sweep executors (shared by the CLI and the acceptance suite)
// ---------------------------------------------------------------------------

struct EpsilonStabilityParams {
    ProblemSpec spec = default_problem();
    int m = 128;
    int steps = 200;
    double t0 = 0.0;
    double horizon = 0.5;
    std::vector<double> epsilons{0.2, 0.1, 0.05};
    double tol = 1e-10;
    double lambda = 0.4;
};

struct EpsilonStabilityResult {
    std::vector<StabilityReport> reports;
    RateFit m_gap_fit;
    RateFit sup_u_fit;
};

inline EpsilonStabilityResult run_epsilon_stability(const EpsilonStabilityParams& p) {
    const ProblemSpec& spec = p.spec;
    TorusGrid g(1, p.m);
    TimeGrid tg(p.t0, p.horizon, p.steps);
    const DensityField m0 = cos_density(g);
    MFGOptions opt;
    opt.tol = p.tol;
    opt.lambda = p.lambda;
    EpsilonStabilityResult out;
    std::vector<double> eps_pos, mg, ug;
    for (double eps : p.epsilons) {
        out.reports.push_back(stability_gap(spec, g, tg, m0, eps, opt));
        eps_pos.push_back(eps);
        mg.push_back(std::max(out.reports.back().m_gap_L2, 1e-300));
        ug.push_back(std::max(out.reports.back().sup_u_gap, 1e-300));
    }
    if (eps_pos.size() >= 3) {
        out.m_gap_fit = fit_rate(eps_pos, mg);
        out.sup_u_fit = fit_rate(eps_pos, ug);
    }
    return out;
}

struct DerivativeCheckParams {
    ProblemSpec spec = default_problem(ProblemProfile::Nonlinear);
    int m = 64;
    int steps = 100;
    double t0 = 0.0;
    double horizon = 0.5;
    double epsilon = 0.15;
    double rho_amp = 0.3;
    std::vector<double> s_first{1e-1, 1e-2, 1e-3};
    std::vector<double> s_second{1e-1, 3e-2};
    double tol = 1e-12;
};

struct DerivativeCheckResult {
    std::vector<double> first_mismatch;
    std::vector<double> first_ratios;
    std::vector<double> second_mismatch;
};

inline DerivativeCheckResult run_derivative_check(const DerivativeCheckParams& p) {
    const ProblemSpec& spec = p.spec;
    TorusGrid g(1, p.m);
    TimeGrid tg(p.t0, p.horizon, p.steps);
    const DensityField m0 = cos_density(g);
    ScalarField rho0(g);
    for (std::size_t i = 0; i < g.node_count(); ++i)
        rho0.values[i] = p.rho_amp * std::cos(two_pi * g.node_point(i)[0] + 0.7);
    MFGOptions opt;
    opt.tol = p.tol;
    DerivativeCheckResult out;
    out.first_mismatch = measure_derivative_check(spec, g, tg, m0, p.epsilon, rho0, p.s_first, opt);
    for (std::size_t i = 0; i + 1 < out.first_mismatch.size(); ++i)
        out.first_ratios.push_back(out.first_mismatch[i] / std::max(out.first_mismatch[i + 1], 1e-300));
    out.second_mismatch = second_derivative_check(spec, g, tg, m0, p.epsilon, rho0, p.s_second, opt);
    return out;
}

struct AssumptionProbeParams {
    int closeness_m = 128;
    std::vector<double> closeness_eps{0.2, 0.1, 0.05};
    double closeness_R = 5.0;
    double closeness_alpha = 1.0;
    int closeness_samples = 12;
    std::uint64_t seed = 2024;

    int mono_m = 64;
    double mono_eps = 0.15;
    int mono_pairs = 100;

    std::vector<double> regularity_eps{0.2, 0.1, 0.05};
    double regularity_alpha = 0.5;

    std::vector<int> empirical_n{100, 1000, 10000};
    int empirical_seeds = 200;
};

struct AssumptionProbeResult {
    std::vector<double> closeness;
    RateFit closeness_fit;
    double monotonicity_min = 0.0;
    std::vector<double> regularity;
    RateFit regularity_fit;
    double dph_bound_max = 0.0;
    double dph_fd_error = 0.0;
    std::vector<double> empirical_w1;
    RateFit empirical_fit;
};

inline AssumptionProbeResult run_assumption_probes(const AssumptionProbeParams& p) {
    AssumptionProbeResult out;
    const ProblemSpec spec = default_problem();

    // closeness scaling of the mollified coupling
    TorusGrid gc(1, p.closeness_m);
    for (double eps : p.closeness_eps) {
        MollifiedCoupling fc(spec.coupling, eps, gc);
        out.closeness.push_back(closeness_probe(fc, p.closeness_R, p.closeness_alpha,
                                                p.closeness_samples, p.seed));
    }
    if (out.closeness.size() >= 3) out.closeness_fit = fit_rate(p.closeness_eps, out.closeness);

    // monotonicity over seeded smooth density pairs
    {
        TorusGrid gm(1, p.mono_m);
        MollifiedCoupling fc(spec.coupling, p.mono_eps, gm);
        double worst = 1e300;
        for (int s = 0; s < p.mono_pairs; ++s) {
            DensityField a = random_holder_density(gm, 0.9, 4.0, derive_stream(p.seed, 2 * s));
            DensityField b = random_holder_density(gm, 0.9, 4.0, derive_stream(p.seed, 2 * s + 1));
            worst = std::min(worst, monotonicity_probe(fc, a, b));
        }
        out.monotonicity_min = worst;
    }

    // C^4 blow-up order in eps
    {
        TorusGrid gr(1, p.closeness_m);
        for (double eps : p.regularity_eps) {
            MollifiedCoupling fc(spec.coupling, eps, gr);
            out.regularity.push_back(regularity_probe(fc, p.regularity_alpha));
        }
        if (out.regularity.size() >= 3) {
            std::vector<double> inv_eps;
            for (double e : p.regularity_eps) inv_eps.push_back(1.0 / e);
            out.regularity_fit = fit_rate(inv_eps, out.regularity);
        }
    }

    // Hamiltonian: sampled |D_pH| bound and finite-difference consistency
    {
        double worst = 0.0, fd_err = 0.0;
        const double hstep = 1e-4;
        for (int i = -500; i <= 500; ++i) {
            const double pp = i * 0.1;  // radius-50 scan
            worst = std::max(worst, std::fabs(spec.hamiltonian.hp1(pp)));
            const std::vector<double> x{0.3};
            const double fd = (spec.hamiltonian.eval(x, {pp + hstep}) - spec.hamiltonian.eval(x, {pp - hstep})) / (2.0 * hstep);
            fd_err = std::max(fd_err, std::fabs(fd - spec.hamiltonian.hp1(pp)));
        }
        out.dph_bound_max = worst;
        out.dph_fd_error = fd_err;
    }

    // W1 rate of empirical measures of iid uniform samples
    {
        TorusGrid g1(1, 64);
        const DensityField uni = uniform_density(g1);
        for (int n : p.empirical_n) {
            double acc = 0.0;
            for (int s = 0; s < p.empirical_seeds; ++s) {
                const auto pts = sample(uni, n, derive_stream(p.seed, 1000 + s, n));
                acc += w1_circle(all_atoms(pts), uni);
            }
            out.empirical_w1.push_back(acc / p.empirical_seeds);
        }
        if (out.empirical_w1.size() >= 3) {
            std::vector<double> ns;
            for (int n : p.empirical_n) ns.push_back(static_cast<double>(n));
            out.empirical_fit = fit_rate(ns, out.empirical_w1);
        }
    }
    return out;
}

struct NashGapParams {
    ProblemSpec spec = default_problem();
    std::vector<int> n_players{2, 3, 4};
    double eps_fixed = 0.2;
    double schedule_beta = 0.0;  // > 0: eps_N = ln(N)^(-beta)
    int nash_m = 32;
    double t0 = 0.0;
    double horizon = 0.5;
    int proj_m = 64;
    int proj_steps = 96;
    int samples = 64;
    int local_m = 128;
    int local_steps = 256;
    double tol = 1e-10;
    bool with_residuals = true;
};

struct NashGapRow {
    int players = 0;
    double epsilon = 0.0;
    double sup_gap = 0.0;
    double sup_gap_half_a = 0.0;  // split-sample estimates, their spread is the noise bar
    double sup_gap_half_b = 0.0;
    double avg_gap = 0.0;
    NashDiagnostics diag;
    double residual_half_a = 0.0;  // split-sample residual sups
    double residual_half_b = 0.0;
    std::size_t projector_solves = 0;
    std::string error;

    double sup_bar() const { return std::fabs(sup_gap_half_a - sup_gap_half_b); }
    double residual_bar() const { return std::fabs(residual_half_a - residual_half_b); }
};

inline double epsilon_schedule(int n, double beta) { return std::pow(std::log(static_cast<double>(n)), -beta); }

inline NashGapRow run_nash_gap_cell(const ProblemSpec& spec, int n, double eps, const NashGapParams& p) {
    NashGapRow row;
    row.players = n;
    row.epsilon = eps;

    NashOptions nopt;
    nopt.t0 = p.t0;
    nopt.horizon = p.horizon;
    NashSolution nash = solve_nash(spec, n, eps, p.nash_m, nopt);

    const double bandwidth = std::max(2.0 / p.proj_m, 0.5 * eps);
    MFGOptions mopt;
    mopt.tol = p.tol;
    MasterProjector proj(spec, eps, p.horizon, p.proj_m, p.proj_steps, bandwidth, mopt);

    // local reference on a fine grid
    TorusGrid gl(1, p.local_m);
    TimeGrid tl(p.t0, p.horizon, p.local_steps);
    MFGSolution local = solve_mfg(spec, gl, tl, cos_density(gl), CouplingKind::Local, 0.0, mopt);

    const auto samples = stratified_tensor_samples(n, p.nash_m, nash.time, p.samples);
    TorusGrid gn(1, p.nash_m);
    const NashGap gap = nash_gap(nash, proj, cos_density(gn), local.u.slice_field(0), samples);
    row.sup_gap = gap.sup_gap;
    row.avg_gap = gap.avg_gap;

    // split-half sup gaps as the measured noise bar
    double a = 0.0, b = 0.0;
    for (std::size_t k = 0; k < samples.size(); ++k) {
        double worst = 0.0;
        for (int i = 0; i < n; ++i) {
            const double vv = interpolate_slice(nash.tensor, nash.v_t0[i].data(), samples[k].second);
            const double uu = project_master(proj, i, nash.time.t0, samples[k].second);
            worst = std::max(worst, std::fabs(vv - uu));
        }
        if (k % 2 == 0) a = std::max(a, worst);
        else b = std::max(b, worst);
    }
    row.sup_gap_half_a = a;
    row.sup_gap_half_b = b;

    if (p.with_residuals) {
        auto interior = stratified_tensor_samples(n, p.nash_m, nash.time, std::max(8, p.samples / 4));
        row.diag = residual_probe(spec, n, eps, proj, interior);
        // split-half sups reuse the projector cache, so the bars are cheap
        std::vector<std::pair<double, std::vector<double>>> ha, hb;
        for (std::size_t k = 0; k < interior.size(); ++k)
            (k % 2 == 0 ? ha : hb).push_back(interior[k]);
        row.residual_half_a = residual_probe(spec, n, eps, proj, ha).residual;
        row.residual_half_b = residual_probe(spec, n, eps, proj, hb).residual;
    }
    row.projector_solves = proj.solves();
    return row;
}

inline std::vector<NashGapRow> run_nash_gap(const NashGapParams& p, int workers = 1) {
    const ProblemSpec& spec = p.spec;
    return parallel_map(static_cast<int>(p.n_players.size()), workers, [&](int idx) {
        const int n = p.n_players[idx];
        const double eps = p.schedule_beta > 0.0 ? epsilon_schedule(n, p.schedule_beta) : p.eps_fixed;
        try {
            return run_nash_gap_cell(spec, n, eps, p);
        } catch (const std::exception& e) {
            NashGapRow row;
            row.players = n;
            row.epsilon = eps;
            row.error = e.what();
            return row;
        }
    });
}

struct ChaosParams {
    ProblemSpec spec = default_problem();
    std::vector<int> n_players{2, 3, 4};
    double epsilon = 0.2;
    int nash_m = 16;
    int replicas = 64;
    double t0 = 0.0;
    double horizon = 0.5;
    int ref_m = 128;
    int ref_steps = 256;
    double tol = 1e-9;
    SimSeeds seeds{11, 13, {}};
};

struct ChaosRow {
    int players = 0;
    CoupledGap gap;             // Y vs X-tilde under shared noise
    double drift_gap_eta = 0.0; // measured sup feedback difference
    double drift_lip = 0.0;     // measured Lipschitz constant of the limit drift
    double envelope = 0.0;      // Gronwall bound + 3 stderr
    ChaosReport tilde_chaos;    // metrics of the X-tilde system
    double endpoint_w1_y = 0.0;
    std::string error;
};

inline ChaosRow run_chaos_cell(const ProblemSpec& spec, int n, const ChaosParams& p,
                               const MFGSolution& local) {
    ChaosRow row;
    row.players = n;

    NashOptions nopt;
    nopt.t0 = p.t0;
    nopt.horizon = p.horizon;
    nopt.store_history = true;
    NashSolution nash = solve_nash(spec, n, p.epsilon, p.nash_m, nopt);

    TimeGrid sim_time = nash.time;
    const DriftSpec drift_y = drift_from_nash(nash);
    const DriftSpec drift_x = drift_from_value_field(spec.hamiltonian, local.u, DriftKind::MfgLocal, "mfg-local");

    TorusGrid g1(1, p.nash_m);
    const DensityField m0 = cos_density(g1);
    const TrajectoryEnsemble ey = simulate(drift_y, m0, n, p.replicas, sim_time, p.seeds);
    const TrajectoryEnsemble ex = simulate(drift_x, m0, n, p.replicas, sim_time, p.seeds);
    row.gap = coupled_gap(ey, ex);

    // measured feedback gap along the visited Y states
    double eta = 0.0;
    std::vector<double> state(n);
    for (int r = 0; r < p.replicas; ++r)
        for (int k = 0; k <= sim_time.steps; ++k) {
            const double t = sim_time.node(k);
            for (int i = 0; i < n; ++i) state[i] = ey.at(r, i, k);
            for (int i = 0; i < n; ++i)
                eta = std::max(eta, std::fabs(drift_y.eval(i, t, state) - drift_x.eval(i, t, state)));
        }
    row.drift_gap_eta = eta;

    // Lipschitz constant of the limit drift field, by finite differences on
    // the reference grid
    double lip = 0.0;
    const double hh = local.u.grid.spacing();
    for (int k = 0; k <= local.u.time->steps; ++k) {
        const double t = local.u.time->node(k);
        for (int i = 0; i < local.u.grid.points_per_axis; ++i) {
            const double x = i * hh;
            std::vector<double> sa{wrap_unit(x + hh)}, sb{wrap_unit(x)};
            const double da = drift_x.eval(0, t, sa);
            const double db = drift_x.eval(0, t, sb);
            lip = std::max(lip, std::fabs(da - db) / hh);
        }
    }
    row.drift_lip = lip;
    const double span = p.horizon - p.t0;
    row.envelope = eta * span * std::exp(lip * span) + 3.0 * row.gap.stderr_;

    row.tilde_chaos = chaos_metrics(ex, local.m);
    row.endpoint_w1_y = chaos_metrics(ey, local.m).endpoint_w1;
    return row;
}

inline std::vector<ChaosRow> run_chaos(const ChaosParams& p, int workers = 1) {
    const ProblemSpec& spec = p.spec;
    TorusGrid gl(1, p.ref_m);
    TimeGrid tl(p.t0, p.horizon, p.ref_steps);
    MFGOptions mopt;
    mopt.tol = p.tol;
    MFGSolution local = solve_mfg(spec, gl, tl, cos_density(gl), CouplingKind::Local, 0.0, mopt);

    return parallel_map(static_cast<int>(p.n_players.size()), workers, [&](int idx) {
        try {
            return run_chaos_cell(spec, p.n_players[idx], p, local);
        } catch (const std::exception& e) {
            ChaosRow row;
            row.players = p.n_players[idx];
            row.error = e.what();
            return row;
        }
    });
}

struct ParabolicOrderResult {
    RateFit dt_fit;  // joint (dt, h) ladder with an active drift
    RateFit h_fit;   // heat equation at a tiny time step
};

inline ParabolicOrderResult run_parabolic_orders() {
    ParabolicOrderResult out;
    auto joint_error = [](int m, int steps) {
        TorusGrid g(1, m);
        TimeGrid tg(0.0, 0.2, steps);
        ParabolicProblem p;
        p.grid = g;
        p.time = tg;
        p.direction = TimeDirection::Forward;
        p.drift = VectorField(g, tg, 0.0);
        p.source = ScalarField(g, tg, 0.0);
        p.data = ScalarField(g);
        auto wstar = [](double t, double x) { return std::exp(-t) * (0.5 + 0.25 * std::sin(two_pi * x)); };
        for (int k = 0; k <= steps; ++k)
            for (int i = 0; i < m; ++i) {
                const double x = i / static_cast<double>(m), t = tg.node(k);
                const double v = 0.5 * std::cos(two_pi * x + 0.5 * t);
                const double wx = 0.25 * two_pi * std::cos(two_pi * x) * std::exp(-t);
                const double wxx = -0.25 * two_pi * two_pi * std::sin(two_pi * x) * std::exp(-t);
                p.drift.at(k, 0, i) = v;
                p.source.at(k, i) = -wstar(t, x) - wxx + v * wx;
            }
        for (int i = 0; i < m; ++i) p.data.values[i] = wstar(0.0, i / static_cast<double>(m));
        const ScalarField w = solve_parabolic(p);
        double err = 0.0;
        for (int i = 0; i < m; ++i)
            err = std::max(err, std::fabs(w.at(steps, i) - wstar(0.2, i / static_cast<double>(m))));
        return err;
    };
    std::vector<double> dts, derrs;
    for (auto [m, steps] : std::vector<std::pair<int, int>>{{32, 32}, {64, 64}, {128, 128}, {256, 256}}) {
        dts.push_back(0.2 / steps);
        derrs.push_back(joint_error(m, steps));
    }
    out.dt_fit = fit_rate(dts, derrs);

    std::vector<double> hs, herrs;
    for (int m : {32, 64, 128}) {
        TorusGrid g(1, m);
        // dt small enough that the O(dt) Euler error stays ~1% of the finest
        // spatial error, so the fit sees the pure h^2 order
        TimeGrid tg(0.0, 0.05, 500000);
        ParabolicProblem p;
        p.grid = g;
        p.time = tg;
        p.direction = TimeDirection::Forward;
        p.drift = VectorField(g, tg, 0.0);
        p.source = ScalarField(g, tg, 0.0);
        p.data = ScalarField(g);
        for (int i = 0; i < m; ++i) p.data.values[i] = std::cos(two_pi * i / static_cast<double>(m));
        const ScalarField w = solve_parabolic(p);
        double err = 0.0;
        for (int i = 0; i < m; ++i)
            err = std::max(err, std::fabs(w.at(tg.steps, i) -
                                          std::exp(-two_pi * two_pi * 0.05) * std::cos(two_pi * i / static_cast<double>(m))));
        hs.push_back(1.0 / m);
        herrs.push_back(err);
    }
    out.h_fit = fit_rate(hs, herrs);
    return out;
}

// ---------------------------------------------------------------------------
// config-driven runs
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

struct ExperimentConfig {
    nlohmann::json raw;

    static ExperimentConfig load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("config: cannot open " + path);
        ExperimentConfig cfg;
        cfg.raw = nlohmann::json::parse(in);
        cfg.validate();
        return cfg;
    }

    static ExperimentConfig from_json(nlohmann::json j) {
        ExperimentConfig cfg;
        cfg.raw = std::move(j);
        cfg.validate();
        return cfg;
    }

    void validate() const {
        if (!raw.contains("kind")) throw std::invalid_argument("config: missing kind");
        const std::string kind = raw.at("kind").get<std::string>();
        if (kind != "epsilon-stability" && kind != "nash-gap" && kind != "chaos" &&
            kind != "derivative-check" && kind != "assumption-probes")
            throw std::invalid_argument("config: unknown kind " + kind);
        if (raw.contains("sweep")) {
            const auto& sw = raw.at("sweep");
            if (sw.contains("epsilons") && sw.at("epsilons").empty())
                throw std::invalid_argument("config: empty epsilon sweep");
            if (sw.contains("n_players") && sw.at("n_players").empty())
                throw std::invalid_argument("config: empty player sweep");
            if (sw.contains("schedule_beta") && !(sw.at("schedule_beta").get<double>() > 0.0))
                throw std::invalid_argument("config: schedule beta must be positive");
        }
    }

    std::string name() const { return raw.value("name", std::string("run")); }
    std::uint64_t hash() const { return fnv1a(raw.dump()); }
};

struct RunArtifact {
    std::uint64_t config_hash = 0;
    std::string csv_path;
    std::string manifest_path;
    int failed_cells = 0;
    int failed_asserts = 0;
};

using CsvRow = std::vector<std::string>;

inline void write_csv(const std::string& path, const CsvRow& header, const std::vector<CsvRow>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_csv: cannot open " + path);
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << "\n";
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
        out << "\n";
    }
}

inline ProblemProfile profile_from_string(const std::string& s) {
    if (s == "default") return ProblemProfile::Default;
    if (s == "decoupled") return ProblemProfile::Decoupled;
    if (s == "nonlinear") return ProblemProfile::Nonlinear;
    if (s == "mild") return ProblemProfile::Mild;
    throw std::invalid_argument("unknown problem profile: " + s);
}

// {"profile": ..., "hamiltonian": {...}, "coupling": {...}, "terminal": {...}}
inline ProblemSpec problem_from_json(const nlohmann::json& j) {
    ProblemSpec spec = default_problem(profile_from_string(j.value("profile", "default")));
    if (j.contains("hamiltonian")) {
        const auto& h = j.at("hamiltonian");
        spec.hamiltonian.pot_amp = h.value("pot_amp", spec.hamiltonian.pot_amp);
        spec.hamiltonian.lipschitz_bound = h.value("lipschitz_bound", spec.hamiltonian.lipschitz_bound);
    }
    if (j.contains("coupling")) {
        const auto& c = j.at("coupling");
        spec.coupling.slope = c.value("slope", spec.coupling.slope);
        spec.coupling.quad = c.value("quad", spec.coupling.quad);
        spec.coupling.shape_amp = c.value("shape_amp", spec.coupling.shape_amp);
    }
    if (j.contains("terminal"))
        spec.terminal.amp = j.at("terminal").value("amp", spec.terminal.amp);
    return spec;
}

inline RunArtifact run(const ExperimentConfig& cfg, const std::string& out_dir, int workers = 1) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const std::string kind = cfg.raw.at("kind").get<std::string>();
    const std::string base = (fs::path(out_dir) / cfg.name()).string();

    RunArtifact art;
    art.config_hash = cfg.hash();
    art.csv_path = base + ".csv";
    art.manifest_path = base + ".manifest.json";

    // an existing manifest with the same hash must carry the same content
    if (fs::exists(art.manifest_path)) {
        std::ifstream prev(art.manifest_path);
        try {
            const nlohmann::json old = nlohmann::json::parse(prev);
            if (old.value("config_hash", std::uint64_t{0}) == art.config_hash &&
                old.value("config", nlohmann::json::object()) != cfg.raw)
                throw std::runtime_error("run: config hash collision with differing content at " +
                                         art.manifest_path);
        } catch (const nlohmann::json::parse_error&) {
            // unreadable previous manifest: overwrite
        }
    }

    const auto t_start = std::chrono::steady_clock::now();
    CsvRow header;
    std::vector<CsvRow> rows;
    nlohmann::json summary;

    const auto grid_cfg = cfg.raw.value("grid", nlohmann::json::object());
    const auto sweep_cfg = cfg.raw.value("sweep", nlohmann::json::object());
    const auto solver_cfg = cfg.raw.value("solver", nlohmann::json::object());
    const auto problem_cfg = cfg.raw.value("problem", nlohmann::json::object());

    if (kind == "epsilon-stability") {
        EpsilonStabilityParams p;
        p.spec = problem_from_json(problem_cfg);
        p.m = grid_cfg.value("m", p.m);
        p.steps = grid_cfg.value("steps", p.steps);
        p.horizon = grid_cfg.value("horizon", p.horizon);
        if (sweep_cfg.contains("epsilons")) p.epsilons = sweep_cfg.at("epsilons").get<std::vector<double>>();
        p.tol = solver_cfg.value("tol", p.tol);
        p.lambda = solver_cfg.value("lambda", p.lambda);
        const auto res = run_epsilon_stability(p);
        header = {"epsilon", "sup_u_gap", "grad_gap_L2", "m_gap_L2", "duality_pairing"};
        for (const auto& r : res.reports)
            rows.push_back({format_g17(r.epsilon), format_g17(r.sup_u_gap), format_g17(r.grad_gap_L2),
                            format_g17(r.m_gap_L2), format_g17(r.duality_pairing)});
        summary["m_gap_slope"] = res.m_gap_fit.slope;
        summary["m_gap_r2"] = res.m_gap_fit.r2;
        summary["sup_u_slope"] = res.sup_u_fit.slope;
    } else if (kind == "derivative-check") {
        DerivativeCheckParams p;
        if (!problem_cfg.empty()) p.spec = problem_from_json(problem_cfg);
        p.m = grid_cfg.value("m", p.m);
        p.steps = grid_cfg.value("steps", p.steps);
        p.epsilon = sweep_cfg.value("epsilon", p.epsilon);
        p.tol = solver_cfg.value("tol", p.tol);
        const auto res = run_derivative_check(p);
        header = {"order", "s", "mismatch"};
        for (std::size_t i = 0; i < p.s_first.size(); ++i)
            rows.push_back({"1", format_g17(p.s_first[i]), format_g17(res.first_mismatch[i])});
        for (std::size_t i = 0; i < p.s_second.size(); ++i)
            rows.push_back({"2", format_g17(p.s_second[i]), format_g17(res.second_mismatch[i])});
        summary["first_ratios"] = res.first_ratios;
    } else if (kind == "assumption-probes") {
        AssumptionProbeParams p;
        if (sweep_cfg.contains("epsilons")) p.closeness_eps = sweep_cfg.at("epsilons").get<std::vector<double>>();
        p.seed = cfg.raw.value("seed", 2024);
        const auto res = run_assumption_probes(p);
        header = {"probe", "x", "value"};
        for (std::size_t i = 0; i < res.closeness.size(); ++i)
            rows.push_back({"closeness", format_g17(p.closeness_eps[i]), format_g17(res.closeness[i])});
        for (std::size_t i = 0; i < res.regularity.size(); ++i)
            rows.push_back({"regularity", format_g17(p.regularity_eps[i]), format_g17(res.regularity[i])});
        for (std::size_t i = 0; i < res.empirical_w1.size(); ++i)
            rows.push_back({"empirical_w1", format_g17(p.empirical_n[i]), format_g17(res.empirical_w1[i])});
        rows.push_back({"monotonicity_min", "", format_g17(res.monotonicity_min)});
        rows.push_back({"dph_bound_max", "", format_g17(res.dph_bound_max)});
        summary["closeness_slope"] = res.closeness_fit.slope;
        summary["closeness_r2"] = res.closeness_fit.r2;
        summary["empirical_slope"] = res.empirical_fit.slope;
        summary["regularity_slope"] = res.regularity_fit.slope;
    } else if (kind == "nash-gap") {
        NashGapParams p;
        p.spec = problem_from_json(problem_cfg);
        if (sweep_cfg.contains("n_players")) p.n_players = sweep_cfg.at("n_players").get<std::vector<int>>();
        p.eps_fixed = sweep_cfg.value("epsilon", p.eps_fixed);
        p.schedule_beta = sweep_cfg.value("schedule_beta", 0.0);
        p.nash_m = grid_cfg.value("m", p.nash_m);
        p.horizon = grid_cfg.value("horizon", p.horizon);
        p.samples = sweep_cfg.value("samples", p.samples);
        p.tol = solver_cfg.value("tol", p.tol);
        const auto res = run_nash_gap(p, workers);
        header = {"players", "epsilon", "sup_gap", "sup_gap_bar", "avg_gap", "residual", "residual_bar",
                  "alpha", "beta", "theta", "projector_solves", "error"};
        for (const auto& r : res) {
            rows.push_back({std::to_string(r.players), format_g17(r.epsilon), format_g17(r.sup_gap),
                            format_g17(r.sup_bar()), format_g17(r.avg_gap), format_g17(r.diag.residual),
                            format_g17(r.residual_bar()), format_g17(r.diag.alpha),
                            format_g17(r.diag.beta), format_g17(r.diag.theta),
                            std::to_string(r.projector_solves), r.error});
            if (!r.error.empty()) ++art.failed_cells;
        }
        if (!res.empty() && res.front().error.empty() && res.back().error.empty()) {
            summary["sup_gap_first"] = res.front().sup_gap;
            summary["sup_gap_last"] = res.back().sup_gap;
            summary["avg_gap_first"] = res.front().avg_gap;
            summary["avg_gap_last"] = res.back().avg_gap;
            double mono = 1.0;
            for (std::size_t i = 1; i < res.size(); ++i)
                if (res[i].avg_gap > res[i - 1].avg_gap + 1e-6) mono = 0.0;
            summary["avg_gap_decreasing"] = mono;
        }
    } else if (kind == "chaos") {
        ChaosParams p;
        p.spec = problem_from_json(problem_cfg);
        if (sweep_cfg.contains("n_players")) p.n_players = sweep_cfg.at("n_players").get<std::vector<int>>();
        p.epsilon = sweep_cfg.value("epsilon", p.epsilon);
        p.replicas = sweep_cfg.value("replicas", p.replicas);
        p.nash_m = grid_cfg.value("m", p.nash_m);
        p.horizon = grid_cfg.value("horizon", p.horizon);
        p.seeds.noise_root = cfg.raw.value("seed", 11);
        const auto res = run_chaos(p, workers);
        header = {"players", "mean_sup_gap", "stderr", "eta", "lip", "envelope", "endpoint_w1_tilde",
                  "max_pair_corr", "error"};
        for (const auto& r : res) {
            rows.push_back({std::to_string(r.players), format_g17(r.gap.mean_sup_gap),
                            format_g17(r.gap.stderr_), format_g17(r.drift_gap_eta), format_g17(r.drift_lip),
                            format_g17(r.envelope), format_g17(r.tilde_chaos.endpoint_w1),
                            format_g17(r.tilde_chaos.max_pair_correlation), r.error});
            if (!r.error.empty()) ++art.failed_cells;
        }
        if (!res.empty()) {
            double below = 1.0, decreasing = 1.0;
            for (std::size_t i = 0; i < res.size(); ++i) {
                if (!res[i].error.empty() || res[i].gap.mean_sup_gap > res[i].envelope) below = 0.0;
                if (i > 0 && res[i].gap.mean_sup_gap >
                                 res[i - 1].gap.mean_sup_gap +
                                     2.0 * (res[i - 1].gap.stderr_ + res[i].gap.stderr_))
                    decreasing = 0.0;
            }
            summary["gap_below_envelope"] = below;
            summary["gap_decreasing_within_bars"] = decreasing;
        }
    }

    write_csv(art.csv_path, header, rows);

    // optional bounds asserted against summary values:
    // "asserts": [{"key": "...", "min": ..., "max": ...}, ...]
    nlohmann::json assert_results = nlohmann::json::array();
    if (cfg.raw.contains("asserts")) {
        for (const auto& a : cfg.raw.at("asserts")) {
            const std::string key = a.at("key").get<std::string>();
            nlohmann::json rec{{"key", key}};
            if (!summary.contains(key)) {
                rec["status"] = "missing";
                ++art.failed_asserts;
            } else {
                const double v = summary.at(key).get<double>();
                bool ok = true;
                if (a.contains("min") && v < a.at("min").get<double>()) ok = false;
                if (a.contains("max") && v > a.at("max").get<double>()) ok = false;
                rec["value"] = v;
                rec["status"] = ok ? "pass" : "fail";
                if (!ok) ++art.failed_asserts;
            }
            assert_results.push_back(rec);
        }
    }

    const auto t_end = std::chrono::steady_clock::now();
    nlohmann::json manifest;
    manifest["config"] = cfg.raw;
    manifest["config_hash"] = art.config_hash;
    manifest["rows"] = rows.size();
    manifest["failed_cells"] = art.failed_cells;
    manifest["asserts"] = assert_results;
    manifest["failed_asserts"] = art.failed_asserts;
    manifest["summary"] = summary;
    manifest["elapsed_seconds"] = std::chrono::duration<double>(t_end - t_start).count();
    std::ofstream mout(art.manifest_path);
    mout << manifest.dump(2) << "\n";
    return art;
}

}  // namespace mfglab
