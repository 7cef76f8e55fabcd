// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Thresholds are pinned here, not configurable.

#include <cmath>
#include <cstdio>
#include <cstdarg>
#include <string>
#include <vector>

#include "mfglab/mfglab.hpp"
#include "support/explicit_nash.hpp"

using namespace mfglab;

namespace {

int failures = 0;

void criterion(int number, const std::string& name, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %2d: %s (%s)\n", pass ? "PASS" : "FAIL", number, name.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list args;
    va_start(args, f);
    std::vsnprintf(buf, sizeof(buf), f, args);
    va_end(args);
    return buf;
}

}  // namespace

// 1. mollifier closeness scaling: slope of k^{R,alpha}_eps in eps
static void criterion_1() {
    AssumptionProbeParams p;
    p.closeness_m = 128;
    p.closeness_eps = {0.2, 0.1, 0.05};
    p.closeness_R = 5.0;
    p.closeness_alpha = 1.0;
    p.closeness_samples = 12;
    AssumptionProbeResult r;
    TorusGrid g(1, p.closeness_m);
    const ProblemSpec spec = default_problem();
    std::vector<double> vals;
    for (double eps : p.closeness_eps) {
        MollifiedCoupling fc(spec.coupling, eps, g);
        vals.push_back(closeness_probe(fc, p.closeness_R, p.closeness_alpha, p.closeness_samples, p.seed));
    }
    const RateFit fit = fit_rate(p.closeness_eps, vals);
    criterion(1, "mollifier closeness scaling",
              fit.slope >= 0.8 && fit.slope <= 1.2 && fit.r2 >= 0.95,
              fmt("slope %.3f in [0.8,1.2], r2 %.4f >= 0.95; probe %.3g/%.3g/%.3g", fit.slope, fit.r2,
                  vals[0], vals[1], vals[2]));
}

// 2. monotonicity of the mollified coupling on 100 seeded density pairs
static void criterion_2() {
    const ProblemSpec spec = default_problem();
    TorusGrid g(1, 64);
    MollifiedCoupling fc(spec.coupling, 0.15, g);
    double worst = 1e300;
    for (int s = 0; s < 100; ++s) {
        DensityField a = random_holder_density(g, 0.9, 4.0, derive_stream(2024, 2 * s));
        DensityField b = random_holder_density(g, 0.9, 4.0, derive_stream(2024, 2 * s + 1));
        worst = std::min(worst, monotonicity_probe(fc, a, b));
    }
    criterion(2, "monotonicity of F^eps", worst >= -1e-10, fmt("min pairing %.3g >= -1e-10", worst));
}

// 3. MFG stability scaling in eps
static void criterion_3() {
    EpsilonStabilityParams p;  // M = 128, K = 200, m0 = 1 + 0.5 cos, eps {0.2, 0.1, 0.05}
    const auto res = run_epsilon_stability(p);
    const bool m_band = res.m_gap_fit.slope >= 0.7 && res.m_gap_fit.slope <= 1.3;
    const bool u_rate = res.sup_u_fit.slope >= 0.47;
    criterion(3, "MFG stability scaling", m_band && u_rate,
              fmt("m_gap slope %.3f vs [0.7,1.3], sup_u slope %.3f >= 0.47; gaps %.3g/%.3g/%.3g",
                  res.m_gap_fit.slope, res.sup_u_fit.slope, res.reports[0].m_gap_L2,
                  res.reports[1].m_gap_L2, res.reports[2].m_gap_L2));
}

// 4. measure-derivative correctness: first and second order
static void criterion_4() {
    DerivativeCheckParams p;  // M = 64, K = 100, nonlinear profile
    const auto res = run_derivative_check(p);
    bool ratios_ok = res.first_ratios.size() == 2;
    for (double r : res.first_ratios) ratios_ok = ratios_ok && r >= 5.0 && r <= 20.0;
    const bool second_ok = res.second_mismatch.size() == 2 && res.second_mismatch[1] < res.second_mismatch[0];
    criterion(4, "measure-derivative correctness", ratios_ok && second_ok,
              fmt("first ratios %.2f, %.2f in [5,20]; second mismatch %.3g -> %.3g decaying",
                  res.first_ratios.empty() ? 0.0 : res.first_ratios[0],
                  res.first_ratios.size() < 2 ? 0.0 : res.first_ratios[1], res.second_mismatch[0],
                  res.second_mismatch[1]));
}

// 5. duality / energy identity and adjoint pair
static void criterion_5() {
    const ProblemSpec spec = default_problem();
    TorusGrid g(1, 64);
    TimeGrid tg(0.0, 0.5, 100);
    MFGOptions opt;
    opt.tol = 1e-12;
    const double eps = 0.15;
    MFGSolution base = solve_mfg(spec, g, tg, cos_density(g), CouplingKind::Mollified, eps, opt);
    MollifiedCoupling fc(spec.coupling, eps, g);
    double worst = 1e300;
    for (int seed = 0; seed < 20; ++seed) {
        SplitMix64 rng(derive_stream(321, seed));
        ScalarField r0(g);
        double mean = 0.0;
        for (auto& v : r0.values) {
            v = rng.uniform() - 0.5;
            mean += v;
        }
        mean /= r0.values.size();
        for (auto& v : r0.values) v -= mean;
        const auto first = solve_linearized_first(spec, fc, base, r0, 1e-12);
        worst = std::min(worst, energy_identity_probe(spec, fc, base, first));
    }

    VectorField v(g, tg, 0.0);
    for (int k = 0; k <= 100; ++k)
        for (int i = 0; i < 64; ++i)
            v.at(k, 0, i) = 0.7 * std::sin(two_pi * i / 64.0 + 0.02 * k) + 0.2 * std::cos(2 * two_pi * i / 64.0);
    const double adj = adjoint_consistency_check(g, tg, v);
    criterion(5, "duality and adjoint structure", worst >= -1e-6 && adj <= 1e-8,
              fmt("min energy probe %.3g >= -1e-6, adjoint pairing drift %.3g <= 1e-8", worst, adj));
}

// 6. Nash solver correctness: decoupled zero, explicit oracle, symmetries
static void criterion_6() {
    const ProblemSpec dec = default_problem(ProblemProfile::Decoupled);
    NashOptions opt;
    opt.horizon = 0.5;
    const auto zero = solve_nash(dec, 2, 0.2, 32, opt);
    double zmax = 0.0;
    for (int i = 0; i < 2; ++i)
        for (double v : zero.v_t0[i]) zmax = std::max(zmax, std::fabs(v));

    const ProblemSpec spec = default_problem();
    const auto sol2 = solve_nash(spec, 2, 0.2, 32, opt);
    const auto oracle = mfglab_test::explicit_nash_oracle(spec, 0.2, 32, 0.5, sol2.time.dt() / 10.0);
    double gap = 0.0;
    for (int i = 0; i < 2; ++i)
        for (std::size_t c = 0; c < oracle[i].size(); ++c)
            gap = std::max(gap, std::fabs(sol2.v_t0[i][c] - oracle[i][c]));
    const double envelope = 5.0 * (sol2.time.dt() + 1.0 / (32.0 * 32.0));

    // symmetries on 100 sampled nodes of the three-player solve
    const auto sol3 = solve_nash(spec, 3, 0.2, 32, opt);
    const int m = 32;
    auto idx = [m](int a, int b, int c) { return (static_cast<std::size_t>(a) * m + b) * m + c; };
    double sym = 0.0;
    SplitMix64 rng(606);
    for (int s = 0; s < 100; ++s) {
        const int a = static_cast<int>(rng.next_u64() % m);
        const int b = static_cast<int>(rng.next_u64() % m);
        const int c = static_cast<int>(rng.next_u64() % m);
        sym = std::max(sym, std::fabs(sol3.v_t0[0][idx(a, b, c)] - sol3.v_t0[0][idx(a, c, b)]));
        sym = std::max(sym, std::fabs(sol3.v_t0[1][idx(a, b, c)] - sol3.v_t0[2][idx(a, c, b)]));
        sym = std::max(sym, std::fabs(sol2.v_t0[0][static_cast<std::size_t>(a) * m + b] -
                                      sol2.v_t0[1][static_cast<std::size_t>(b) * m + a]));
    }
    criterion(6, "Nash solver correctness", zmax <= 1e-8 && gap <= envelope && sym <= 1e-8,
              fmt("decoupled sup %.2g <= 1e-8, oracle gap %.3g <= %.3g, symmetry %.2g <= 1e-8", zmax,
                  gap, envelope, sym));
}

// 7 + 8. Nash -> projection gap trend and headline averaged convergence
static void criteria_7_8() {
    NashGapParams p;  // N {2,3,4}, eps 0.2, M = 32, projector M = 64
    p.tol = 1e-10;
    const auto rows = run_nash_gap(p);
    bool ok7 = rows.size() == 3;
    std::string det7;
    for (const auto& r : rows) {
        if (!r.error.empty()) ok7 = false;
        det7 += fmt("N=%d sup %.4g (bar %.2g) res %.4g (bar %.2g); ", r.players, r.sup_gap,
                    r.sup_bar(), r.diag.residual, r.residual_bar());
    }
    if (ok7) {
        for (std::size_t i = 1; i < rows.size(); ++i) {
            const double gbar = rows[i - 1].sup_bar() + rows[i].sup_bar() + 1e-6;
            ok7 = ok7 && rows[i].sup_gap <= rows[i - 1].sup_gap + gbar;
            const double rbar = rows[i - 1].residual_bar() + rows[i].residual_bar() + 1e-6;
            ok7 = ok7 && rows[i].diag.residual <= rows[i - 1].diag.residual + rbar;
        }
    }
    criterion(7, "Nash-projection gap trend", ok7, det7);

    NashGapParams ps = p;
    ps.schedule_beta = 0.1;
    ps.with_residuals = false;
    const auto srows = run_nash_gap(ps);
    bool ok8 = srows.size() == 3;
    std::string det8;
    for (const auto& r : srows) {
        if (!r.error.empty()) ok8 = false;
        det8 += fmt("N=%d eps %.4f avg_gap %.4g; ", r.players, r.epsilon, r.avg_gap);
    }
    if (ok8)
        for (std::size_t i = 1; i < srows.size(); ++i)
            ok8 = ok8 && srows[i].avg_gap <= srows[i - 1].avg_gap + 1e-6;
    criterion(8, "headline averaged convergence trend", ok8, det8);
}

// 9. empirical-measure W1 rate for iid uniform samples
static void criterion_9() {
    TorusGrid g(1, 64);
    const DensityField uni = uniform_density(g);
    std::vector<double> ns{100, 1000, 10000}, w1s;
    for (double nd : ns) {
        const int n = static_cast<int>(nd);
        double acc = 0.0;
        for (int s = 0; s < 200; ++s)
            acc += w1_circle(all_atoms(sample(uni, n, derive_stream(5150, s, n))), uni);
        w1s.push_back(acc / 200.0);
    }
    const RateFit fit = fit_rate(ns, w1s);
    criterion(9, "empirical-measure W1 rate", fit.slope >= -0.6 && fit.slope <= -0.4,
              fmt("slope %.3f in [-0.6,-0.4]; means %.4g/%.4g/%.4g", fit.slope, w1s[0], w1s[1], w1s[2]));
}

// 10. propagation-of-chaos trend under shared noise
static void criterion_10() {
    ChaosParams p;  // N {2,3,4}, eps 0.2, 64 replicas
    const auto rows = run_chaos(p);
    bool ok = rows.size() == 3;
    std::string det;
    for (const auto& r : rows) {
        if (!r.error.empty()) {
            ok = false;
            det += r.error + "; ";
            continue;
        }
        ok = ok && r.gap.mean_sup_gap <= r.envelope;
        ok = ok && std::fabs(r.tilde_chaos.mean_pair_correlation) <= 3.0 * r.tilde_chaos.correlation_sigma;
        det += fmt("N=%d gap %.4g+-%.2g env %.3g corr %.3f; ", r.players, r.gap.mean_sup_gap,
                   r.gap.stderr_, r.envelope, r.tilde_chaos.mean_pair_correlation);
    }
    if (ok)
        for (std::size_t i = 1; i < rows.size(); ++i) {
            const double slack = 2.0 * (rows[i - 1].gap.stderr_ + rows[i].gap.stderr_);
            ok = ok && rows[i].gap.mean_sup_gap <= rows[i - 1].gap.mean_sup_gap + slack;
        }
    criterion(10, "propagation-of-chaos trend", ok, det);
}

// 11. parabolic engine convergence orders
static void criterion_11() {
    const auto res = run_parabolic_orders();
    criterion(11, "parabolic engine order",
              res.dt_fit.slope >= 1.0 && res.dt_fit.r2 >= 0.98 && res.h_fit.slope >= 1.95 &&
                  res.h_fit.r2 >= 0.98,
              fmt("dt slope %.3f (r2 %.4f) >= 1, h slope %.3f (r2 %.4f) >= 1.95", res.dt_fit.slope,
                  res.dt_fit.r2, res.h_fit.slope, res.h_fit.r2));
}

int main() {
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criteria_7_8();
    criterion_9();
    criterion_10();
    criterion_11();
    std::printf("%d criterion(s) failed\n", failures);
    return failures;
}
