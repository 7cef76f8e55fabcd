#include "doctest.h"

#include <cmath>
#include <vector>

#include "mfglab/harness.hpp"
#include "mfglab/nash.hpp"
#include "support/explicit_nash.hpp"

using namespace mfglab;



TEST_CASE("decoupled system: exact zero solution") {
    const ProblemSpec spec = default_problem(ProblemProfile::Decoupled);
    NashOptions opt;
    const auto sol = solve_nash(spec, 2, 0.2, 32, opt);
    for (int i = 0; i < 2; ++i)
        for (double v : sol.v_t0[i]) CHECK(std::fabs(v) <= 1e-8);
    CHECK(sol.max_principle_slack <= 1e-12);
}

TEST_CASE("two-player relabeling symmetry") {
    const ProblemSpec spec = default_problem();
    const auto sol = solve_nash(spec, 2, 0.2, 32, {});
    const int m = 32;
    for (int a = 0; a < m; a += 3)
        for (int b = 0; b < m; b += 3) {
            const double v1 = sol.v_t0[0][static_cast<std::size_t>(a) * m + b];
            const double v2 = sol.v_t0[1][static_cast<std::size_t>(b) * m + a];
            CHECK(std::fabs(v1 - v2) <= 1e-8);
        }
}

TEST_CASE("three-player exchangeability in the bystander coordinates") {
    const ProblemSpec spec = default_problem();
    NashOptions opt;
    opt.horizon = 0.3;
    const auto sol = solve_nash(spec, 3, 0.25, 16, opt);
    const int m = 16;
    auto idx = [m](int a, int b, int c) {
        return (static_cast<std::size_t>(a) * m + b) * m + c;
    };
    for (int a = 0; a < m; a += 2)
        for (int b = 0; b < m; b += 2)
            for (int c = b + 1; c < m; c += 3) {
                CHECK(std::fabs(sol.v_t0[0][idx(a, b, c)] - sol.v_t0[0][idx(a, c, b)]) <= 1e-8);
                // relabeling: swap players 1 and 2
                CHECK(std::fabs(sol.v_t0[1][idx(a, b, c)] - sol.v_t0[2][idx(a, c, b)]) <= 1e-8);
            }
}

TEST_CASE("IMEX solver against the independent fully-explicit fine-step oracle") {
    const ProblemSpec spec = default_problem();
    const int m = 32;
    NashOptions opt;
    opt.horizon = 0.5;
    const auto sol = solve_nash(spec, 2, 0.2, m, opt);
    const double dt = sol.time.dt();
    const auto oracle = mfglab_test::explicit_nash_oracle(spec, 0.2, m, 0.5, dt / 10.0);
    double gap = 0.0;
    for (int i = 0; i < 2; ++i)
        for (std::size_t c = 0; c < oracle[i].size(); ++c)
            gap = std::max(gap, std::fabs(sol.v_t0[i][c] - oracle[i][c]));
    const double h = 1.0 / m;
    MESSAGE("nash oracle gap ", gap, " envelope ", 5.0 * (dt + h * h));
    CHECK(gap <= 5.0 * (dt + h * h));
}

TEST_CASE("comparison bound holds along the sweep") {
    const ProblemSpec spec = default_problem();
    const auto sol = solve_nash(spec, 2, 0.2, 32, {});
    double fsup = 0.0;
    {
        MollifiedCoupling fc(spec.coupling, 0.2, TorusGrid(1, 32));
        for (int b = 0; b < 32; ++b) {
            EmpiricalMeasure em;
            em.atoms.push_back({b / 32.0});
            for (int a = 0; a < 32; ++a)
                fsup = std::max(fsup, std::fabs(mollified_eval_empirical(fc, em, {a / 32.0}).value));
        }
    }
    const double bound = 0.2 + 0.5 * (fsup + 0.1) + 1e-8;
    for (int i = 0; i < 2; ++i)
        for (double v : sol.v_t0[i]) CHECK(std::fabs(v) <= bound);
    CHECK(sol.max_principle_slack <= 1e-8);
}

TEST_CASE("memory guard refuses oversized tensor grids") {
    const ProblemSpec spec = default_problem();
    NashOptions opt;
    opt.memory_budget = 200'000'000;
    CHECK_THROWS_WITH_AS((void)solve_nash(spec, 4, 0.2, 64, opt), doctest::Contains("memory"),
                         std::runtime_error);
}

TEST_CASE("coupling precompute matches the public empirical evaluator") {
    const ProblemSpec spec = default_problem();
    const int m = 16;
    MollifiedCoupling fc(spec.coupling, 0.2, TorusGrid(1, m));
    SplitMix64 rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<int> coords{static_cast<int>(rng.next_u64() % m), static_cast<int>(rng.next_u64() % m)};
        const auto field = detail::coupling_field_for_multiset(fc, coords);
        EmpiricalMeasure em;
        for (int c : coords) em.atoms.push_back({c / static_cast<double>(m)});
        const int xi = static_cast<int>(rng.next_u64() % m);
        const auto direct = mollified_eval_empirical(fc, em, {xi / static_cast<double>(m)});
        CHECK(field[xi] == doctest::Approx(direct.value).epsilon(1e-12));
    }
}

TEST_CASE("average_value: slices, point masses, quadrature vs Monte Carlo") {
    const ProblemSpec spec = default_problem(ProblemProfile::Decoupled);
    // decoupled: v is identically zero, average too, zero variance
    const auto zero_sol = solve_nash(spec, 2, 0.2, 16, {});
    const auto avg0 = average_value(zero_sol, 0, uniform_density(TorusGrid(1, 16)));
    for (double v : avg0.values) CHECK(std::fabs(v) <= 1e-10);

    const ProblemSpec live = default_problem();
    const auto sol = solve_nash(live, 2, 0.25, 16, {});
    TorusGrid g1(1, 16);

    // near-point-mass m0 at node b: the average approaches the slice at b
    const int bnode = 5;
    ScalarField spike(g1, 1e-9);
    spike.values[bnode] = 16.0;
    DensityField m0b(spike, true);
    const auto avgb = average_value(sol, 0, m0b);
    for (int a = 0; a < 16; ++a) {
        const double slice = sol.v_t0[0][static_cast<std::size_t>(a) * 16 + bnode];
        CHECK(avgb.values[a] == doctest::Approx(slice).epsilon(1e-6));
    }

    // quadrature against forced Monte Carlo
    const auto quad = average_value(sol, 0, cos_density(g1, 0.4));
    const auto mc = average_value(sol, 0, cos_density(g1, 0.4), 10000, 31, /*force_mc=*/true);
    for (int a = 0; a < 16; ++a) {
        const double se = std::max(mc.stderrs[a], 1e-12);
        CHECK(std::fabs(mc.values[a] - quad.values[a]) <= 3.0 * se + 1e-4);
    }
}

TEST_CASE("master projection: cache is permutation-invariant, definition unwinds at N = 2") {
    const ProblemSpec spec = default_problem();
    const double eps = 0.2;
    MFGOptions mopt;
    mopt.tol = 1e-10;
    MasterProjector proj(spec, eps, 0.5, 64, 64, std::max(2.0 / 64, eps / 2), mopt);

    const double t = 0.1;
    const double a = proj.eval(t, {0.3, 0.8}, 0.5);
    const double b = proj.eval(t, {0.8, 0.3}, 0.5);
    CHECK(a == b);  // multiset keying, bit-exact
    CHECK(proj.solves() == 1);
    CHECK(proj.hits() >= 1);

    // N = 2: the projection is the MFG value from the single-bump density
    EmpiricalMeasure one;
    one.atoms.push_back({0.7});
    const DensityField bump = project_to_grid(one, proj.grid(), proj.bandwidth());
    TimeGrid tg(t, 0.5, 64);
    const MFGSolution direct = solve_mfg(spec, proj.grid(), tg, bump, CouplingKind::Mollified, eps, mopt);
    const double x_query = 28.0 / 64.0;  // grid node of the projection grid
    const double via_proj = project_master(proj, 0, t, {x_query, 0.7});
    CHECK(via_proj == doctest::Approx(direct.u.at(0, 28)).epsilon(1e-12));
}

TEST_CASE("residual probe values are bit-exact across fresh projectors") {
    const ProblemSpec spec = default_problem();
    MFGOptions mopt;
    mopt.tol = 1e-10;
    TimeGrid tg(0.0, 0.5, 36);
    const auto samples = stratified_tensor_samples(2, 16, tg, 3);
    MasterProjector pa(spec, 0.2, 0.5, 64, 48, 0.1, mopt);
    MasterProjector pb(spec, 0.2, 0.5, 64, 48, 0.1, mopt);
    const auto da = residual_probe(spec, 2, 0.2, pa, samples);
    const auto db = residual_probe(spec, 2, 0.2, pb, samples);
    CHECK(da.residual == db.residual);
    CHECK(da.alpha == db.alpha);
    CHECK(da.beta == db.beta);
    CHECK(da.alpha >= 0.0);
    CHECK(da.beta >= 0.0);
    CHECK(da.residual >= 0.0);
}

TEST_CASE("residual probe: decoupled case vanishes identically") {
    const ProblemSpec spec = default_problem(ProblemProfile::Decoupled);
    MFGOptions mopt;
    mopt.tol = 1e-11;
    MasterProjector proj(spec, 0.2, 0.5, 64, 64, 0.1, mopt);
    TimeGrid tg(0.0, 0.5, 40);
    const auto samples = stratified_tensor_samples(3, 16, tg, 6);
    const auto diag = residual_probe(spec, 3, 0.2, proj, samples);
    CHECK(diag.beta <= 1e-10);
    CHECK(diag.alpha <= 1e-10);
    CHECK(diag.residual <= 1e-8);
    CHECK(diag.theta == doctest::Approx(1.0));
}

TEST_CASE("nash gap: decoupled case sits at the floor") {
    const ProblemSpec spec = default_problem(ProblemProfile::Decoupled);
    NashOptions nopt;
    nopt.horizon = 0.5;
    const auto nash = solve_nash(spec, 2, 0.2, 16, nopt);
    MFGOptions mopt;
    mopt.tol = 1e-11;
    MasterProjector proj(spec, 0.2, 0.5, 64, 64, 0.1, mopt);
    TorusGrid g16(1, 16);
    TorusGrid g64(1, 64);
    TimeGrid tl(0.0, 0.5, 128);
    MFGSolution local = solve_mfg(spec, g64, tl, cos_density(g64), CouplingKind::Local, 0.0, mopt);
    const auto samples = stratified_tensor_samples(2, 16, nash.time, 16);
    const auto gap = nash_gap(nash, proj, cos_density(g16), local.u.slice_field(0), samples);
    CHECK(gap.sup_gap <= 1e-9);
    CHECK(gap.avg_gap <= 1e-9);
}
