#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mfglab/coupling.hpp"
#include "mfglab/grid.hpp"
#include "mfglab/measures.hpp"
#include "mfglab/nash.hpp"
#include "mfglab/rng.hpp"

namespace mfglab {

enum class DriftKind { Nash, ProjectedMaster, MfgMollified, MfgLocal, Custom };

// feedback drift for player i at (t, full state), d = 1 coordinates
struct DriftSpec {
    DriftKind kind = DriftKind::Custom;
    std::string label;
    std::function<double(int, double, const std::vector<double>&)> eval;
};

// drift -D_pH(x_i, du(t, x_i)) read from a single value field (MFG feedback)
inline DriftSpec drift_from_value_field(const Hamiltonian& ham, const ScalarField& u, DriftKind kind,
                                        std::string label) {
    if (!u.time) throw std::invalid_argument("drift_from_value_field: space-time field required");
    if (u.grid.dim != 1) throw std::invalid_argument("drift_from_value_field: d = 1 only");
    const double h = u.grid.spacing();
    DriftSpec spec;
    spec.kind = kind;
    spec.label = std::move(label);
    spec.eval = [&ham, &u, h](int i, double t, const std::vector<double>& x) {
        const double up = interpolate(u, t, {wrap_unit(x[i] + h)});
        const double dn = interpolate(u, t, {wrap_unit(x[i] - h)});
        return -ham.hp1((up - dn) / (2.0 * h));
    };
    return spec;
}

inline DriftSpec drift_from_nash(const NashSolution& sol) {
    if (!sol.has_history) throw std::invalid_argument("drift_from_nash: solve with store_history");
    DriftSpec spec;
    spec.kind = DriftKind::Nash;
    spec.label = "nash";
    const Hamiltonian ham = sol.spec.hamiltonian;
    spec.eval = [&sol, ham](int i, double t, const std::vector<double>& x) {
        return -ham.hp1(sol.own_gradient(i, t, x));
    };
    return spec;
}

// Projected-master feedback served from a cache of gradient fields at
// quantized states (nearest cache point within half a grid cell).
inline DriftSpec drift_from_projector(MasterProjector& proj, const Hamiltonian& ham) {
    DriftSpec spec;
    spec.kind = DriftKind::ProjectedMaster;
    spec.label = "master";
    const double hq = 0.5 * proj.grid().spacing();
    spec.eval = [&proj, ham, hq](int i, double t, const std::vector<double>& x) {
        std::vector<double> atoms;
        atoms.reserve(x.size() - 1);
        for (int j = 0; j < static_cast<int>(x.size()); ++j)
            if (j != i) atoms.push_back(wrap_unit(std::round(x[j] / hq) * hq));
        const double g = proj.eval_gradient(t, atoms, x[i]);
        return -ham.hp1(g);
    };
    return spec;
}

struct SimSeeds {
    std::uint64_t noise_root = 1;
    std::uint64_t initial = 2;
    // optional relabeling: player i consumes the initial sample and the noise
    // stream of label[i]; identity when empty
    std::vector<int> player_labels;
};

// K replicas of N coupled paths with per-(replica, player) noise streams
// derived from the root seed; identical seeds and drift reproduce the array
// bit-exactly.
struct TrajectoryEnsemble {
    int replicas = 0;
    int players = 0;
    TimeGrid time;
    SimSeeds seeds;
    std::vector<double> pos;     // wrapped to [0,1)
    std::vector<double> lifted;  // unwrapped trajectories

    std::size_t index(int r, int i, int k) const {
        return (static_cast<std::size_t>(r) * players + i) * (time.steps + 1) + k;
    }
    double at(int r, int i, int k) const { return pos[index(r, i, k)]; }
    double lifted_at(int r, int i, int k) const { return lifted[index(r, i, k)]; }
};

inline TrajectoryEnsemble simulate(const DriftSpec& drift, const DensityField& m0, int players,
                                   int replicas, const TimeGrid& tg, const SimSeeds& seeds) {
    if (m0.grid().dim != 1) throw std::invalid_argument("simulate: d = 1 only");
    TrajectoryEnsemble e;
    e.replicas = replicas;
    e.players = players;
    e.time = tg;
    e.seeds = seeds;
    e.pos.assign(static_cast<std::size_t>(replicas) * players * (tg.steps + 1), 0.0);
    e.lifted = e.pos;

    std::vector<int> label(players);
    for (int i = 0; i < players; ++i) label[i] = i;
    if (!seeds.player_labels.empty()) {
        if (static_cast<int>(seeds.player_labels.size()) != players)
            throw std::invalid_argument("simulate: player_labels size mismatch");
        label = seeds.player_labels;
    }

    const double dt = tg.dt();
    const double root2 = std::sqrt(2.0);
    std::vector<double> state(players);
    for (int r = 0; r < replicas; ++r) {
        const auto z = sample(m0, players, derive_stream(seeds.initial, r));
        std::vector<GaussianStream> noise;
        noise.reserve(players);
        for (int i = 0; i < players; ++i)
            noise.emplace_back(derive_stream(seeds.noise_root, r, label[i]));
        std::vector<double> lift(players);
        for (int i = 0; i < players; ++i) {
            state[i] = z[label[i]][0];
            lift[i] = state[i];
            e.pos[e.index(r, i, 0)] = state[i];
            e.lifted[e.index(r, i, 0)] = lift[i];
        }
        for (int k = 0; k < tg.steps; ++k) {
            const double t = tg.node(k);
            std::vector<double> b(players);
            for (int i = 0; i < players; ++i) {
                try {
                    b[i] = drift.eval(i, t, state);
                } catch (const std::exception& err) {
                    throw std::runtime_error("simulate: drift failure at replica " + std::to_string(r) +
                                             ", player " + std::to_string(i) + ", step " + std::to_string(k) +
                                             ": " + err.what());
                }
                if (!std::isfinite(b[i]))
                    throw std::runtime_error("simulate: non-finite drift at replica " + std::to_string(r) +
                                             ", player " + std::to_string(i) + ", step " + std::to_string(k));
            }
            for (int i = 0; i < players; ++i) {
                const double inc = b[i] * dt + root2 * std::sqrt(dt) * noise[i].next();
                lift[i] += inc;
                state[i] = wrap_unit(state[i] + inc);
                e.pos[e.index(r, i, k + 1)] = state[i];
                e.lifted[e.index(r, i, k + 1)] = lift[i];
            }
        }
    }
    return e;
}

inline double geodesic_1d(double a, double b) {
    double d = std::fabs(a - b);
    return std::min(d, 1.0 - d);
}

struct CoupledGap {
    double mean_sup_gap = 0.0;
    double stderr_ = 0.0;
};

// E[sup_t |e1 - e2|] under the shared-noise coupling, averaged over players
// and replicas; the standard error is computed across replica means
inline CoupledGap coupled_gap(const TrajectoryEnsemble& e1, const TrajectoryEnsemble& e2) {
    if (e1.replicas != e2.replicas || e1.players != e2.players ||
        !(e1.time == e2.time) || e1.seeds.noise_root != e2.seeds.noise_root ||
        e1.seeds.initial != e2.seeds.initial)
        throw std::invalid_argument("coupled_gap: ensembles do not share seeds and shape");
    CoupledGap out;
    std::vector<double> per_replica(e1.replicas, 0.0);
    for (int r = 0; r < e1.replicas; ++r) {
        double acc = 0.0;
        for (int i = 0; i < e1.players; ++i) {
            double sup = 0.0;
            for (int k = 0; k <= e1.time.steps; ++k)
                sup = std::max(sup, geodesic_1d(e1.at(r, i, k), e2.at(r, i, k)));
            acc += sup;
        }
        per_replica[r] = acc / e1.players;
    }
    double mean = 0.0;
    for (double v : per_replica) mean += v;
    mean /= e1.replicas;
    double var = 0.0;
    for (double v : per_replica) var += (v - mean) * (v - mean);
    var /= std::max(1, e1.replicas - 1);
    out.mean_sup_gap = mean;
    out.stderr_ = std::sqrt(var / e1.replicas);
    return out;
}

struct ChaosReport {
    std::vector<double> w1_curve;   // per time node, replica-averaged
    double endpoint_w1 = 0.0;
    double mean_pair_correlation = 0.0;
    double max_pair_correlation = 0.0;
    double correlation_sigma = 0.0;  // ~ 1/sqrt(replicas)
};

// Propagation-of-chaos metrics: W1 of the endpoint empirical measure to the
// reference flow, and pairwise correlation of centered lifted displacements.
inline ChaosReport chaos_metrics(const TrajectoryEnsemble& e, const ScalarField& reference_flow) {
    if (!reference_flow.time) throw std::invalid_argument("chaos_metrics: reference flow must be space-time");
    ChaosReport rep;
    const int K = e.time.steps;
    rep.w1_curve.resize(K + 1, 0.0);
    // time nodes of the reference flow may differ; index by fraction
    const TimeGrid& rt = *reference_flow.time;
    for (int k = 0; k <= K; ++k) {
        const double t = e.time.node(k);
        const double u = (t - rt.t0) / rt.dt();
        int rk = static_cast<int>(std::llround(u));
        if (rk < 0) rk = 0;
        if (rk > rt.steps) rk = rt.steps;
        DensityField ref(reference_flow.slice_field(rk), /*renormalize=*/true);
        double acc = 0.0;
        for (int r = 0; r < e.replicas; ++r) {
            EmpiricalMeasure em;
            for (int i = 0; i < e.players; ++i) em.atoms.push_back({e.at(r, i, k)});
            acc += w1_circle(em, ref);
        }
        rep.w1_curve[k] = acc / e.replicas;
    }
    rep.endpoint_w1 = rep.w1_curve.back();

    // pairwise correlations of centered lifted displacements
    const int N = e.players;
    std::vector<double> disp(static_cast<std::size_t>(e.replicas) * N);
    for (int r = 0; r < e.replicas; ++r)
        for (int i = 0; i < N; ++i)
            disp[static_cast<std::size_t>(r) * N + i] = e.lifted_at(r, i, K) - e.lifted_at(r, i, 0);
    std::vector<double> mean(N, 0.0);
    for (int i = 0; i < N; ++i) {
        for (int r = 0; r < e.replicas; ++r) mean[i] += disp[static_cast<std::size_t>(r) * N + i];
        mean[i] /= e.replicas;
    }
    double acc = 0.0, worst = 0.0;
    int pairs = 0;
    for (int i = 0; i < N; ++i)
        for (int j = i + 1; j < N; ++j) {
            double cij = 0.0, cii = 0.0, cjj = 0.0;
            for (int r = 0; r < e.replicas; ++r) {
                const double a = disp[static_cast<std::size_t>(r) * N + i] - mean[i];
                const double b = disp[static_cast<std::size_t>(r) * N + j] - mean[j];
                cij += a * b;
                cii += a * a;
                cjj += b * b;
            }
            const double corr = cij / std::sqrt(std::max(cii * cjj, 1e-300));
            acc += corr;
            worst = std::max(worst, std::fabs(corr));
            ++pairs;
        }
    rep.mean_pair_correlation = pairs ? acc / pairs : 0.0;
    rep.max_pair_correlation = worst;
    rep.correlation_sigma = 1.0 / std::sqrt(static_cast<double>(std::max(1, e.replicas)));
    return rep;
}

}  // namespace mfglab
