// Command-line front end: sweeps, probes and particle runs with CSV + JSON
// manifests under --out.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mfglab/mfglab.hpp"

using namespace mfglab;

namespace {

ExperimentConfig make_config(const std::string& kind, const std::string& name,
                             const std::string& config_path, std::uint64_t seed) {
    nlohmann::json j;
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw std::runtime_error("cannot open config " + config_path);
        j = nlohmann::json::parse(in);
    }
    j["kind"] = kind;
    if (!j.contains("name")) j["name"] = name;
    if (seed != 0) j["seed"] = seed;
    return ExperimentConfig::from_json(j);
}

int finish(const RunArtifact& art) {
    std::printf("csv:      %s\nmanifest: %s\nhash:     %016llx\n", art.csv_path.c_str(),
                art.manifest_path.c_str(), static_cast<unsigned long long>(art.config_hash));
    if (art.failed_cells) std::printf("failed cells: %d\n", art.failed_cells);
    if (art.failed_asserts) std::printf("failed asserts: %d\n", art.failed_asserts);
    return art.failed_cells + art.failed_asserts > 0 ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mfglab: N-player Nash systems, mean field games and mollified couplings on the torus"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path, out_dir = "out";
    std::uint64_t seed = 0;
    int workers = 1;
    app.add_option("--config", config_path, "JSON config file")->capture_default_str();
    app.add_option("--out", out_dir, "output directory")->capture_default_str();
    app.add_option("--seed", seed, "root seed override");
    app.add_option("--workers", workers, "sweep worker budget (cells run ordered by sweep index)");

    auto* probe = app.add_subcommand("probe-assumptions", "closeness, monotonicity, regularity and rate probes");
    auto* sweep_eps = app.add_subcommand("sweep-epsilon", "local vs mollified MFG stability sweep");
    auto* sweep_nash = app.add_subcommand("sweep-nash", "Nash tensor solves against master projections");
    auto* chaos_cmd = app.add_subcommand("chaos", "shared-noise particle systems and chaos metrics");
    auto* deriv = app.add_subcommand("derivative-check", "measure-derivative finite-difference checks");

    auto* report = app.add_subcommand("report", "summarize a run manifest");
    std::string manifest_path;
    report->add_option("--manifest", manifest_path, "manifest JSON produced by a run")->required();

    // nash solve / nash gap
    auto* nash = app.add_subcommand("nash", "direct access to the tensor solver");
    auto* nash_solve = nash->add_subcommand("solve", "solve the N-player system and export the t0 slices");
    auto* nash_gap_cmd = nash->add_subcommand("gap", "gap sweep with an epsilon schedule");
    int n_players = 2, grid_m = 32, steps = 0;
    double eps = 0.2, horizon = 0.5, schedule_beta = 0.0;
    nash_solve->add_option("--n", n_players, "player count")->capture_default_str();
    nash_solve->add_option("--eps", eps, "mollifier scale")->capture_default_str();
    nash_solve->add_option("--grid", grid_m, "points per axis")->capture_default_str();
    nash_solve->add_option("--steps", steps, "time steps (0 = CFL-derived)")->capture_default_str();
    nash_solve->add_option("--horizon", horizon, "terminal time")->capture_default_str();
    nash_gap_cmd->add_option("--schedule", schedule_beta, "epsilon schedule exponent beta")->capture_default_str();
    nash_gap_cmd->add_option("--eps", eps, "fixed epsilon when no schedule")->capture_default_str();
    nash_gap_cmd->add_option("--grid", grid_m, "points per axis")->capture_default_str();

    // particles run
    auto* particles = app.add_subcommand("particles", "Euler-Maruyama particle systems");
    auto* particles_run = particles->add_subcommand("run", "simulate one drift family");
    std::string drift_kind = "mfg-local";
    int pn = 4, preplicas = 32;
    bool dump_paths = false;
    particles_run->add_option("--drift", drift_kind, "nash | master | mfg-eps | mfg-local")->capture_default_str();
    particles_run->add_option("--n", pn, "players")->capture_default_str();
    particles_run->add_option("--k", preplicas, "replicas")->capture_default_str();
    particles_run->add_option("--eps", eps, "mollifier scale for nash/master/mfg-eps")->capture_default_str();
    particles_run->add_flag("--dump-paths", dump_paths, "write the full path array next to the summary");

    CLI11_PARSE(app, argc, argv);

    try {
        if (probe->parsed()) return finish(run(make_config("assumption-probes", "probes", config_path, seed), out_dir, workers));
        if (sweep_eps->parsed()) return finish(run(make_config("epsilon-stability", "epsilon", config_path, seed), out_dir, workers));
        if (sweep_nash->parsed()) return finish(run(make_config("nash-gap", "nash", config_path, seed), out_dir, workers));
        if (chaos_cmd->parsed()) return finish(run(make_config("chaos", "chaos", config_path, seed), out_dir, workers));
        if (deriv->parsed()) return finish(run(make_config("derivative-check", "derivative", config_path, seed), out_dir, workers));

        if (report->parsed()) {
            std::ifstream in(manifest_path);
            if (!in) throw std::runtime_error("cannot open manifest " + manifest_path);
            const nlohmann::json m = nlohmann::json::parse(in);
            std::printf("run %s  hash %s\n", m["config"].value("name", "?").c_str(),
                        m["config_hash"].dump().c_str());
            std::printf("rows %s, failed cells %s, failed asserts %s, elapsed %.1fs\n",
                        m["rows"].dump().c_str(), m["failed_cells"].dump().c_str(),
                        m.value("failed_asserts", 0) ? std::to_string(m["failed_asserts"].get<int>()).c_str() : "0",
                        m.value("elapsed_seconds", 0.0));
            if (m.contains("summary")) std::printf("summary: %s\n", m["summary"].dump(2).c_str());
            for (const auto& a : m.value("asserts", nlohmann::json::array()))
                std::printf("assert %s: %s\n", a.value("key", "?").c_str(), a.value("status", "?").c_str());
            const int bad = m.value("failed_cells", 0) + m.value("failed_asserts", 0);
            return bad > 0 ? 1 : 0;
        }

        if (nash_solve->parsed()) {
            const ProblemSpec spec = default_problem();
            NashOptions opt;
            opt.horizon = horizon;
            opt.steps = steps;
            const auto sol = solve_nash(spec, n_players, eps, grid_m, opt);
            std::filesystem::create_directories(out_dir);
            for (int i = 0; i < n_players; ++i) {
                ScalarField f(sol.tensor);
                f.values = sol.v_t0[i];
                write_field(f, out_dir + "/nash_v" + std::to_string(i) + "_t0.bin");
            }
            std::printf("solved N=%d M=%d steps=%d, max-principle slack %.2e\n", n_players, grid_m,
                        sol.time.steps, sol.max_principle_slack);
            return 0;
        }
        if (nash_gap_cmd->parsed()) {
            nlohmann::json j;
            if (!config_path.empty()) {
                std::ifstream in(config_path);
                j = nlohmann::json::parse(in);
            }
            j["kind"] = "nash-gap";
            if (!j.contains("name")) j["name"] = "nash-gap";
            if (schedule_beta > 0.0) j["sweep"]["schedule_beta"] = schedule_beta;
            else j["sweep"]["epsilon"] = eps;
            j["grid"]["m"] = grid_m;
            return finish(run(ExperimentConfig::from_json(j), out_dir, workers));
        }

        if (particles_run->parsed()) {
            const ProblemSpec spec = default_problem();
            std::filesystem::create_directories(out_dir);
            TorusGrid gref(1, 128);
            TimeGrid tref(0.0, 0.5, 256);
            MFGOptions mopt;
            mopt.tol = 1e-9;
            const MFGSolution local = solve_mfg(spec, gref, tref, cos_density(gref), CouplingKind::Local, 0.0, mopt);

            DriftSpec drift;
            NashSolution nash_sol;          // kept alive for the drift closure
            MFGSolution eps_sol;
            MasterProjector* proj = nullptr;
            std::unique_ptr<MasterProjector> proj_owner;
            TimeGrid sim_time(0.0, 0.5, 64);
            if (drift_kind == "mfg-local") {
                drift = drift_from_value_field(spec.hamiltonian, local.u, DriftKind::MfgLocal, "mfg-local");
            } else if (drift_kind == "mfg-eps") {
                eps_sol = solve_mfg(spec, gref, tref, cos_density(gref), CouplingKind::Mollified, eps, mopt);
                drift = drift_from_value_field(spec.hamiltonian, eps_sol.u, DriftKind::MfgMollified, "mfg-eps");
            } else if (drift_kind == "nash") {
                NashOptions nopt;
                nopt.horizon = 0.5;
                nopt.store_history = true;
                nash_sol = solve_nash(spec, pn, eps, 16, nopt);
                sim_time = nash_sol.time;
                drift = drift_from_nash(nash_sol);
            } else if (drift_kind == "master") {
                proj_owner = std::make_unique<MasterProjector>(spec, eps, 0.5, 64, 64,
                                                               std::max(2.0 / 64, eps / 2), mopt);
                proj = proj_owner.get();
                drift = drift_from_projector(*proj, spec.hamiltonian);
            } else {
                throw std::runtime_error("unknown drift kind " + drift_kind);
            }

            TorusGrid g1(1, 128);
            SimSeeds seeds{seed ? seed : 11, (seed ? seed : 11) + 1, {}};
            const auto e = simulate(drift, cos_density(g1), pn, preplicas, sim_time, seeds);
            const auto rep = chaos_metrics(e, local.m);

            CsvRow header{"time", "w1_to_reference"};
            std::vector<CsvRow> rows;
            for (int k = 0; k <= sim_time.steps; ++k)
                rows.push_back({format_g17(sim_time.node(k)), format_g17(rep.w1_curve[k])});
            write_csv(out_dir + "/particles_" + drift_kind + ".csv", header, rows);
            if (dump_paths) {
                std::ofstream dump(out_dir + "/particles_" + drift_kind + "_paths.bin", std::ios::binary);
                dump.write(reinterpret_cast<const char*>(e.pos.data()),
                           static_cast<std::streamsize>(e.pos.size() * sizeof(double)));
            }
            std::printf("drift %s: endpoint W1 %.4g, mean pair correlation %.4f (sigma %.3f)\n",
                        drift_kind.c_str(), rep.endpoint_w1, rep.mean_pair_correlation,
                        rep.correlation_sigma);
            if (proj) std::printf("projector solves: %zu\n", proj->solves());
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
