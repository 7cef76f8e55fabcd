#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "mfglab/harness.hpp"
#include "mfglab/io.hpp"

using namespace mfglab;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("fit_rate: exact powers and noisy data") {
    std::vector<double> xs{0.5, 1.0, 2.0, 4.0};
    std::vector<double> lin, sqrtv;
    for (double x : xs) {
        lin.push_back(3.7 * x);
        sqrtv.push_back(2.0 * std::sqrt(x));
    }
    const auto f1 = fit_rate(xs, lin);
    CHECK(std::fabs(f1.slope - 1.0) <= 1e-12);
    CHECK(f1.r2 == doctest::Approx(1.0));
    const auto f2 = fit_rate(xs, sqrtv);
    CHECK(std::fabs(f2.slope - 0.5) <= 1e-12);

    SplitMix64 rng(404);
    std::vector<double> noisy;
    for (double x : xs) noisy.push_back(std::sqrt(x) * (1.0 + 0.05 * (rng.uniform() - 0.5)));
    const auto f3 = fit_rate(xs, noisy);
    CHECK(f3.slope >= 0.4);
    CHECK(f3.slope <= 0.6);
    CHECK(f3.r2 >= 0.9);

    CHECK_THROWS_AS((void)fit_rate({1.0, 2.0}, {1.0, 2.0}), std::invalid_argument);
    CHECK_THROWS_AS((void)fit_rate({1.0, -2.0, 3.0}, {1.0, 2.0, 3.0}), std::domain_error);
}

TEST_CASE("field serialization round trip with sidecar") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "mfglab_io_test";
    fs::create_directories(dir);
    const std::string path = (dir / "field.bin").string();

    TorusGrid g(1, 16);
    TimeGrid tg(0.1, 0.6, 5);
    ScalarField f(g, tg);
    SplitMix64 rng(55);
    for (auto& v : f.values) v = rng.uniform() - 0.5;
    write_field(f, path);
    const auto back = read_field(path);
    CHECK(back.grid.points_per_axis == 16);
    REQUIRE(back.time.has_value());
    CHECK(back.time->steps == 5);
    CHECK(back.values == f.values);

    // spatial-only variant
    ScalarField s(g);
    for (auto& v : s.values) v = rng.uniform();
    write_field(s, path + "2");
    const auto back2 = read_field(path + "2");
    CHECK_FALSE(back2.time.has_value());
    CHECK(back2.values == s.values);

    write_csv_slice(f, 2, (dir / "slice.csv").string());
    CHECK(fs::exists(dir / "slice.csv"));

    std::vector<std::vector<double>> atoms{{0.25}, {0.75}, {0.125}};
    write_atoms_csv(atoms, (dir / "atoms.csv").string());
    const auto atoms2 = read_atoms_csv((dir / "atoms.csv").string());
    CHECK(atoms2 == atoms);
    fs::remove_all(dir);
}

TEST_CASE("experiment config validation") {
    nlohmann::json ok{{"kind", "epsilon-stability"}, {"name", "t"}};
    CHECK_NOTHROW((void)ExperimentConfig::from_json(ok));

    nlohmann::json bad = ok;
    bad["kind"] = "mystery";
    CHECK_THROWS_AS((void)ExperimentConfig::from_json(bad), std::invalid_argument);

    nlohmann::json empty_sweep = ok;
    empty_sweep["sweep"]["epsilons"] = nlohmann::json::array();
    CHECK_THROWS_AS((void)ExperimentConfig::from_json(empty_sweep), std::invalid_argument);

    nlohmann::json bad_beta = ok;
    bad_beta["kind"] = "nash-gap";
    bad_beta["sweep"]["schedule_beta"] = 0.0;
    CHECK_THROWS_AS((void)ExperimentConfig::from_json(bad_beta), std::invalid_argument);

    // hash is stable under key reordering of the json text
    const auto a = ExperimentConfig::from_json(nlohmann::json::parse(R"({"kind":"chaos","name":"x"})"));
    const auto b = ExperimentConfig::from_json(nlohmann::json::parse(R"({"name":"x","kind":"chaos"})"));
    CHECK(a.hash() == b.hash());
}

TEST_CASE("run artifacts are deterministic and errors are isolated per cell") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "mfglab_run_test";
    fs::remove_all(dir);

    nlohmann::json j{{"kind", "derivative-check"}, {"name", "dcheck"}};
    j["grid"]["m"] = 32;
    j["grid"]["steps"] = 40;
    j["solver"]["tol"] = 1e-10;
    j["sweep"]["epsilon"] = 0.2;
    const auto cfg = ExperimentConfig::from_json(j);
    const auto art1 = run(cfg, (dir / "a").string());
    const auto art2 = run(cfg, (dir / "b").string());
    CHECK(slurp(art1.csv_path) == slurp(art2.csv_path));
    CHECK(art1.config_hash == art2.config_hash);

    // a failing Nash cell leaves an error row instead of aborting the sweep
    nlohmann::json nj{{"kind", "nash-gap"}, {"name", "toobig"}};
    nj["sweep"]["n_players"] = std::vector<int>{2, 6};
    nj["sweep"]["samples"] = 4;
    nj["grid"]["m"] = 32;
    const auto ncfg = ExperimentConfig::from_json(nj);
    const auto nart = run(ncfg, (dir / "c").string());
    CHECK(nart.failed_cells == 1);
    const std::string csv = slurp(nart.csv_path);
    CHECK(csv.find("memory") != std::string::npos);
    fs::remove_all(dir);
}
