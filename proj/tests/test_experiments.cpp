#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "matchq/config.hpp"
#include "matchq/error.hpp"
#include "matchq/experiments.hpp"

using namespace matchq;
namespace fs = std::filesystem;

namespace {
fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("matchq-test-" + name);
    fs::remove_all(p);
    return p;
}

std::vector<std::string> lines(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

std::map<std::string, std::string> manifest(const fs::path& dir) {
    std::map<std::string, std::string> kv;
    for (const auto& l : lines(dir / "manifest.txt")) {
        const auto eq = l.find(" = ");
        if (eq != std::string::npos) kv[l.substr(0, eq)] = l.substr(eq + 3);
    }
    return kv;
}

std::vector<std::string> violations(std::string_view text) {
    try {
        parse_config(text);
    } catch (const SchemaError& e) {
        return e.violations();
    }
    return {};
}

bool mentions(const std::vector<std::string>& v, const std::string& what) {
    for (const auto& s : v)
        if (s.find(what) != std::string::npos) return true;
    return false;
}
}  // namespace

TEST_CASE("kind names round-trip") {
    for (auto k : {ExperimentKind::Fig2MatchingVsK, ExperimentKind::Fig3Abandonment, ExperimentKind::Fig4PathsVsK,
                   ExperimentKind::Fig5Table1Stickiness, ExperimentKind::LittlesLaw, ExperimentKind::CostConvergence,
                   ExperimentKind::OracleValidation, ExperimentKind::Custom})
        CHECK(kind_from_name(kind_name(k)) == k);
    CHECK_FALSE(kind_from_name("fig9"));
}

TEST_CASE("defaults follow the experiment") {
    const auto c = parse_config(R"({"experiment": "fig2_matching_vs_K"})");
    CHECK(c.reps == 50);
    CHECK(c.sweep.K_list == std::vector<std::size_t>{2, 3, 4, 5, 20, 80, 500});
    CHECK(c.N == 250);
    CHECK(c.T == 1.0);
    CHECK(c.sweep.sigma == 2.0);
    const auto t = parse_config(R"({"experiment": "fig5_table1_stickiness", "seed": 9})");
    CHECK(t.reps == 100);
    CHECK(t.master_seed == 9);
    CHECK(t.table.betas == std::vector<double>{-4, -3, -2, 1, 2, 4, 5});
    const auto o = parse_config(R"({"experiment": "oracle_validation", "system": {"lambda": [3, 3], "delta": [1, 1]}})");
    CHECK(o.oracle->cap == 30);
    CHECK(o.oracle->system.q0 == std::vector<std::uint64_t>{0, 0});
    const auto k = parse_config(
        R"({"experiment": "cost_convergence", "family": {"lambda0": 1, "beta": [0, 0], "delta": [1, 1], "x": [0, 0], "n": [25]}})");
    CHECK(k.cost.gamma == 13.0);
    CHECK(k.cost.penalty.size() == 2);
}

TEST_CASE("schema errors are collected together") {
    CHECK(mentions(violations(R"({"experiment": "custom", "reps": 0, "limit": {"x": [0, 1], "beta": [0, 0], "sigma": [1, 1], "delta": [1, 1]}})"),
                   "reps: must be at least 1"));
    const auto v = violations(R"({"experiment": "fig2_matching_vs_K", "bogus": 1, "grid": {"N": -3, "dt": 1}})");
    CHECK(mentions(v, "bogus: unknown key"));
    CHECK(mentions(v, "grid.dt: unknown key"));
    CHECK(mentions(v, "grid.N: expected a nonnegative integer"));
    CHECK(mentions(violations(R"({"experiment": "fig7"})"), "unknown kind"));
    CHECK(mentions(violations(R"({"reps": 3})"), "experiment: required"));
    CHECK(mentions(violations("not json"), "not valid JSON"));
    CHECK(mentions(violations(R"({"experiment": "littles_law"})"), "family: required"));
    CHECK(mentions(violations(R"({"experiment": "custom"})"), "custom: needs"));
    CHECK(mentions(violations(R"({"experiment": "fig2_matching_vs_K", "table1": {}})"), "table1: only used"));
    CHECK(mentions(violations(R"({"experiment": "custom", "limit": {"x": [1, 1], "beta": [0, 0], "sigma": [1, 1], "delta": [1, 1]}})"),
                   "limit: "));
    CHECK(mentions(violations(R"({"experiment": "oracle_validation", "system": {"lambda": [3, 3], "delta": [1, 1]}, "oracle": {"cap": 30, "cap_check": 20}})"),
                   "cap_check"));
}

TEST_CASE("canonical form ignores threads and output but not the seed") {
    auto a = parse_config(R"({"experiment": "fig4_paths_vs_K", "threads": 4, "output": "x"})");
    auto b = parse_config(R"({"output": "y", "experiment": "fig4_paths_vs_K"})");
    CHECK(canonical_json(a) == canonical_json(b));
    b.master_seed = 2;
    CHECK(canonical_json(a) != canonical_json(b));
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(default_artifact_name(a).rfind("fig4_paths_vs_K-", 0) == 0);
}

TEST_CASE("sweep draws are nested across K and pin x_1 to zero") {
    SweepSpec s;
    const auto big = draw_sweep_params(s, 20, 5);
    const auto small = draw_sweep_params(s, 3, 5);
    CHECK(big.x[0] == 0.0);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(small.x[i] == big.x[i]);
        CHECK(small.beta[i] == big.beta[i]);
        CHECK(small.delta[i] == big.delta[i]);
    }
    for (std::size_t i = 0; i < 20; ++i) {
        CHECK(big.x[i] <= 0.02);
        CHECK(big.beta[i] >= -0.3);
        CHECK(big.beta[i] <= 0.1);
        CHECK(big.delta[i] >= 0.01);
        CHECK(big.delta[i] <= 1.0);
        CHECK(big.sigma[i] == 2.0);
    }
}

TEST_CASE("fig2 artifact and plot data") {
    auto c = parse_config(R"({"experiment": "fig2_matching_vs_K", "reps": 4, "grid": {"N": 50}, "sweep": {"K": [2, 3, 7]}})");
    const auto dir = scratch("fig2");
    const auto art = run(c, dir);
    CHECK(art.complete);
    const auto m = manifest(dir);
    CHECK(m.at("status") == "complete");
    CHECK(m.at("seed") == "1");
    CHECK(m.at("config_hash").rfind("fnv1a64:", 0) == 0);
    CHECK(m.at("data_files") == "parameters.csv,sweep.csv,terminal.csv");
    CHECK(fs::exists(dir / "summary.txt"));

    const auto plot = emit_plot_data(dir, "fig2");
    const auto rows = lines(plot);
    CHECK(rows.front() == "t,K,R_mean");
    CHECK(rows.size() == 1 + 3 * 51);
    CHECK(rows[1] == "0,2,0");  // R(0) = 0
    CHECK(lines(emit_plot_data(dir, "fig3")).front() == "t,K,G1_mean");
    CHECK_THROWS_AS(emit_plot_data(dir, "fig9"), ArgumentError);
    CHECK_THROWS_AS(emit_plot_data(dir, "fig4"), ArgumentError);  // no paths in this artifact
    fs::remove_all(dir);
}

TEST_CASE("fig4 plot data keeps the coupling") {
    auto c = parse_config(R"({"experiment": "fig4_paths_vs_K", "grid": {"N": 40}})");
    const auto dir = scratch("fig4");
    run(c, dir);
    const auto rows = lines(emit_plot_data(dir, "fig4"));
    CHECK(rows.front() == "t,K,category,X");
    std::map<std::pair<std::string, std::string>, double> mins;
    for (std::size_t k = 1; k < rows.size(); ++k) {
        std::stringstream ss(rows[k]);
        std::string t, K, cat, x;
        std::getline(ss, t, ',');
        std::getline(ss, K, ',');
        std::getline(ss, cat, ',');
        std::getline(ss, x, ',');
        auto key = std::make_pair(t, K);
        const double v = std::stod(x);
        mins[key] = mins.count(key) ? std::min(mins[key], v) : v;
    }
    CHECK(mins.size() == 41 * 4);
    for (const auto& [key, v] : mins) CHECK(std::abs(v) <= 1e-8);
    fs::remove_all(dir);
}

TEST_CASE("table1 plot data has one row per drift value") {
    auto c = parse_config(R"({"experiment": "fig5_table1_stickiness", "reps": 3, "grid": {"N": 50}})");
    const auto dir = scratch("table1");
    run(c, dir);
    const auto rows = lines(emit_plot_data(dir, "table1"));
    CHECK(rows.front() == "category,beta,proportion,stderr");
    CHECK(rows.size() == 1 + 4 * 7);
    fs::remove_all(dir);
}

TEST_CASE("failed runs leave an incomplete manifest") {
    auto c = parse_config(R"({"experiment": "oracle_validation", "reps": 10, "system": {"lambda": [3, 3], "delta": [1, 1], "q0": [40, 0]}})");
    const auto dir = scratch("broken");
    CHECK_THROWS(run(c, dir));
    CHECK(manifest(dir).at("status") == "incomplete");
    CHECK(manifest(dir).count("error") == 1);
    CHECK_THROWS_AS(emit_plot_data(dir, "table1"), ArgumentError);
    fs::remove_all(dir);
}

TEST_CASE("oracle experiment at small scale") {
    auto c = parse_config(R"({"experiment": "oracle_validation", "reps": 4000, "system": {"lambda": [2, 1.5], "delta": [1, 0.5]}, "oracle": {"cap": 15, "cap_check": 20, "t": 0.5}})");
    const auto r = run_oracle(c);
    CHECK(r.truncation_gap < 1e-6);
    CHECK(r.tv < 0.05);
    CHECK(r.sim_mean[0] == doctest::Approx(r.oracle_mean[0]).epsilon(0.1));
}

TEST_CASE("custom experiment writes limit and pre-limit means") {
    auto c = parse_config(R"({"experiment": "custom", "reps": 3, "grid": {"N": 20, "T": 1.0},
        "limit": {"x": [0, 1], "beta": [0, 0], "sigma": [1, 1], "delta": [1, 1]},
        "family": {"lambda0": 1, "beta": [0, 0], "delta": [1, 1], "x": [0, 1], "n": [16]}})");
    const auto dir = scratch("custom");
    const auto art = run(c, dir);
    CHECK(art.data_files == std::vector<std::string>{"limit_mean.csv", "prelimit_mean.csv"});
    CHECK(lines(dir / "prelimit_mean.csv").size() == 1 + 21 * 2);
    fs::remove_all(dir);
}

#ifdef MATCHQ_CLI_PATH
TEST_CASE("command-line exit codes") {
    const auto dir = scratch("cli");
    fs::create_directories(dir);
    const std::string cli = MATCHQ_CLI_PATH;
    auto sh = [](const std::string& cmd) {
        const int rc = std::system((cmd + " >/dev/null 2>&1").c_str());
        return WEXITSTATUS(rc);
    };
    {
        std::ofstream(dir / "good.json") << R"({"experiment": "fig4_paths_vs_K", "grid": {"N": 10}})";
        std::ofstream(dir / "bad.json") << R"({"experiment": "custom", "reps": 0})";
    }
    CHECK(sh(cli + " validate " + (dir / "good.json").string()) == 0);
    CHECK(sh(cli + " validate " + (dir / "bad.json").string()) == 2);
    CHECK(sh(cli + " run " + (dir / "good.json").string() + " --out " + (dir / "art").string() + " --seed 3 --threads 2") == 0);
    CHECK(manifest(dir / "art").at("seed") == "3");
    CHECK(sh(cli + " emit-plot " + (dir / "art").string() + " fig4") == 0);
    CHECK(sh(cli + " emit-plot " + (dir / "art").string() + " nope") == 1);
    CHECK(sh(cli + " run " + (dir / "good.json").string() + " --reps 0") == 2);
    CHECK(sh("MATCHQ_OUTPUT_ROOT=" + (dir / "root").string() + " " + cli + " run " + (dir / "good.json").string()) == 0);
    CHECK(fs::exists(dir / "root"));
    CHECK(sh(cli + " frobnicate") == 2);
    fs::remove_all(dir);
}
#endif
