#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "matchq/config.hpp"
#include "matchq/error.hpp"
#include "matchq/experiments.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kRunError = 1;
constexpr int kConfigError = 2;

fs::path output_root() {
    if (const char* env = std::getenv("MATCHQ_OUTPUT_ROOT"); env && *env) return env;
    return "matchq-out";
}

int report_schema(const matchq::SchemaError& e) {
    std::cerr << e.what() << "\n";
    return kConfigError;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulation and heavy-traffic limit toolkit for K-component matching queues"};
    app.set_version_flag("--version", std::string(matchq::kToolVersion));
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> reps;
    std::optional<unsigned> threads;
    std::string out;

    auto* run = app.add_subcommand("run", "Run the experiment described by a config file");
    run->add_option("config", config_path, "Path to the JSON config")->required()->check(CLI::ExistingFile);
    run->add_option("--seed", seed, "Override the master seed");
    run->add_option("--reps", reps, "Override the replication count");
    run->add_option("--threads", threads, "Worker threads (0 = all cores)");
    run->add_option("--out", out, "Artifact directory (default: $MATCHQ_OUTPUT_ROOT/<kind>-<hash>)");

    std::string validate_path;
    auto* validate = app.add_subcommand("validate", "Check a config file against the schema");
    validate->add_option("config", validate_path, "Path to the JSON config")->required();

    std::string artifact, figure;
    auto* emit = app.add_subcommand("emit-plot", "Write tidy plot data for one figure from an artifact");
    emit->add_option("artifact", artifact, "Artifact directory")->required();
    emit->add_option("figure", figure, "fig2, fig3, fig4 or table1")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    if (*validate) {
        try {
            const auto c = matchq::load_config(validate_path);
            std::cout << "ok: " << matchq::kind_name(c.kind) << ", " << c.reps << " replications, seed "
                      << c.master_seed << "\n";
            return kOk;
        } catch (const matchq::SchemaError& e) {
            return report_schema(e);
        }
    }

    if (*run) {
        matchq::RunConfig c;
        try {
            c = matchq::load_config(config_path);
            if (seed) c.master_seed = *seed;
            if (reps) c.reps = *reps;
            if (threads) c.threads = *threads;
            matchq::validate_config(c);
        } catch (const matchq::SchemaError& e) {
            return report_schema(e);
        }
        fs::path dir = !out.empty() ? fs::path(out)
                       : !c.output.empty() ? fs::path(c.output)
                                           : output_root() / matchq::default_artifact_name(c);
        try {
            const auto art = matchq::run(c, dir);
            std::cout << "wrote " << art.dir.string() << " (";
            for (std::size_t k = 0; k < art.data_files.size(); ++k) std::cout << (k ? ", " : "") << art.data_files[k];
            std::cout << ")\n";
            return kOk;
        } catch (const std::exception& e) {
            std::cerr << "run failed: " << e.what() << "\n";
            return kRunError;
        }
    }

    try {
        const auto file = matchq::emit_plot_data(artifact, figure);
        std::cout << "wrote " << file.string() << "\n";
        return kOk;
    } catch (const std::exception& e) {
        std::cerr << "emit-plot failed: " << e.what() << "\n";
        return kRunError;
    }
}
