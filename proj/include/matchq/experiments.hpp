#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "matchq/config.hpp"
#include "matchq/convergence.hpp"
#include "matchq/limit.hpp"
#include "matchq/stats.hpp"

namespace matchq {

inline constexpr std::string_view kToolVersion = "0.1.0";

/// Limit coefficients for the first K categories of a sweep draw.
/// x, beta, delta come from the ranges in `s`; x_1 = 0.
LimitParams draw_sweep_params(const SweepSpec& s, std::size_t K, RngSeed master);

/// Noise seed of replication r in the sweeps and the drift table. Rows are
/// nested, so category i sees the same Brownian path for every K and beta.
RngSeed replication_seed(RngSeed master, std::size_t r);

struct SweepCell {
    std::size_t K = 0;
    std::vector<RunningStats> R;    // per grid point
    std::vector<RunningStats> G1;   // per grid point
    double worst_min_x = 0.0;       // max_j |min_i X_i(t_j)| over all replications
    double tolerance = 0.0;
    std::vector<LimitPath> kept;    // first `keep_paths` replications
};

struct SweepResult {
    std::vector<double> grid;
    LimitParams largest;            // draws for max K
    std::vector<SweepCell> cells;   // in K_list order
};

SweepResult run_sweep(const RunConfig& c, std::size_t keep_paths = 0);

struct TableRow {
    std::size_t category = 0;
    double beta = 0.0;
    RunningStats proportion;
    double single_path = 0.0;       // replication 0
};

struct TableResult {
    LimitParams base;               // beta filled with other_beta
    double zero_tol = 0.0;
    std::vector<TableRow> rows;     // category-major, betas in config order
    std::vector<double> spearman;   // per category, beta vs mean proportion
};

TableResult run_table1(const RunConfig& c);

struct OracleResult {
    std::vector<std::vector<std::uint32_t>> states;   // states of the cap-M space
    std::vector<double> empirical;
    std::vector<double> oracle;
    std::vector<double> oracle_check;                 // cap_check chain, same states
    double outside_mass = 0.0;      // empirical mass beyond cap M
    double tv = 0.0;                // empirical vs cap-M oracle
    double truncation_gap = 0.0;    // TV between the cap-M and cap_check oracles
    std::vector<double> sim_mean, oracle_mean;
};

OracleResult run_oracle(const RunConfig& c);

struct ResultArtifact {
    std::filesystem::path dir;
    std::vector<std::string> data_files;
    bool complete = false;
};

/// Runs the configured experiment into `out_dir` (created if needed): data
/// CSVs, summary.txt and manifest.txt. The manifest is written as incomplete
/// first and rewritten at the end; a failure leaves it incomplete and rethrows.
ResultArtifact run(const RunConfig& c, const std::filesystem::path& out_dir);

/// Tidy plot CSV for fig2, fig3, fig4 or table1 from a complete artifact.
/// Returns the written file (plot_<figure>.csv inside the artifact).
std::filesystem::path emit_plot_data(const std::filesystem::path& artifact_dir, std::string_view figure);

/// Default directory name for a config: <kind>-<first 8 hex of the config hash>.
std::string default_artifact_name(const RunConfig& c);

}  // namespace matchq
