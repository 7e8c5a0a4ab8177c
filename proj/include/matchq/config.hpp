#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "matchq/diagnostics.hpp"
#include "matchq/params.hpp"
#include "matchq/rng.hpp"

namespace matchq {

enum class ExperimentKind {
    Fig2MatchingVsK,
    Fig3Abandonment,
    Fig4PathsVsK,
    Fig5Table1Stickiness,
    LittlesLaw,
    CostConvergence,
    OracleValidation,
    Custom,
};

std::string_view kind_name(ExperimentKind k);
std::optional<ExperimentKind> kind_from_name(std::string_view name);

/// Random parameter draws for the K sweeps. Drawn once for the largest K;
/// smaller K use the leading entries, and x_1 is pinned to 0 so every
/// prefix starts with an empty queue.
struct SweepSpec {
    std::vector<std::size_t> K_list;
    double sigma = 2.0;
    std::array<double, 2> x{0.0, 0.02};
    std::array<double, 2> beta{-0.3, 0.1};
    std::array<double, 2> delta{0.01, 1.0};
};

struct TableSpec {
    std::size_t K = 4;
    std::vector<double> betas{-4, -3, -2, 1, 2, 4, 5};
    double other_beta = 1.0;
    double sigma = 2.0;
    /// Threshold for "at zero"; 0 means the solver's coupling tolerance.
    double zero_tol = 0.0;
};

struct OracleSpec {
    SystemParams system;
    std::uint32_t cap = 30;
    std::uint32_t cap_check = 40;
    double t = 1.0;
};

struct RunConfig {
    ExperimentKind kind = ExperimentKind::Custom;
    RngSeed master_seed = 1;
    std::size_t reps = 1;
    std::size_t limit_paths = 0;  // 0: same as reps
    unsigned threads = 1;
    std::string output;           // empty: decided by the caller
    std::size_t N = 250;
    double T = 1.0;
    int precision = 10;

    std::optional<RegimeFamily> family;
    std::optional<LimitParams> limit;
    std::optional<OracleSpec> oracle;
    SweepSpec sweep;
    TableSpec table;
    CostSpec cost;
    std::size_t little_samples = 50;
};

/// Parses the JSON config format (schema in docs/config.md). Unknown keys,
/// wrong types, out-of-range values, blocks missing for the experiment and
/// blocks the experiment does not use are all reported together in one
/// SchemaError.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& file);

/// Re-validates a config after programmatic edits (CLI overrides).
void validate_config(const RunConfig& c);

/// Canonical JSON of the effective config (sorted keys) and its FNV-1a hash.
std::string canonical_json(const RunConfig& c);
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace matchq
