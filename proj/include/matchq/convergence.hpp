#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "matchq/diagnostics.hpp"
#include "matchq/params.hpp"
#include "matchq/rng.hpp"
#include "matchq/stats.hpp"

namespace matchq {

struct StudyOptions {
    std::size_t reps = 200;          // pre-limit replications per n
    std::size_t limit_paths = 200;   // limit paths
    double T = 1.0;                  // time of the terminal marginals
    std::size_t steps_per_unit = 250;
    RngSeed master_seed = 1;
    unsigned threads = 1;
    bool with_cost = true;
};

struct ConvergenceRow {
    std::uint64_t n = 0;
    RunningStats cost;
    std::vector<double> ks_terminal;     // per category, KS(Qhat_i^n(T), X_i(T))
    RunningStats sup_norm;               // sup_{t<=T} |Qhat^n(t)| on the limit grid
    RunningStats sup_norm_sq;
    std::vector<double> terminal_mean;   // per category mean of Qhat_i^n(T)
};

struct ConvergenceReport {
    std::vector<ConvergenceRow> rows;
    RunningStats limit_cost;
    RunningStats limit_sup_norm;
    std::vector<double> limit_terminal_mean;
    bool gamma_feasible = false;
    double tail_bound = 0.0;   // truncation bound for the largest envelope seen
    double head_value = 0.0;   // smallest mean cost seen, for the relative tail check
    std::size_t reps = 0;
    std::size_t limit_paths = 0;
};

/// Pre-limit vs limit comparison along the family: discounted cost,
/// terminal-marginal KS distances and sup-norm moments. Replication r of
/// system n uses seed derive_seed(master, n, r); limit path r uses
/// derive_seed(master, 0, r). Results do not depend on the thread count.
ConvergenceReport convergence_study(const RegimeFamily& f, const CostSpec& spec, const StudyOptions& opts);

struct LittleRow {
    std::uint64_t n = 0;
    RunningStats gap;        // lambda0 multiplier
    RunningStats gap_rate;   // lambda_i^n / n multiplier
    RunningStats vhat_second_moment;  // mean over samples of Vhat^2, uncensored only
    std::size_t censored = 0;
    std::size_t samples = 0;
    std::size_t balance_violations = 0;
};

/// Little's-law gap statistic along the family with `sample_count` sample
/// times on the first 90% of [0, T].
std::vector<LittleRow> littles_law_study(const RegimeFamily& f, const StudyOptions& opts,
                                         std::size_t sample_count = 50);

void write_convergence_csv(std::ostream& os, const ConvergenceReport& r);
void write_convergence_summary(std::ostream& os, const ConvergenceReport& r);
void write_little_csv(std::ostream& os, const std::vector<LittleRow>& rows);

}  // namespace matchq
