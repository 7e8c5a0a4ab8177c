#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "matchq/limit.hpp"
#include "matchq/params.hpp"
#include "matchq/scaling.hpp"
#include "matchq/simulator.hpp"

namespace matchq {

/// Virtual waiting times of an infinitely patient category-i marker placed at
/// each sample time behind the components already queued.
struct VirtualWaitSeries {
    std::size_t category = 0;
    std::vector<double> times;
    std::vector<double> wait;        // departure time - t, or horizon - t when censored
    std::vector<bool> censored;
    std::vector<std::int64_t> queue_at_sample;
    /// Samples where Q_i just before the marker's departure differs from the
    /// category-i arrivals after t that have not abandoned. Always 0 for a valid log.
    std::size_t balance_violations = 0;

    std::size_t uncensored() const;
};

VirtualWaitSeries virtual_wait_replay(const EventLog& log, std::size_t category,
                                      std::span<const double> sample_times);

/// Sample times on a uniform grid over the first `keep` fraction of the horizon.
std::vector<double> little_sample_times(double horizon, std::size_t count, double keep = 0.9);

struct LittleGap {
    double gap = 0.0;            // max_{i,t} |Qhat_i(t) - lambda0 Vhat_i(t)|
    double gap_rate = 0.0;       // same with lambda_i^n / n in place of lambda0
    std::size_t used = 0;
    std::size_t censored = 0;
};

/// `bundle` must be scaled on the same sample times as every series.
/// `lambda` (per-category pre-limit rates) feeds the alternate multiplier.
/// Throws UndefinedStatisticError if every sample is censored.
LittleGap littles_law_gap(const ScaledPathBundle& bundle, std::span<const VirtualWaitSeries> waits,
                          double lambda0, std::span<const double> lambda = {});

/// Discounted cost with holding cost C_j(x) = c_j x^power and abandonment penalty p_j.
struct CostSpec {
    double gamma = 1.0;
    std::vector<double> penalty;      // p_j > 0
    std::vector<double> holding;      // c_j >= 0
    double power = 1.0;               // >= 1
    double T_max = 1.0;               // truncation of the infinite horizon
    double growth_level = 1.0;        // l in gamma > 2 l c0 (1 + K)

    void validate(std::size_t K) const;
    double holding_cost(std::size_t j, double x) const;
    /// gamma > 2 l c0 (1 + K); c0 bounds the patience rates.
    bool feasible(std::size_t K, double c0) const;
};

/// sum_j [ int_0^Tmax e^{-gamma s} C_j(Qhat_j) ds + sum_{abandonments u <= Tmax} p_j e^{-gamma u} / sqrt(n) ],
/// both terms exact for the step path. Requires log.horizon >= T_max.
double cost_prelimit(const EventLog& log, std::uint64_t n, const CostSpec& spec);

/// sum_j int_0^Tmax e^{-gamma s} (C_j(X_j) + p_j delta_j X_j) ds, integrand linear
/// between grid points, exponential weight integrated exactly.
double cost_limit(const LimitPath& path, const LimitParams& p, const CostSpec& spec);

/// Bound on the neglected tail int_Tmax^inf e^{-gamma s} B (1 + s) ds given an
/// envelope B on the expected integrand.
double cost_tail_bound(const CostSpec& spec, double envelope);

}  // namespace matchq
