#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <iosfwd>
#include <optional>
#include <vector>

#include "matchq/params.hpp"
#include "matchq/rng.hpp"

namespace matchq {

/// One component waiting in its category's queue.
struct ComponentRecord {
    std::size_t category = 0;
    std::uint64_t arrival_index = 0;  // k-th component to enter this category (initial ones are 1..q0)
    double arrival_time = 0.0;
    bool patient = false;             // never abandons (initial components by default)
};

/// Per-category FIFO queues; the head is the oldest component.
/// Patient components always form a prefix of their queue.
struct QueueState {
    std::vector<std::deque<ComponentRecord>> queues;
    std::vector<std::size_t> patient_prefix;

    static QueueState initial(const SystemParams& p, bool initial_patient);

    std::size_t K() const { return queues.size(); }
    std::size_t length(std::size_t i) const { return queues[i].size(); }
    std::size_t mortal(std::size_t i) const { return queues[i].size() - patient_prefix[i]; }
    bool all_nonempty_except(std::size_t i) const;
};

enum class EventKind : std::uint8_t { Arrival, Abandonment, Match };

/// A Match is always caused by an arrival that finds every other queue
/// nonempty; `category` is that arrival's category and the arrival counts
/// towards A_category. The match removes the head of every queue.
struct Event {
    double time = 0.0;
    EventKind kind = EventKind::Arrival;
    std::size_t category = 0;
    std::uint64_t arrival_index = 0;  // component entering (Arrival/Match) or leaving (Abandonment)
    double arrival_time = 0.0;        // Abandonment: when the leaving component arrived
};

/// Cumulative counters A_i(t), G_i(t), R(t).
struct Counters {
    std::vector<std::uint64_t> arrivals;
    std::vector<std::uint64_t> abandonments;
    std::uint64_t matches = 0;
};

/// Time-ordered record of one simulated trajectory on [0, horizon].
struct EventLog {
    std::size_t K = 0;
    std::vector<std::uint64_t> q0;
    double horizon = 0.0;
    RngSeed seed = 0;
    bool initial_patient = true;
    std::vector<Event> events;

    /// Counters including every event with time <= t.
    Counters counters_at(double t) const;
    std::uint64_t match_count(double t) const { return counters_at(t).matches; }
    /// Queue lengths q0 + A - G - R at time t.
    std::vector<std::int64_t> queue_lengths_at(double t) const;
};

struct SimOptions {
    /// Initial components never abandon (default). false makes them mortal.
    bool initial_patient = true;
    /// Test hook: suppress the arrival streams entirely.
    bool arrivals_enabled = true;
    /// Verify state-space and conservation invariants after every event.
    bool check_invariants = true;
};

/// Outcome of one draw of the aggregate-rate sampler.
struct SampledEvent {
    double holding_time = 0.0;
    EventKind kind = EventKind::Arrival;  // Arrival means "arrival to `category`"; matching decided by the state
    std::size_t category = 0;
    std::size_t position = 0;             // Abandonment: index within the queue of the leaving component
};

/// Draws the next transition from `state`. Returns nullopt when the total
/// rate is zero (no event can ever occur).
std::optional<SampledEvent> next_event_sampler(const QueueState& state, const SystemParams& params,
                                               Rng& rng, bool arrivals_enabled = true);

/// Total event rate sum_i lambda_i + sum_i mortal_i delta_i.
double total_rate(const QueueState& state, const SystemParams& params, bool arrivals_enabled = true);

/// Exact simulation of the pre-limit system on [0, horizon]. Deterministic in (params, horizon, seed).
EventLog simulate(const SystemParams& params, double horizon, RngSeed seed, const SimOptions& opts = {});

/// min_j { q0_j + A_j(t) - G_j(t) }.
std::int64_t recompute_R(const EventLog& log, const std::vector<std::uint64_t>& q0, double t);

/// Walks the log checking min_i Q_i = 0, Q = q0 + A - G - R >= 0 and
/// R = min_j(q0_j + A_j - G_j) after every event. Throws InvariantViolation.
void verify_log(const EventLog& log);

/// Columnar CSV: time,kind,category,arrival_index,arrival_time (categories 1-based).
void write_event_csv(std::ostream& os, const EventLog& log);

}  // namespace matchq
