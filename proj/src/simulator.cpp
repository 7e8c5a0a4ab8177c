#include "matchq/simulator.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>

#include "matchq/error.hpp"

namespace matchq {

QueueState QueueState::initial(const SystemParams& p, bool initial_patient) {
    QueueState s;
    s.queues.resize(p.K);
    s.patient_prefix.assign(p.K, 0);
    for (std::size_t i = 0; i < p.K; ++i) {
        for (std::uint64_t k = 1; k <= p.q0[i]; ++k)
            s.queues[i].push_back(ComponentRecord{i, k, 0.0, initial_patient});
        if (initial_patient) s.patient_prefix[i] = static_cast<std::size_t>(p.q0[i]);
    }
    return s;
}

bool QueueState::all_nonempty_except(std::size_t i) const {
    for (std::size_t j = 0; j < queues.size(); ++j)
        if (j != i && queues[j].empty()) return false;
    return true;
}

double total_rate(const QueueState& state, const SystemParams& params, bool arrivals_enabled) {
    double rate = 0.0;
    for (std::size_t i = 0; i < params.K; ++i) {
        if (arrivals_enabled) rate += params.lambda[i];
        rate += static_cast<double>(state.mortal(i)) * params.delta[i];
    }
    return rate;
}

std::optional<SampledEvent> next_event_sampler(const QueueState& state, const SystemParams& params,
                                               Rng& rng, bool arrivals_enabled) {
    const double rate = total_rate(state, params, arrivals_enabled);
    if (!(rate > 0.0)) return std::nullopt;

    SampledEvent ev;
    ev.holding_time = std::exponential_distribution<double>(rate)(rng);

    // Buckets 0..K-1 are arrivals, K..2K-1 abandonments. Rounding can push u
    // past the last bucket; it then falls into the last bucket with positive rate.
    const std::size_t K = params.K;
    auto bucket_rate = [&](std::size_t b) {
        if (b < K) return arrivals_enabled ? params.lambda[b] : 0.0;
        return static_cast<double>(state.mortal(b - K)) * params.delta[b - K];
    };
    double u = std::uniform_real_distribution<double>(0.0, rate)(rng);
    std::size_t chosen = 2 * K;
    for (std::size_t b = 0; b < 2 * K; ++b) {
        const double r = bucket_rate(b);
        if (r <= 0.0) continue;
        chosen = b;
        if (u < r) break;
        u -= r;
    }

    if (chosen < K) {
        ev.kind = EventKind::Arrival;
        ev.category = chosen;
        return ev;
    }
    const std::size_t i = chosen - K;
    ev.kind = EventKind::Abandonment;
    ev.category = i;
    ev.position = state.patient_prefix[i] +
                  std::uniform_int_distribution<std::size_t>(0, state.mortal(i) - 1)(rng);
    return ev;
}

namespace {

class InvariantTracker {
public:
    explicit InvariantTracker(const std::vector<std::uint64_t>& q0)
        : q0_(q0), arrivals_(q0.size(), 0), abandonments_(q0.size(), 0) {}

    void apply(const Event& e) {
        switch (e.kind) {
            case EventKind::Arrival: ++arrivals_[e.category]; break;
            case EventKind::Abandonment: ++abandonments_[e.category]; break;
            case EventKind::Match:
                ++arrivals_[e.category];
                ++matches_;
                break;
        }
        check(e.time);
    }

    void check(double t) const {
        std::int64_t net_min = std::numeric_limits<std::int64_t>::max();
        std::int64_t q_min = std::numeric_limits<std::int64_t>::max();
        for (std::size_t i = 0; i < q0_.size(); ++i) {
            const auto net = static_cast<std::int64_t>(q0_[i] + arrivals_[i]) -
                             static_cast<std::int64_t>(abandonments_[i]);
            const auto q = net - static_cast<std::int64_t>(matches_);
            net_min = std::min(net_min, net);
            q_min = std::min(q_min, q);
            if (q < 0) fail(t, "negative queue length");
        }
        if (q_min != 0) fail(t, "no empty queue");
        if (net_min != static_cast<std::int64_t>(matches_)) fail(t, "R != min_j(q0 + A - G)");
    }

private:
    [[noreturn]] static void fail(double t, const char* what) {
        std::ostringstream os;
        os << "event log invariant violated at t=" << t << ": " << what;
        throw InvariantViolation(os.str());
    }

    const std::vector<std::uint64_t>& q0_;
    std::vector<std::uint64_t> arrivals_;
    std::vector<std::uint64_t> abandonments_;
    std::uint64_t matches_ = 0;
};

}  // namespace

EventLog simulate(const SystemParams& params, double horizon, RngSeed seed, const SimOptions& opts) {
    params.validate();
    if (!(horizon > 0.0)) throw ArgumentError("simulation horizon must be positive");

    EventLog log;
    log.K = params.K;
    log.q0 = params.q0;
    log.horizon = horizon;
    log.seed = seed;
    log.initial_patient = opts.initial_patient;

    QueueState state = QueueState::initial(params, opts.initial_patient);
    std::vector<std::uint64_t> next_index(params.q0.begin(), params.q0.end());
    InvariantTracker tracker(log.q0);
    if (opts.check_invariants) tracker.check(0.0);

    Rng rng = make_rng(seed);
    double t = 0.0;
    while (true) {
        auto ev = next_event_sampler(state, params, rng, opts.arrivals_enabled);
        if (!ev) break;
        t += ev->holding_time;
        if (t > horizon) break;

        const std::size_t i = ev->category;
        Event rec;
        rec.time = t;
        rec.category = i;
        if (ev->kind == EventKind::Arrival) {
            const std::uint64_t index = ++next_index[i];
            rec.arrival_index = index;
            rec.arrival_time = t;
            if (state.all_nonempty_except(i)) {
                if (!state.queues[i].empty())
                    throw InvariantViolation("arrival found every queue nonempty");
                for (std::size_t j = 0; j < params.K; ++j) {
                    if (j == i) continue;
                    state.queues[j].pop_front();
                    if (state.patient_prefix[j] > 0) --state.patient_prefix[j];
                }
                rec.kind = EventKind::Match;
            } else {
                state.queues[i].push_back(ComponentRecord{i, index, t, false});
                rec.kind = EventKind::Arrival;
            }
        } else {
            auto& q = state.queues[i];
            const auto it = q.begin() + static_cast<std::ptrdiff_t>(ev->position);
            rec.kind = EventKind::Abandonment;
            rec.arrival_index = it->arrival_index;
            rec.arrival_time = it->arrival_time;
            q.erase(it);
        }
        log.events.push_back(rec);
        if (opts.check_invariants) tracker.apply(rec);
    }
    return log;
}

Counters EventLog::counters_at(double t) const {
    Counters c;
    c.arrivals.assign(K, 0);
    c.abandonments.assign(K, 0);
    for (const auto& e : events) {
        if (e.time > t) break;
        switch (e.kind) {
            case EventKind::Arrival: ++c.arrivals[e.category]; break;
            case EventKind::Abandonment: ++c.abandonments[e.category]; break;
            case EventKind::Match:
                ++c.arrivals[e.category];
                ++c.matches;
                break;
        }
    }
    return c;
}

std::vector<std::int64_t> EventLog::queue_lengths_at(double t) const {
    const Counters c = counters_at(t);
    std::vector<std::int64_t> q(K);
    for (std::size_t i = 0; i < K; ++i)
        q[i] = static_cast<std::int64_t>(q0[i] + c.arrivals[i]) -
               static_cast<std::int64_t>(c.abandonments[i] + c.matches);
    return q;
}

std::int64_t recompute_R(const EventLog& log, const std::vector<std::uint64_t>& q0, double t) {
    if (q0.size() != log.K) throw ArgumentError("q0 size does not match the log's K");
    if (t > log.horizon) throw ArgumentError("t lies beyond the log horizon");
    const Counters c = log.counters_at(t);
    std::int64_t r = std::numeric_limits<std::int64_t>::max();
    for (std::size_t j = 0; j < log.K; ++j)
        r = std::min(r, static_cast<std::int64_t>(q0[j] + c.arrivals[j]) -
                            static_cast<std::int64_t>(c.abandonments[j]));
    return r;
}

void verify_log(const EventLog& log) {
    InvariantTracker tracker(log.q0);
    tracker.check(0.0);
    double last = -1.0;
    for (const auto& e : log.events) {
        if (!(e.time > last)) throw InvariantViolation("event times are not strictly increasing");
        last = e.time;
        tracker.apply(e);
    }
}

namespace {
const char* kind_name(EventKind k) {
    switch (k) {
        case EventKind::Arrival: return "arrival";
        case EventKind::Abandonment: return "abandonment";
        case EventKind::Match: return "match";
    }
    return "?";
}
}  // namespace

void write_event_csv(std::ostream& os, const EventLog& log) {
    os << "# seed=" << log.seed << " K=" << log.K << " horizon=" << log.horizon << "\n";
    os << "time,kind,category,arrival_index,arrival_time\n";
    char buf[160];
    for (const auto& e : log.events) {
        std::snprintf(buf, sizeof buf, "%.17g,%s,%zu,%llu,%.17g\n", e.time, kind_name(e.kind),
                      e.category + 1, static_cast<unsigned long long>(e.arrival_index),
                      e.arrival_time);
        os << buf;
    }
}

}  // namespace matchq
