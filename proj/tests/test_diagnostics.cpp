#include "doctest.h"

#include <cmath>

#include "matchq/diagnostics.hpp"
#include "matchq/error.hpp"
#include "matchq/stats.hpp"

using namespace matchq;

namespace {
EventLog wait_log() {
    EventLog log;
    log.K = 2;
    log.q0 = {2, 0};
    log.horizon = 7.0;
    log.events = {{1.0, EventKind::Arrival, 0, 3, 1.0},
                  {2.0, EventKind::Match, 1, 1, 2.0},
                  {3.0, EventKind::Arrival, 0, 4, 3.0},
                  {4.0, EventKind::Abandonment, 0, 3, 1.0},
                  {5.0, EventKind::Match, 1, 2, 5.0},
                  {6.0, EventKind::Match, 1, 3, 6.0}};
    return log;
}
}  // namespace

TEST_CASE("virtual wait replay on a hand-built log") {
    const auto log = wait_log();
    REQUIRE_NOTHROW(verify_log(log));
    const std::vector<double> ts{0.0, 2.5, 5.5};
    const auto w = virtual_wait_replay(log, 0, ts);
    CHECK(w.queue_at_sample == std::vector<std::int64_t>{2, 2, 1});
    CHECK(w.wait[0] == doctest::Approx(6.0));    // later abandonment (index 3) is behind the marker
    CHECK(w.wait[1] == doctest::Approx(3.5));    // same abandonment is now ahead of it
    CHECK(w.wait[2] == doctest::Approx(1.5));
    CHECK_FALSE(w.censored[0]);
    CHECK_FALSE(w.censored[1]);
    CHECK(w.censored[2]);
    CHECK(w.uncensored() == 2);
    CHECK(w.balance_violations == 0);
    CHECK_THROWS_AS(virtual_wait_replay(log, 2, ts), ArgumentError);
}

TEST_CASE("empty queue waits for the next match") {
    const auto log = wait_log();
    const auto w = virtual_wait_replay(log, 1, std::vector<double>{0.5, 5.5});
    CHECK(w.wait[0] == doctest::Approx(1.5));
    CHECK(w.wait[1] == doctest::Approx(0.5));
}

TEST_CASE("balance identity holds on simulated logs") {
    SystemParams p;
    p.K = 3;
    p.n = 100;
    p.lambda = {100, 98, 103};
    p.delta = {1, 0.5, 2};
    p.q0 = {5, 0, 12};
    for (RngSeed s = 0; s < 5; ++s) {
        const auto log = simulate(p, 3.0, s);
        const auto ts = little_sample_times(3.0, 200);
        for (std::size_t i = 0; i < 3; ++i) {
            const auto w = virtual_wait_replay(log, i, ts);
            CHECK(w.balance_violations == 0);
            const auto q = log.queue_lengths_at(ts[50]);
            CHECK(w.queue_at_sample[50] == q[i]);
            for (double v : w.wait) CHECK(v >= 0.0);
        }
    }
}

TEST_CASE("little sample times stop before the horizon end") {
    const auto ts = little_sample_times(10.0, 11);
    CHECK(ts.front() == 0.0);
    CHECK(ts.back() == doctest::Approx(9.0));
    CHECK_THROWS_AS(little_sample_times(10.0, 0), ArgumentError);
}

TEST_CASE("Little gap on a synthetic bundle") {
    ScaledPathBundle b;
    b.n = 4;
    b.grid = {0.0, 1.0};
    b.Qhat = Eigen::MatrixXd(1, 2);
    b.Qhat << 1.0, 2.0;
    VirtualWaitSeries w;
    w.category = 0;
    w.times = b.grid;
    w.wait = {0.5, 0.25};  // Vhat = 1.0, 0.5
    w.censored = {false, false};
    std::vector<VirtualWaitSeries> ws{w};
    const auto g = littles_law_gap(b, ws, 1.0, std::vector<double>{8.0});
    CHECK(g.gap == doctest::Approx(1.5));
    CHECK(g.gap_rate == doctest::Approx(1.0));  // multiplier 8/4 = 2
    CHECK(g.used == 2);
    ws[0].censored = {true, true};
    CHECK_THROWS_AS(littles_law_gap(b, ws, 1.0), UndefinedStatisticError);
}

TEST_CASE("pre-limit cost of a hand-built log") {
    CostSpec c;
    c.gamma = 1.0;
    c.penalty = {1.0, 1.0};
    c.holding = {1.0, 1.0};
    c.T_max = 1.0;
    EventLog log;
    log.K = 2;
    log.q0 = {1, 0};
    log.horizon = 1.0;
    CHECK(cost_prelimit(log, 1, c) == doctest::Approx(1.0 - std::exp(-1.0)));
    log.initial_patient = false;
    log.events.push_back({0.5, EventKind::Abandonment, 0, 1, 0.0});
    CHECK(cost_prelimit(log, 1, c) == doctest::Approx(1.0 - std::exp(-0.5) + std::exp(-0.5)));
    // n = 4 halves both the queue level and the penalty scale
    CHECK(cost_prelimit(log, 4, c) == doctest::Approx(0.5 * (1.0 - std::exp(-0.5) + std::exp(-0.5))));
    c.T_max = 2.0;
    CHECK_THROWS_AS(cost_prelimit(log, 1, c), ArgumentError);
}

TEST_CASE("limit cost against closed forms") {
    CostSpec c;
    c.gamma = 3.0;
    c.penalty = {1.0, 1.0};
    c.holding = {1.0, 1.0};
    c.T_max = 1.0;
    LimitParams p;
    p.K = 2;
    p.x = {1.0, 0.0};
    p.beta = {0.0, 0.0};
    p.sigma = {1.0, 1.0};
    p.delta = {0.0, 0.0};
    const auto flat = solve_explicit(p, zero_noise(2, 7, 1.0));
    CHECK(cost_limit(flat, p, c) == doctest::Approx((1.0 - std::exp(-3.0)) / 3.0).epsilon(1e-13));

    p.delta = {0.8, 0.8};
    const auto decay = solve_explicit(p, zero_noise(2, 2000, 1.0));
    const double rate = c.gamma + 0.8;
    CHECK(cost_limit(decay, p, c) == doctest::Approx(1.8 * (1.0 - std::exp(-rate)) / rate).epsilon(1e-6));

    c.T_max = 0.5;  // truncation inside the grid
    p.delta = {0.0, 0.0};
    CHECK(cost_limit(flat, p, c) == doctest::Approx((1.0 - std::exp(-1.5)) / 3.0).epsilon(1e-13));
}

TEST_CASE("cost tail bound and feasibility") {
    CostSpec c;
    c.gamma = 13.0;
    c.penalty = {1, 1};
    c.holding = {1, 1};
    c.T_max = 2.0;
    // int_T^inf e^{-g s}(1+s) ds by a fine midpoint rule
    double numeric = 0.0;
    const double h = 1e-5;
    for (double s = 2.0 + h / 2; s < 6.0; s += h) numeric += std::exp(-13.0 * s) * (1.0 + s) * h;
    CHECK(cost_tail_bound(c, 1.0) == doctest::Approx(numeric).epsilon(1e-6));
    CHECK(c.feasible(2, 1.0));
    c.gamma = 5.0;
    CHECK_FALSE(c.feasible(2, 1.0));
    c.penalty = {0.0, 1.0};
    CHECK_THROWS_AS(c.validate(2), ParameterError);
}

TEST_CASE("running stats merge like a single pass") {
    RunningStats all, a, b;
    for (int k = 0; k < 100; ++k) {
        const double x = std::sin(k * 1.3) * 10 + k * 0.01;
        all.add(x);
        (k < 37 ? a : b).add(x);
    }
    a.merge(b);
    CHECK(a.count() == 100);
    CHECK(a.mean() == doctest::Approx(all.mean()).epsilon(1e-12));
    CHECK(a.variance() == doctest::Approx(all.variance()).epsilon(1e-12));
    const std::vector<double> xs{1, 2, 3, 4};
    CHECK(summarize(xs).variance() == doctest::Approx(5.0 / 3.0));
}

TEST_CASE("KS distance and Spearman") {
    CHECK(ks_distance({1, 2, 3}, {1, 2, 3}) == 0.0);
    CHECK(ks_distance({1, 2}, {3, 4}) == 1.0);
    CHECK(ks_distance({1, 2, 3, 4}, {3, 4, 5, 6}) == doctest::Approx(0.5));
    CHECK(ks_distance({0, 0, 1}, {0, 1, 1}) == doctest::Approx(1.0 / 3.0));
    CHECK_THROWS_AS(ks_distance({}, {1}), ArgumentError);
    const std::vector<double> x{1, 2, 3, 4, 5}, down{9, 7, 5, 3, 1}, tied{1, 1, 2, 2, 3};
    CHECK(spearman(x, down) == doctest::Approx(-1.0));
    CHECK(spearman(x, tied) == doctest::Approx(0.9486832980505138));
    const std::vector<double> flat{2, 2, 2, 2, 2};
    CHECK_THROWS_AS(spearman(x, flat), UndefinedStatisticError);
}

TEST_CASE("pre-limit cost decreases in gamma; pure abandonment penalty") {
    SystemParams p;
    p.K = 2;
    p.n = 16;
    p.lambda = {16, 16};
    p.delta = {1, 1};
    p.q0 = {4, 0};
    const auto log = simulate(p, 2.0, 5);
    CostSpec c;
    c.penalty = {1, 1};
    c.holding = {1, 1};
    c.T_max = 2.0;
    double prev = INFINITY;
    for (double g : {1.0, 10.0, 100.0}) {
        c.gamma = g;
        const double v = cost_prelimit(log, 16, c);
        CHECK(v < prev);
        prev = v;
    }
    EventLog one;
    one.K = 2;
    one.q0 = {0, 0};
    one.horizon = 1.0;
    one.events = {{0.2, EventKind::Arrival, 0, 1, 0.2}, {0.7, EventKind::Abandonment, 0, 1, 0.2}};
    c.gamma = 2.0;
    c.holding = {0, 0};
    c.penalty = {3, 1};
    c.T_max = 1.0;
    CHECK(cost_prelimit(one, 9, c) == doctest::Approx(3.0 * std::exp(-1.4) / 3.0));
}

TEST_CASE("Little gap is local to the sampled window") {
    SystemParams p;
    p.K = 2;
    p.n = 50;
    p.lambda = {50, 50};
    p.delta = {1, 1};
    p.q0 = {0, 0};
    const auto log = simulate(p, 2.0, 8);
    const auto ts = little_sample_times(1.0, 20);
    auto gap_for = [&](const EventLog& l) {
        std::vector<VirtualWaitSeries> ws;
        for (std::size_t i = 0; i < 2; ++i) ws.push_back(virtual_wait_replay(l, i, ts));
        return littles_law_gap(scale(l, p, 1.0, ts), ws, 1.0).gap;
    };
    // Departures for every sample happen well before t = 2 here; dropping
    // the events after the last departure cannot change the statistic.
    double last_departure = 0.0;
    for (std::size_t i = 0; i < 2; ++i) {
        const auto w = virtual_wait_replay(log, i, ts);
        REQUIRE(w.uncensored() == ts.size());
        for (std::size_t k = 0; k < ts.size(); ++k) last_departure = std::max(last_departure, ts[k] + w.wait[k]);
    }
    EventLog cut = log;
    cut.events.erase(std::remove_if(cut.events.begin(), cut.events.end(),
                                    [&](const Event& e) { return e.time > last_departure; }),
                     cut.events.end());
    CHECK(gap_for(cut) == gap_for(log));

    ScaledPathBundle b;
    b.n = 1;
    b.grid = {0.0, 0.5};
    b.Qhat = Eigen::MatrixXd(1, 2);
    b.Qhat << 0.6, 1.2;
    VirtualWaitSeries w;
    w.times = b.grid;
    w.wait = {0.3, 0.6};
    w.censored = {false, false};
    CHECK(littles_law_gap(b, std::vector<VirtualWaitSeries>{w}, 2.0).gap == doctest::Approx(0.0));
}
