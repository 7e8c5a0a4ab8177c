#include "matchq/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "matchq/error.hpp"

namespace matchq {

std::size_t VirtualWaitSeries::uncensored() const {
    return static_cast<std::size_t>(std::count(censored.begin(), censored.end(), false));
}

VirtualWaitSeries virtual_wait_replay(const EventLog& log, std::size_t category,
                                      std::span<const double> sample_times) {
    if (category >= log.K) throw ArgumentError("category out of range");
    VirtualWaitSeries out;
    out.category = category;
    out.times.assign(sample_times.begin(), sample_times.end());
    out.wait.resize(sample_times.size());
    out.censored.resize(sample_times.size());
    out.queue_at_sample.resize(sample_times.size());

    const std::size_t i = category;
    for (std::size_t s = 0; s < sample_times.size(); ++s) {
        const double t = sample_times[s];
        if (t < 0.0 || t > log.horizon) throw ArgumentError("sample time outside [0, horizon]");

        // State at t: queue length and the index of the last component that entered by t.
        std::int64_t queue = static_cast<std::int64_t>(log.q0[i]);
        std::uint64_t last_index = log.q0[i];
        std::size_t k = 0;
        for (; k < log.events.size() && log.events[k].time <= t; ++k) {
            const Event& e = log.events[k];
            if (e.kind == EventKind::Match) {
                if (e.category == i) ++last_index;
                else --queue;
            } else if (e.category == i) {
                if (e.kind == EventKind::Arrival) {
                    ++last_index;
                    ++queue;
                } else {
                    --queue;
                }
            }
        }
        out.queue_at_sample[s] = queue;

        std::int64_t ahead = queue;
        std::int64_t net_new = 0;  // later arrivals still present
        bool departed = false;
        for (; k < log.events.size(); ++k) {
            const Event& e = log.events[k];
            if (e.kind == EventKind::Match) {
                if (ahead == 0) {
                    // `queue` is Q_i just before the departure.
                    if (queue != net_new) ++out.balance_violations;
                    out.wait[s] = e.time - t;
                    departed = true;
                    break;
                }
                --ahead;
                if (e.category != i) --queue;
            } else if (e.category == i) {
                if (e.kind == EventKind::Arrival) {
                    ++queue;
                    ++net_new;
                } else {
                    --queue;
                    if (e.arrival_index <= last_index) --ahead;
                    else --net_new;
                }
            }
        }
        out.censored[s] = !departed;
        if (!departed) out.wait[s] = log.horizon - t;
    }
    return out;
}

std::vector<double> little_sample_times(double horizon, std::size_t count, double keep) {
    if (!(horizon > 0.0) || count == 0 || !(keep > 0.0 && keep <= 1.0))
        throw ArgumentError("sample grid needs horizon > 0, count >= 1, keep in (0, 1]");
    std::vector<double> ts(count);
    const double end = keep * horizon;
    for (std::size_t k = 0; k < count; ++k)
        ts[k] = count == 1 ? 0.0 : end * static_cast<double>(k) / static_cast<double>(count - 1);
    return ts;
}

LittleGap littles_law_gap(const ScaledPathBundle& bundle, std::span<const VirtualWaitSeries> waits,
                          double lambda0, std::span<const double> lambda) {
    const double root = std::sqrt(static_cast<double>(bundle.n));
    LittleGap g;
    for (const auto& w : waits) {
        if (w.category >= bundle.K()) throw ArgumentError("wait series category out of range");
        if (w.times.size() != bundle.grid.size()) throw ArgumentError("sample times differ from the bundle grid");
        const double rate = lambda.empty() ? lambda0 : lambda[w.category] / static_cast<double>(bundle.n);
        for (std::size_t s = 0; s < w.times.size(); ++s) {
            if (w.times[s] != bundle.grid[s]) throw ArgumentError("sample times differ from the bundle grid");
            if (w.censored[s]) {
                ++g.censored;
                continue;
            }
            ++g.used;
            const double q = bundle.Qhat(static_cast<Eigen::Index>(w.category), static_cast<Eigen::Index>(s));
            const double vhat = root * w.wait[s];
            g.gap = std::max(g.gap, std::abs(q - lambda0 * vhat));
            g.gap_rate = std::max(g.gap_rate, std::abs(q - rate * vhat));
        }
    }
    if (g.used == 0) throw UndefinedStatisticError("every virtual-wait sample is censored");
    return g;
}

void CostSpec::validate(std::size_t K) const {
    if (!(gamma > 0.0)) throw ParameterError("discount rate gamma must be positive");
    if (penalty.size() != K || holding.size() != K)
        throw ParameterError("cost vectors must have K entries");
    for (double p : penalty)
        if (!(p > 0.0)) throw ParameterError("abandonment penalties must be positive");
    for (double c : holding)
        if (!(c >= 0.0)) throw ParameterError("holding weights must be nonnegative");
    if (!(power >= 1.0)) throw ParameterError("holding cost exponent must be >= 1");
    if (!(T_max > 0.0)) throw ParameterError("T_max must be positive");
    if (!(growth_level >= 1.0)) throw ParameterError("growth level l must be >= 1");
}

double CostSpec::holding_cost(std::size_t j, double x) const {
    return holding[j] * (power == 1.0 ? x : std::pow(x, power));
}

bool CostSpec::feasible(std::size_t K, double c0) const {
    return gamma > 2.0 * growth_level * c0 * (1.0 + static_cast<double>(K));
}

double cost_prelimit(const EventLog& log, std::uint64_t n, const CostSpec& spec) {
    spec.validate(log.K);
    if (log.horizon < spec.T_max) throw ArgumentError("log horizon is shorter than T_max");
    const double root = std::sqrt(static_cast<double>(n));
    const double g = spec.gamma;
    const std::size_t K = log.K;

    std::vector<std::int64_t> q(log.q0.begin(), log.q0.end());
    double holding_rate = 0.0;
    auto refresh = [&] {
        holding_rate = 0.0;
        for (std::size_t j = 0; j < K; ++j)
            holding_rate += spec.holding_cost(j, static_cast<double>(q[j]) / root);
    };
    refresh();

    double total = 0.0;
    double clock = 0.0;
    auto integrate_to = [&](double to) {
        total += holding_rate * (std::exp(-g * clock) - std::exp(-g * to)) / g;
        clock = to;
    };
    for (const Event& e : log.events) {
        if (e.time > spec.T_max) break;
        integrate_to(e.time);
        switch (e.kind) {
            case EventKind::Arrival: ++q[e.category]; break;
            case EventKind::Abandonment:
                --q[e.category];
                total += spec.penalty[e.category] * std::exp(-g * e.time) / root;
                break;
            case EventKind::Match:
                for (std::size_t j = 0; j < K; ++j)
                    if (j != e.category) --q[j];
                break;
        }
        refresh();
    }
    integrate_to(spec.T_max);
    return total;
}

double cost_limit(const LimitPath& path, const LimitParams& p, const CostSpec& spec) {
    spec.validate(path.K());
    if (p.K != path.K()) throw ArgumentError("path and parameters disagree on K");
    if (path.grid.empty() || path.grid.back() < spec.T_max - 1e-12)
        throw ArgumentError("path horizon is shorter than T_max");
    const double g = spec.gamma;

    auto integrand = [&](Eigen::Index j) {
        double f = 0.0;
        for (std::size_t i = 0; i < path.K(); ++i) {
            const double x = path.X(static_cast<Eigen::Index>(i), j);
            const double xp = std::max(x, 0.0);
            f += spec.holding_cost(i, xp) + spec.penalty[i] * p.delta[i] * x;
        }
        return f;
    };
    // int_a^b e^{-g s} (fa + (fb - fa)(s - a)/h) ds
    auto piece = [g](double a, double b, double fa, double fb) {
        const double h = b - a;
        const double ea = std::exp(-g * a), eb = std::exp(-g * b);
        const double base = (ea - eb) / g;
        const double slope = (ea - eb * (1.0 + g * h)) / (g * g);
        return fa * base + (fb - fa) / h * slope;
    };

    double total = 0.0;
    double f_prev = integrand(0);
    for (std::size_t j = 1; j < path.grid.size(); ++j) {
        const double a = path.grid[j - 1], b = path.grid[j];
        if (a >= spec.T_max) break;
        const double f_cur = integrand(static_cast<Eigen::Index>(j));
        if (b <= spec.T_max + 1e-12) {
            total += piece(a, b, f_prev, f_cur);
        } else {
            const double fm = f_prev + (f_cur - f_prev) * (spec.T_max - a) / (b - a);
            total += piece(a, spec.T_max, f_prev, fm);
        }
        f_prev = f_cur;
    }
    return total;
}

double cost_tail_bound(const CostSpec& spec, double envelope) {
    const double g = spec.gamma, T = spec.T_max;
    return envelope * std::exp(-g * T) * ((1.0 + T) / g + 1.0 / (g * g));
}

}  // namespace matchq
