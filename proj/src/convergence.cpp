#include "matchq/convergence.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "matchq/error.hpp"
#include "matchq/limit.hpp"
#include "matchq/parallel.hpp"
#include "matchq/scaling.hpp"
#include "matchq/simulator.hpp"

namespace matchq {
namespace {

std::size_t steps_for(double horizon, std::size_t per_unit) {
    const double s = horizon * static_cast<double>(per_unit);
    const auto r = static_cast<std::size_t>(std::llround(s));
    if (r == 0 || std::abs(s - static_cast<double>(r)) > 1e-9)
        throw ArgumentError("horizon must be a multiple of the limit grid step");
    return r;
}

struct PrelimitSample {
    double cost = 0.0;
    std::vector<double> terminal;
    double sup = 0.0;
    double envelope = 0.0;  // integrand at T_max
};

struct LimitSample {
    double cost = 0.0;
    std::vector<double> terminal;
    double sup = 0.0;
    double envelope = 0.0;
};

}  // namespace

ConvergenceReport convergence_study(const RegimeFamily& f, const CostSpec& spec, const StudyOptions& opts) {
    f.validate();
    if (opts.reps < 2 || opts.limit_paths < 2) throw ArgumentError("need at least two replications");
    if (opts.with_cost) spec.validate(f.K);

    const double horizon = opts.with_cost ? std::max(opts.T, spec.T_max) : opts.T;
    const std::size_t steps = steps_for(horizon, opts.steps_per_unit);
    const std::size_t terminal_col = steps_for(opts.T, opts.steps_per_unit);
    const auto grid = uniform_grid(horizon, steps);
    const std::vector<double> sup_grid(grid.begin(), grid.begin() + static_cast<std::ptrdiff_t>(terminal_col) + 1);
    const std::size_t K = f.K;

    ConvergenceReport report;
    report.reps = opts.reps;
    report.limit_paths = opts.limit_paths;
    const double c0 = *std::max_element(f.delta_limit.begin(), f.delta_limit.end());
    report.gamma_feasible = opts.with_cost && spec.feasible(K, c0);

    // Limit side.
    const LimitParams lp = limit_of(f);
    std::vector<LimitSample> limit(opts.limit_paths);
    parallel_for(opts.limit_paths, opts.threads, [&](std::size_t r) {
        const NoiseDraws noise = make_noise(K, steps, horizon, derive_seed(opts.master_seed, 0, r));
        const LimitPath path = solve_explicit(lp, noise);
        LimitSample& s = limit[r];
        s.terminal.resize(K);
        for (std::size_t i = 0; i < K; ++i)
            s.terminal[i] = path.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(terminal_col));
        s.sup = path.X.leftCols(static_cast<Eigen::Index>(terminal_col + 1)).colwise().norm().maxCoeff();
        if (opts.with_cost) {
            s.cost = cost_limit(path, lp, spec);
            const auto last = static_cast<Eigen::Index>(path.X.cols() - 1);
            for (std::size_t i = 0; i < K; ++i) {
                const double x = std::max(path.X(static_cast<Eigen::Index>(i), last), 0.0);
                s.envelope += spec.holding_cost(i, x) + spec.penalty[i] * lp.delta[i] * x;
            }
        }
    });
    report.limit_terminal_mean.assign(K, 0.0);
    std::vector<std::vector<double>> limit_terminal(K);
    RunningStats limit_env;
    for (const auto& s : limit) {
        report.limit_cost.add(s.cost);
        report.limit_sup_norm.add(s.sup);
        limit_env.add(s.envelope);
        for (std::size_t i = 0; i < K; ++i) {
            limit_terminal[i].push_back(s.terminal[i]);
            report.limit_terminal_mean[i] += s.terminal[i] / static_cast<double>(limit.size());
        }
    }
    double envelope = limit_env.mean();
    double head = report.limit_cost.mean();

    // Pre-limit side.
    for (const auto n : f.n_list) {
        const SystemParams sp = make_regime_member(f, n);
        std::vector<PrelimitSample> samples(opts.reps);
        parallel_for(opts.reps, opts.threads, [&](std::size_t r) {
            SimOptions so;
            so.check_invariants = false;
            const EventLog log = simulate(sp, horizon, derive_seed(opts.master_seed, n, r), so);
            const ScaledPathBundle b = scale(log, sp, f.lambda0, sup_grid);
            PrelimitSample& s = samples[r];
            s.terminal.resize(K);
            for (std::size_t i = 0; i < K; ++i)
                s.terminal[i] = b.Qhat(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(terminal_col));
            s.sup = b.Qhat.colwise().norm().maxCoeff();
            if (opts.with_cost) {
                s.cost = cost_prelimit(log, n, spec);
                const auto q = log.queue_lengths_at(spec.T_max);
                const double root = std::sqrt(static_cast<double>(n));
                for (std::size_t i = 0; i < K; ++i) {
                    const double x = static_cast<double>(q[i]) / root;
                    s.envelope += spec.holding_cost(i, x) + spec.penalty[i] * sp.delta[i] * x;
                }
            }
        });

        ConvergenceRow row;
        row.n = n;
        row.terminal_mean.assign(K, 0.0);
        std::vector<std::vector<double>> terminal(K);
        RunningStats env;
        for (const auto& s : samples) {
            row.cost.add(s.cost);
            row.sup_norm.add(s.sup);
            row.sup_norm_sq.add(s.sup * s.sup);
            env.add(s.envelope);
            for (std::size_t i = 0; i < K; ++i) {
                terminal[i].push_back(s.terminal[i]);
                row.terminal_mean[i] += s.terminal[i] / static_cast<double>(samples.size());
            }
        }
        for (std::size_t i = 0; i < K; ++i) row.ks_terminal.push_back(ks_distance(terminal[i], limit_terminal[i]));
        envelope = std::max(envelope, env.mean() + 3.0 * std::sqrt(env.variance()));
        head = std::min(head, row.cost.mean());
        report.rows.push_back(std::move(row));
    }
    envelope = std::max(envelope, limit_env.mean() + 3.0 * std::sqrt(limit_env.variance()));
    if (opts.with_cost) {
        report.tail_bound = cost_tail_bound(spec, envelope);
        report.head_value = head;
    }
    return report;
}

std::vector<LittleRow> littles_law_study(const RegimeFamily& f, const StudyOptions& opts,
                                         std::size_t sample_count) {
    f.validate();
    if (opts.reps < 2) throw ArgumentError("need at least two replications");
    const auto times = little_sample_times(opts.T, sample_count);
    std::vector<LittleRow> rows;
    for (const auto n : f.n_list) {
        const SystemParams sp = make_regime_member(f, n);
        struct Sample {
            LittleGap gap;
            double v2 = 0.0;
            std::size_t v2_count = 0;
            std::size_t violations = 0;
            bool defined = true;
        };
        std::vector<Sample> samples(opts.reps);
        parallel_for(opts.reps, opts.threads, [&](std::size_t r) {
            SimOptions so;
            so.check_invariants = false;
            const EventLog log = simulate(sp, opts.T, derive_seed(opts.master_seed, n, r), so);
            const ScaledPathBundle b = scale(log, sp, f.lambda0, times);
            std::vector<VirtualWaitSeries> waits;
            for (std::size_t i = 0; i < sp.K; ++i) waits.push_back(virtual_wait_replay(log, i, times));
            Sample& s = samples[r];
            const double root = std::sqrt(static_cast<double>(n));
            for (const auto& w : waits) {
                s.violations += w.balance_violations;
                for (std::size_t k = 0; k < w.times.size(); ++k)
                    if (!w.censored[k]) {
                        s.v2 += (root * w.wait[k]) * (root * w.wait[k]);
                        ++s.v2_count;
                    }
            }
            try {
                s.gap = littles_law_gap(b, waits, f.lambda0, sp.lambda);
            } catch (const UndefinedStatisticError&) {
                s.defined = false;
                s.gap.censored = sample_count * sp.K;
            }
        });
        LittleRow row;
        row.n = n;
        for (const auto& s : samples) {
            row.censored += s.gap.censored;
            row.samples += s.gap.censored + s.gap.used;
            row.balance_violations += s.violations;
            if (s.v2_count > 0) row.vhat_second_moment.add(s.v2 / static_cast<double>(s.v2_count));
            if (!s.defined) continue;
            row.gap.add(s.gap.gap);
            row.gap_rate.add(s.gap.gap_rate);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_convergence_csv(std::ostream& os, const ConvergenceReport& r) {
    os << "n,reps,cost_mean,cost_se,limit_cost_mean,limit_cost_se,cost_gap,sup_norm_mean,sup_norm_sq_mean";
    const std::size_t K = r.limit_terminal_mean.size();
    for (std::size_t i = 0; i < K; ++i) os << ",ks_" << i + 1;
    os << "\n";
    char buf[512];
    for (const auto& row : r.rows) {
        std::snprintf(buf, sizeof buf, "%llu,%zu,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g",
                      static_cast<unsigned long long>(row.n), row.cost.count(), row.cost.mean(),
                      row.cost.standard_error(), r.limit_cost.mean(), r.limit_cost.standard_error(),
                      row.cost.mean() - r.limit_cost.mean(), row.sup_norm.mean(), row.sup_norm_sq.mean());
        os << buf;
        for (double ks : row.ks_terminal) {
            std::snprintf(buf, sizeof buf, ",%.10g", ks);
            os << buf;
        }
        os << "\n";
    }
}

void write_convergence_summary(std::ostream& os, const ConvergenceReport& r) {
    char buf[512];
    std::snprintf(buf, sizeof buf, "gamma_feasible = %s\ntail_bound = %.6g\nhead_value = %.6g\n",
                  r.gamma_feasible ? "true" : "false", r.tail_bound, r.head_value);
    os << buf;
    std::snprintf(buf, sizeof buf, "limit: cost %.6g +- %.2g (%zu paths), E sup|X| %.6g\n",
                  r.limit_cost.mean(), r.limit_cost.standard_error(), r.limit_paths, r.limit_sup_norm.mean());
    os << buf;
    os << "      n       cost         se     |gap|   KS_1   E sup|Q|^2\n";
    for (const auto& row : r.rows) {
        std::snprintf(buf, sizeof buf, "%7llu %10.6f %10.6f %9.6f %6.4f %10.5f\n",
                      static_cast<unsigned long long>(row.n), row.cost.mean(), row.cost.standard_error(),
                      std::abs(row.cost.mean() - r.limit_cost.mean()),
                      row.ks_terminal.empty() ? 0.0 : row.ks_terminal[0], row.sup_norm_sq.mean());
        os << buf;
    }
}

void write_little_csv(std::ostream& os, const std::vector<LittleRow>& rows) {
    os << "n,reps,gap_mean,gap_se,gap_rate_mean,gap_rate_se,vhat_sq_mean,censored,samples,balance_violations\n";
    char buf[512];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%llu,%zu,%.10g,%.10g,%.10g,%.10g,%.10g,%zu,%zu,%zu\n",
                      static_cast<unsigned long long>(r.n), r.gap.count(), r.gap.mean(),
                      r.gap.standard_error(), r.gap_rate.mean(), r.gap_rate.standard_error(),
                      r.vhat_second_moment.mean(), r.censored, r.samples, r.balance_violations);
        os << buf;
    }
}

}  // namespace matchq
