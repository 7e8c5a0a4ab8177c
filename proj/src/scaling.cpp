#include "matchq/scaling.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "matchq/error.hpp"

namespace matchq {

ScaledPathBundle scale(const EventLog& log, const SystemParams& params, double lambda0,
                       std::span<const double> grid) {
    params.validate();
    const std::size_t K = params.K;
    if (log.K != K) throw ArgumentError("log and parameters disagree on K");
    if (lambda0 < 0.0) throw ArgumentError("lambda0 must be nonnegative");
    for (std::size_t j = 0; j < grid.size(); ++j) {
        if (grid[j] < 0.0 || grid[j] > log.horizon)
            throw ArgumentError("grid point lies outside [0, horizon]");
        if (j > 0 && grid[j] < grid[j - 1]) throw ArgumentError("grid must be nondecreasing");
    }

    const double nn = static_cast<double>(params.n);
    const double root = std::sqrt(nn);
    const auto G = static_cast<Eigen::Index>(grid.size());
    const auto KK = static_cast<Eigen::Index>(K);

    ScaledPathBundle b;
    b.grid.assign(grid.begin(), grid.end());
    b.Qhat.resize(KK, G);
    b.Ahat.resize(KK, G);
    b.Ghat.resize(KK, G);
    b.Mhat.resize(KK, G);
    b.IQhat.resize(KK, G);
    b.Rhat.resize(G);
    b.n = params.n;
    b.lambda0 = lambda0;
    b.delta = params.delta;
    b.drift.resize(K);
    b.q0hat.resize(K);
    for (std::size_t i = 0; i < K; ++i) {
        b.drift[i] = (params.lambda[i] - lambda0 * nn) / root;
        b.q0hat[i] = static_cast<double>(params.q0[i]) / root;
    }

    std::vector<std::int64_t> q(log.q0.begin(), log.q0.end());
    std::vector<std::int64_t> patient(K, 0);
    if (log.initial_patient) patient.assign(log.q0.begin(), log.q0.end());
    std::vector<std::uint64_t> arrivals(K, 0), abandons(K, 0);
    std::uint64_t matches = 0;
    std::vector<double> integral(K, 0.0);  // int_0^t (Q_i - patient_i) ds
    double clock = 0.0;

    auto advance = [&](double to) {
        const double dt = to - clock;
        if (dt > 0.0)
            for (std::size_t i = 0; i < K; ++i)
                integral[i] += static_cast<double>(q[i] - patient[i]) * dt;
        clock = std::max(clock, to);
    };

    std::size_t next = 0;
    for (Eigen::Index j = 0; j < G; ++j) {
        const double t = grid[static_cast<std::size_t>(j)];
        while (next < log.events.size() && log.events[next].time <= t) {
            const Event& e = log.events[next++];
            advance(e.time);
            switch (e.kind) {
                case EventKind::Arrival:
                    ++arrivals[e.category];
                    ++q[e.category];
                    break;
                case EventKind::Abandonment:
                    ++abandons[e.category];
                    --q[e.category];
                    break;
                case EventKind::Match:
                    ++arrivals[e.category];
                    ++matches;
                    for (std::size_t i = 0; i < K; ++i) {
                        if (i == e.category) continue;
                        --q[i];
                        if (patient[i] > 0) --patient[i];
                    }
                    break;
            }
        }
        advance(t);
        for (std::size_t i = 0; i < K; ++i) {
            const auto ii = static_cast<Eigen::Index>(i);
            b.Qhat(ii, j) = static_cast<double>(q[i]) / root;
            b.Ahat(ii, j) = (static_cast<double>(arrivals[i]) - params.lambda[i] * t) / root;
            b.Ghat(ii, j) = static_cast<double>(abandons[i]) / root;
            b.IQhat(ii, j) = integral[i] / root;
            b.Mhat(ii, j) = (static_cast<double>(abandons[i]) - params.delta[i] * integral[i]) / root;
        }
        b.Rhat(j) = (static_cast<double>(matches) - lambda0 * nn * t) / root;
    }
    return b;
}

double scaled_conservation_residual(const ScaledPathBundle& b) {
    double worst = 0.0;
    for (Eigen::Index j = 0; j < b.Qhat.cols(); ++j) {
        const double t = b.grid[static_cast<std::size_t>(j)];
        for (Eigen::Index i = 0; i < b.Qhat.rows(); ++i) {
            const auto ui = static_cast<std::size_t>(i);
            const double rhs = b.q0hat[ui] + b.Ahat(i, j) + b.drift[ui] * t - b.Ghat(i, j) - b.Rhat(j);
            worst = std::max(worst, std::abs(b.Qhat(i, j) - rhs));
        }
    }
    return worst;
}

double compensator_residual(const ScaledPathBundle& b) {
    double worst = 0.0;
    for (Eigen::Index j = 0; j < b.Qhat.cols(); ++j)
        for (Eigen::Index i = 0; i < b.Qhat.rows(); ++i) {
            const double rhs = b.Mhat(i, j) + b.delta[static_cast<std::size_t>(i)] * b.IQhat(i, j);
            worst = std::max(worst, std::abs(b.Ghat(i, j) - rhs));
        }
    return worst;
}

std::vector<double> uniform_grid(double T, std::size_t N) {
    if (!(T > 0.0) || N == 0) throw ArgumentError("uniform grid needs T > 0 and N >= 1");
    std::vector<double> g(N + 1);
    for (std::size_t j = 0; j <= N; ++j) g[j] = T * static_cast<double>(j) / static_cast<double>(N);
    return g;
}

double occupation_at_zero(std::span<const double> path, std::span<const double> grid, double eps) {
    if (eps < 0.0) throw ArgumentError("eps must be nonnegative");
    if (path.size() != grid.size()) throw ArgumentError("path and grid lengths differ");
    if (grid.size() < 2) throw ArgumentError("need at least two grid points");
    const double span = grid.back() - grid.front();
    if (!(span > 0.0)) throw ArgumentError("grid has zero length");
    double at_zero = 0.0;
    for (std::size_t j = 1; j < grid.size(); ++j)
        if (std::abs(path[j]) <= eps) at_zero += grid[j] - grid[j - 1];
    return at_zero / span;
}

double sup_norm(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ArgumentError("paths have mismatched dimensions");
    if (a.size() == 0) return 0.0;
    return (a - b).colwise().norm().maxCoeff();
}

double modulus_of_continuity(std::span<const double> path, std::span<const double> grid, double h) {
    if (path.size() != grid.size()) throw ArgumentError("path and grid lengths differ");
    if (h < 0.0) throw ArgumentError("window must be nonnegative");
    double worst = 0.0;
    for (std::size_t s = 0; s < grid.size(); ++s)
        for (std::size_t t = s + 1; t < grid.size() && grid[t] - grid[s] <= h; ++t)
            worst = std::max(worst, std::abs(path[t] - path[s]));
    return worst;
}

void write_bundle_csv(std::ostream& os, const ScaledPathBundle& b) {
    os << "t,series,category,value\n";
    char buf[128];
    auto row = [&](double t, const char* series, std::size_t cat, double v) {
        std::snprintf(buf, sizeof buf, "%.12g,%s,%zu,%.12g\n", t, series, cat, v);
        os << buf;
    };
    for (Eigen::Index j = 0; j < b.Qhat.cols(); ++j) {
        const double t = b.grid[static_cast<std::size_t>(j)];
        for (Eigen::Index i = 0; i < b.Qhat.rows(); ++i) {
            const auto c = static_cast<std::size_t>(i) + 1;
            row(t, "Qhat", c, b.Qhat(i, j));
            row(t, "Ahat", c, b.Ahat(i, j));
            row(t, "Ghat", c, b.Ghat(i, j));
            row(t, "Mhat", c, b.Mhat(i, j));
        }
        row(t, "Rhat", 0, b.Rhat(j));
    }
}

}  // namespace matchq
