#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <vector>

#include <Eigen/Core>

#include "matchq/params.hpp"
#include "matchq/rng.hpp"

namespace matchq {

/// Brownian increments on the uniform partition of [0, T] into N steps.
/// Row i holds category i's increments; each row comes from its own stream
/// derived from (seed, i), so the first K rows do not depend on how many
/// categories were drawn.
struct NoiseDraws {
    double T = 1.0;
    std::size_t N = 0;
    Eigen::MatrixXd dW;  // K x N, entries ~ Normal(0, T/N)
    RngSeed seed = 0;

    std::size_t K() const { return static_cast<std::size_t>(dW.rows()); }
    double dt() const { return T / static_cast<double>(N); }
    std::vector<double> grid() const;
    /// W(t_j) = sum_{k<j} dW_k, K x (N+1).
    Eigen::MatrixXd brownian() const;
};

NoiseDraws make_noise(std::size_t K, std::size_t N, double T, RngSeed seed);
NoiseDraws zero_noise(std::size_t K, std::size_t N, double T);
/// Sums consecutive blocks of `factor` increments (same Brownian path on a coarser grid).
NoiseDraws coarsen(const NoiseDraws& fine, std::size_t factor);

/// Driving term xi_i(t_j) = x_i + beta_i t_j + sigma_i W_i(t_j).
Eigen::MatrixXd driving_path(const LimitParams& p, const NoiseDraws& noise);

/// Grid solution of the coupled equation.
struct LimitPath {
    std::vector<double> grid;
    Eigen::MatrixXd X;                 // K x (N+1)
    Eigen::VectorXd R;                 // N+1
    Eigen::MatrixXd G;                 // K x (N+1), delta_i times trapezoidal integral of X_i
    std::vector<std::size_t> argmin;   // lowest category attaining the min in R(t_j)

    std::size_t K() const { return static_cast<std::size_t>(X.rows()); }
    std::size_t N() const { return grid.empty() ? 0 : grid.size() - 1; }
};

/// Slack allowed for min_i X_i and for negative excursions: 1e-9 (1 + max sigma sqrt(T)).
double coupling_tolerance(const LimitParams& p, double T);

enum class Scheme {
    /// X_i(t_j) enters its own trapezoid; solved exactly per step.
    SemiImplicit,
    /// Trapezoid uses X(t_{j-1}) for both ends.
    Explicit,
};

/// Marches the trapezoidal discretization forward in time. R(t_0) = 0, G(t_0) = 0.
/// Throws ConfigurationError unless dt * max delta < 1.
LimitPath solve_explicit(const LimitParams& p, const NoiseDraws& noise, Scheme scheme = Scheme::SemiImplicit);

/// Coordinatewise drift h_i(x_i) of the integral term; defaults to delta_i x_i.
using DriftFn = std::function<double(std::size_t, double)>;

enum class InitialGuess { Zero, Driving };

struct FixedPointOptions {
    double tol = 1e-10;
    std::size_t max_iter = 10'000;
    InitialGuess init = InitialGuess::Zero;
    /// Per-window contraction factor aimed for when the full horizon does not contract.
    double window_factor = 0.5;
    /// Custom drift and its Lipschitz constant; empty means delta_i x_i with L = max delta.
    DriftFn drift;
    double lipschitz = 0.0;
};

struct FixedPointResult {
    LimitPath path;
    std::size_t iterations = 0;  // summed over windows
    std::size_t windows = 1;
    double residual = 0.0;       // last sup-norm change (max over windows)
    double contraction_bound = 0.0;  // (1+K) sqrt(K) L T over the full horizon
};

/// Picard iteration of X -> y - int h(X) - R_X 1 with trapezoidal integrals.
/// When (1+K) sqrt(K) L T >= 1 the horizon is split into windows solved in turn.
/// Throws ConvergenceError (carrying the residual) after max_iter sweeps.
FixedPointResult solve_fixed_point(const LimitParams& p, const NoiseDraws& noise,
                                   const FixedPointOptions& opts = {});

/// Closed form X_i = xi_i - min_k xi_k, R = min_k xi_k. Requires delta = 0.
LimitPath solve_no_abandonment(const LimitParams& p, const NoiseDraws& noise);

/// Layered max representation of one coordinate of the no-abandonment limit
/// and an occupation-time reading of the local times it produces.
struct SemimartingaleReport {
    std::size_t category = 0;
    /// Row l-1 holds Y_l and eta_l, l = 1..K-1, in the coordinate order that
    /// puts `category` first.
    Eigen::MatrixXd Y;
    Eigen::MatrixXd eta;
    Eigen::VectorXd X_iterated;    // xi_1 + eta_1
    Eigen::VectorXd X_closed;      // xi_1 - min_k xi_k
    double identity_residual = 0.0;          // sup |X_iterated - X_closed|
    double layered_residual = 0.0;           // sup |X_closed - (xi_1 - xi_K + sum_l Y_l^+)|
    std::vector<double> local_time;          // L^(l)(T) of Y_{K-l} at zero, l = 1..K-1
    std::vector<double> bandwidth;           // occupation window used per layer
    Eigen::VectorXd reconstruction;          // Ito-Tanaka sum with estimated local times
    double decomposition_residual = 0.0;     // sup |X_closed - reconstruction|, diagnostic only
    Eigen::MatrixXd B_correlation;           // (K-1) x (K-1) correlations of the B_{lK}
};

SemimartingaleReport semimartingale_decomposition(const LimitParams& p, const NoiseDraws& noise,
                                                  std::size_t category = 0);

/// Long format t,series,category,value with series X, G and R (category 0).
void write_limit_csv(std::ostream& os, const LimitPath& path);

}  // namespace matchq
