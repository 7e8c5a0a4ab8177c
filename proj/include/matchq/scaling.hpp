#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "matchq/params.hpp"
#include "matchq/simulator.hpp"

namespace matchq {

/// Diffusion-scaled quantities of one pre-limit trajectory, sampled on a grid.
/// Matrices are K x grid.size(); column j belongs to grid[j].
struct ScaledPathBundle {
    std::vector<double> grid;
    Eigen::MatrixXd Qhat;   // Q / sqrt(n)
    Eigen::MatrixXd Ahat;   // (A - lambda t) / sqrt(n)
    Eigen::MatrixXd Ghat;   // G / sqrt(n)
    Eigen::VectorXd Rhat;   // (R - lambda0 n t) / sqrt(n)
    Eigen::MatrixXd Mhat;   // (G - delta int_0^t Q_mortal ds) / sqrt(n)
    Eigen::MatrixXd IQhat;  // int_0^t Q_mortal ds / sqrt(n), exact step-path integral

    std::uint64_t n = 1;
    double lambda0 = 0.0;
    std::vector<double> drift;   // (lambda_i - lambda0 n) / sqrt(n)
    std::vector<double> delta;
    std::vector<double> q0hat;

    std::size_t K() const { return static_cast<std::size_t>(Qhat.rows()); }
};

/// Scales `log` onto `grid` (nondecreasing, inside [0, horizon]).
/// Step-path integrals are computed exactly between events. The abandonment
/// compensator counts only components that can abandon, so with patient
/// initial components M-hat stays a martingale.
ScaledPathBundle scale(const EventLog& log, const SystemParams& params, double lambda0,
                       std::span<const double> grid);

/// max_{i,j} |Qhat - (Qhat(0) + Ahat + drift t - Ghat - Rhat)|.
double scaled_conservation_residual(const ScaledPathBundle& b);
/// max_{i,j} |Ghat - (Mhat + delta IQhat)|.
double compensator_residual(const ScaledPathBundle& b);

/// Uniform grid 0 = t_0 < ... < t_N = T.
std::vector<double> uniform_grid(double T, std::size_t N);

/// Length-weighted share of grid intervals (t_{j-1}, t_j] whose right-end value
/// satisfies |path| <= eps. On a uniform grid this is #{j >= 1 : |path_j| <= eps} / N.
double occupation_at_zero(std::span<const double> path, std::span<const double> grid, double eps);

/// max over grid columns of the Euclidean norm of (a - b). Shapes must match.
double sup_norm(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// sup { |x(t) - x(s)| : |t - s| <= h } over grid samples.
double modulus_of_continuity(std::span<const double> path, std::span<const double> grid, double h);

/// Long format: t,series,category,value (category 1-based; 0 for scalar series).
void write_bundle_csv(std::ostream& os, const ScaledPathBundle& b);

}  // namespace matchq
