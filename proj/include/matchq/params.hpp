#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace matchq {

/// Rates and initial condition of one pre-limit matching system (scale index n).
struct SystemParams {
    std::size_t K = 2;
    std::uint64_t n = 1;
    std::vector<double> lambda;        // arrival rate per category
    std::vector<double> delta;         // individual patience rate per category
    std::vector<std::uint64_t> q0;     // initial queue lengths

    /// Throws ParameterError when any invariant fails.
    void validate() const;
};

/// Coefficients of the coupled stochastic integral equation
///   X(t) = x + beta t + diag(sigma) W(t) - int_0^t delta . X ds - R(t) 1.
/// delta may be zero (no-abandonment model).
struct LimitParams {
    std::size_t K = 2;
    std::vector<double> x;
    std::vector<double> beta;
    std::vector<double> sigma;
    std::vector<double> delta;

    void validate() const;
    bool no_abandonment() const;
    double max_delta() const;
    double max_sigma() const;
};

/// Heavy-traffic family lambda_i^n = lambda0 n + beta_i sqrt(n), indexed by n_list.
struct RegimeFamily {
    std::size_t K = 2;
    double lambda0 = 1.0;
    std::vector<double> beta;
    std::vector<double> delta_limit;
    std::vector<double> x;
    std::vector<std::uint64_t> n_list;

    void validate() const;
};

/// Member n of the family. delta is held constant in n; q0_i = round(x_i sqrt n)
/// with the smallest entry forced to zero.
SystemParams make_regime_member(const RegimeFamily& f, std::uint64_t n);

/// Limit coefficients of the family, with sigma_i = sqrt(lambda0) (Poisson FCLT).
LimitParams limit_of(const RegimeFamily& f);

}  // namespace matchq
