#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/SparseCore>

#include "matchq/params.hpp"

namespace matchq {

/// Queue-length chain restricted to states with at least one empty queue and
/// every coordinate <= cap. Arrivals that would exceed the cap are dropped.
class TruncatedCTMC {
public:
    using Generator = Eigen::SparseMatrix<double, Eigen::RowMajor>;

    std::size_t K() const { return K_; }
    std::uint32_t cap() const { return cap_; }
    std::size_t size() const { return states_.size() / K_; }

    std::span<const std::uint32_t> state(std::size_t index) const {
        return {states_.data() + index * K_, K_};
    }
    /// Index of `s` in the enumeration; nullopt if s is outside the truncated space.
    std::optional<std::size_t> index_of(std::span<const std::uint32_t> s) const;
    std::optional<std::size_t> index_of(std::span<const std::int64_t> s) const;

    /// Full generator including the diagonal (rows sum to zero).
    const Generator& generator() const { return generator_; }
    /// Total off-diagonal rate out of state `index`.
    double exit_rate(std::size_t index) const { return -generator_.coeff(index, index); }
    /// Rate of the direct transition from -> to (0 when none).
    double rate(std::size_t from, std::size_t to) const { return generator_.coeff(from, to); }

    /// (A f)(s) for every state s, f given per state.
    std::vector<double> apply_generator(std::span<const double> f) const;

    friend TruncatedCTMC build_truncated_ctmc(const SystemParams&, std::uint32_t, std::size_t);

private:
    std::size_t K_ = 0;
    std::uint32_t cap_ = 0;
    std::vector<std::uint32_t> states_;      // size() * K, row per state
    std::vector<std::int64_t> dense_index_;  // mixed-radix code -> state index or -1
    Generator generator_;

    std::size_t code(std::span<const std::uint32_t> s) const;
};

/// Default ceiling on (cap+1)^K, the size of the dense lookup table.
inline constexpr std::size_t kDefaultCtmcLimit = std::size_t{1} << 26;

/// Enumerates the truncated state space and its rate structure. All
/// components are mortal (rate s_i delta_i). Throws CapacityError when
/// (cap+1)^K exceeds `limit`.
TruncatedCTMC build_truncated_ctmc(const SystemParams& params, std::uint32_t cap,
                                   std::size_t limit = kDefaultCtmcLimit);

/// Distribution at time t from p0 by uniformization; the Poisson tail is cut
/// once the neglected mass is below tol.
std::vector<double> transient_distribution(const TruncatedCTMC& ctmc, std::span<const double> p0,
                                           double t, double tol);

std::vector<double> point_mass(const TruncatedCTMC& ctmc, std::span<const std::uint32_t> s);

/// E[s_i] under `dist`.
double coordinate_mean(const TruncatedCTMC& ctmc, std::span<const double> dist, std::size_t i);

/// Total variation distance 0.5 sum |p - q| (equal lengths required).
double total_variation(std::span<const double> p, std::span<const double> q);

}  // namespace matchq
