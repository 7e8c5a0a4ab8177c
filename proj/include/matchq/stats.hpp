#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace matchq {

/// Welford accumulator; merge() is associative so partial results from
/// parallel workers can be combined in any order.
class RunningStats {
public:
    void add(double x);
    void merge(const RunningStats& other);

    std::size_t count() const { return n_; }
    double mean() const { return mean_; }
    /// Unbiased sample variance (0 for fewer than two samples).
    double variance() const;
    double standard_error() const;

private:
    std::size_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

RunningStats summarize(std::span<const double> xs);

/// Two-sample Kolmogorov-Smirnov statistic sup_x |F_a(x) - F_b(x)|; ties handled exactly.
double ks_distance(std::vector<double> a, std::vector<double> b);

/// Spearman rank correlation with average ranks for ties. Throws
/// UndefinedStatisticError when either sample is constant.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace matchq
