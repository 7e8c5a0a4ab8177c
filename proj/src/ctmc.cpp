#include "matchq/ctmc.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Core>

#include "matchq/error.hpp"

namespace matchq {

std::size_t TruncatedCTMC::code(std::span<const std::uint32_t> s) const {
    std::size_t c = 0;
    for (std::size_t j = 0; j < K_; ++j) c = c * (cap_ + 1) + s[j];
    return c;
}

std::optional<std::size_t> TruncatedCTMC::index_of(std::span<const std::uint32_t> s) const {
    if (s.size() != K_) return std::nullopt;
    for (auto v : s)
        if (v > cap_) return std::nullopt;
    const auto idx = dense_index_[code(s)];
    if (idx < 0) return std::nullopt;
    return static_cast<std::size_t>(idx);
}

std::optional<std::size_t> TruncatedCTMC::index_of(std::span<const std::int64_t> s) const {
    if (s.size() != K_) return std::nullopt;
    std::vector<std::uint32_t> u(K_);
    for (std::size_t j = 0; j < K_; ++j) {
        if (s[j] < 0 || s[j] > static_cast<std::int64_t>(cap_)) return std::nullopt;
        u[j] = static_cast<std::uint32_t>(s[j]);
    }
    return index_of(std::span<const std::uint32_t>(u));
}

std::vector<double> TruncatedCTMC::apply_generator(std::span<const double> f) const {
    if (f.size() != size()) throw ArgumentError("function length does not match the state count");
    Eigen::Map<const Eigen::VectorXd> fv(f.data(), static_cast<Eigen::Index>(f.size()));
    Eigen::VectorXd af = generator_ * fv;
    return {af.data(), af.data() + af.size()};
}

TruncatedCTMC build_truncated_ctmc(const SystemParams& params, std::uint32_t cap, std::size_t limit) {
    params.validate();
    if (cap < 1) throw ArgumentError("truncation cap must be at least 1");

    const std::size_t K = params.K;
    std::size_t table = 1;
    for (std::size_t j = 0; j < K; ++j) {
        if (table > limit / (cap + 1)) {
            std::ostringstream os;
            os << "truncated state space (cap " << cap << ", K " << K << ") exceeds the limit of "
               << limit << " table entries";
            throw CapacityError(os.str());
        }
        table *= cap + 1;
    }

    TruncatedCTMC c;
    c.K_ = K;
    c.cap_ = cap;
    c.dense_index_.assign(table, -1);

    std::vector<std::uint32_t> s(K, 0);
    for (std::size_t code = 0; code < table; ++code) {
        std::size_t rem = code;
        for (std::size_t j = K; j-- > 0;) {
            s[j] = static_cast<std::uint32_t>(rem % (cap + 1));
            rem /= cap + 1;
        }
        if (std::find(s.begin(), s.end(), 0u) == s.end()) continue;
        c.dense_index_[code] = static_cast<std::int64_t>(c.states_.size() / K);
        c.states_.insert(c.states_.end(), s.begin(), s.end());
    }

    const std::size_t n_states = c.size();
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(n_states * (2 * K + 1));
    std::vector<std::uint32_t> next(K);
    for (std::size_t idx = 0; idx < n_states; ++idx) {
        const auto cur = c.state(idx);
        double out = 0.0;
        auto add = [&](double rate) {
            const auto to = c.index_of(std::span<const std::uint32_t>(next));
            if (!to) throw InvariantViolation("transition leaves the enumerated state space");
            if (*to == idx) return;
            triplets.emplace_back(static_cast<int>(idx), static_cast<int>(*to), rate);
            out += rate;
        };
        for (std::size_t i = 0; i < K; ++i) {
            bool others_full = true;
            for (std::size_t j = 0; j < K; ++j)
                if (j != i && cur[j] == 0) others_full = false;
            std::copy(cur.begin(), cur.end(), next.begin());
            if (others_full) {
                for (std::size_t j = 0; j < K; ++j)
                    if (j != i) --next[j];
                add(params.lambda[i]);
            } else if (cur[i] < cap) {
                ++next[i];
                add(params.lambda[i]);
            }
            if (cur[i] > 0) {
                std::copy(cur.begin(), cur.end(), next.begin());
                --next[i];
                add(static_cast<double>(cur[i]) * params.delta[i]);
            }
        }
        triplets.emplace_back(static_cast<int>(idx), static_cast<int>(idx), -out);
    }
    c.generator_.resize(static_cast<Eigen::Index>(n_states), static_cast<Eigen::Index>(n_states));
    c.generator_.setFromTriplets(triplets.begin(), triplets.end());
    c.generator_.makeCompressed();
    return c;
}

std::vector<double> transient_distribution(const TruncatedCTMC& ctmc, std::span<const double> p0,
                                           double t, double tol) {
    if (t < 0.0) throw ArgumentError("transient time must be nonnegative");
    if (!(tol > 0.0)) throw ArgumentError("tolerance must be positive");
    if (p0.size() != ctmc.size()) throw ArgumentError("initial distribution has the wrong length");
    double mass = 0.0;
    for (double v : p0) {
        if (v < 0.0) throw ArgumentError("initial distribution has a negative entry");
        mass += v;
    }
    if (std::abs(mass - 1.0) > 1e-9) throw ArgumentError("initial distribution does not sum to 1");

    const auto n = static_cast<Eigen::Index>(ctmc.size());
    double q = 0.0;
    for (std::size_t i = 0; i < ctmc.size(); ++i) q = std::max(q, ctmc.exit_rate(i));
    if (t == 0.0 || q == 0.0) return {p0.begin(), p0.end()};

    // Row vector p P^k with P = I + Q/q, propagated as columns of the transpose.
    const Eigen::SparseMatrix<double> qt = ctmc.generator().transpose();
    Eigen::VectorXd term = Eigen::Map<const Eigen::VectorXd>(p0.data(), n);
    Eigen::VectorXd result = Eigen::VectorXd::Zero(n);

    const double lam = q * t;
    double covered = 0.0;
    for (std::uint64_t k = 0;; ++k) {
        const double kd = static_cast<double>(k);
        const double w = std::exp(-lam + kd * std::log(lam) - std::lgamma(kd + 1.0));
        result += w * term;
        covered += w;
        if (1.0 - covered < tol && kd >= lam) break;
        if (k > 10'000'000) throw ConvergenceError("uniformization did not reach the tolerance", 1.0 - covered);
        term += (qt * term) / q;
    }
    return {result.data(), result.data() + result.size()};
}

std::vector<double> point_mass(const TruncatedCTMC& ctmc, std::span<const std::uint32_t> s) {
    const auto idx = ctmc.index_of(s);
    if (!idx) throw ArgumentError("state is outside the truncated state space");
    std::vector<double> p(ctmc.size(), 0.0);
    p[*idx] = 1.0;
    return p;
}

double coordinate_mean(const TruncatedCTMC& ctmc, std::span<const double> dist, std::size_t i) {
    double m = 0.0;
    for (std::size_t k = 0; k < ctmc.size(); ++k) m += dist[k] * ctmc.state(k)[i];
    return m;
}

double total_variation(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw ArgumentError("distributions have different lengths");
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
    return 0.5 * s;
}

}  // namespace matchq
