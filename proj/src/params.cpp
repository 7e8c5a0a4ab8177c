#include "matchq/params.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "matchq/error.hpp"

namespace matchq {
namespace {

void require_size(const char* what, std::size_t got, std::size_t K) {
    if (got != K) {
        std::ostringstream os;
        os << what << " has " << got << " entries, expected K=" << K;
        throw ParameterError(os.str());
    }
}

template <class Pred>
void require_each(const char* what, const std::vector<double>& v, Pred ok, const char* rule) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i]) || !ok(v[i])) {
            std::ostringstream os;
            os << what << "[" << i << "] = " << v[i] << " must be " << rule;
            throw ParameterError(os.str());
        }
    }
}

}  // namespace

void SystemParams::validate() const {
    if (K < 2) throw ParameterError("K must be at least 2");
    if (n < 1) throw ParameterError("scale index n must be positive");
    require_size("lambda", lambda.size(), K);
    require_size("delta", delta.size(), K);
    require_size("q0", q0.size(), K);
    require_each("lambda", lambda, [](double v) { return v > 0.0; }, "positive");
    require_each("delta", delta, [](double v) { return v > 0.0; }, "positive");
    if (std::none_of(q0.begin(), q0.end(), [](std::uint64_t q) { return q == 0; }))
        throw ParameterError("q0 must contain at least one empty queue");
}

void LimitParams::validate() const {
    if (K < 2) throw ParameterError("K must be at least 2");
    require_size("x", x.size(), K);
    require_size("beta", beta.size(), K);
    require_size("sigma", sigma.size(), K);
    require_size("delta", delta.size(), K);
    require_each("x", x, [](double v) { return v >= 0.0; }, "nonnegative");
    require_each("beta", beta, [](double) { return true; }, "finite");
    require_each("sigma", sigma, [](double v) { return v > 0.0; }, "positive");
    require_each("delta", delta, [](double v) { return v >= 0.0; }, "nonnegative");
    if (std::none_of(x.begin(), x.end(), [](double v) { return v == 0.0; }))
        throw ParameterError("x must contain at least one zero entry");
}

bool LimitParams::no_abandonment() const {
    return std::all_of(delta.begin(), delta.end(), [](double d) { return d == 0.0; });
}

double LimitParams::max_delta() const {
    return delta.empty() ? 0.0 : *std::max_element(delta.begin(), delta.end());
}

double LimitParams::max_sigma() const {
    return sigma.empty() ? 0.0 : *std::max_element(sigma.begin(), sigma.end());
}

void RegimeFamily::validate() const {
    if (K < 2) throw ParameterError("K must be at least 2");
    if (!(lambda0 > 0.0) || !std::isfinite(lambda0)) throw ParameterError("lambda0 must be positive");
    require_size("beta", beta.size(), K);
    require_size("delta", delta_limit.size(), K);
    require_size("x", x.size(), K);
    require_each("beta", beta, [](double) { return true; }, "finite");
    require_each("delta", delta_limit, [](double v) { return v > 0.0; }, "positive");
    require_each("x", x, [](double v) { return v >= 0.0; }, "nonnegative");
    if (std::none_of(x.begin(), x.end(), [](double v) { return v == 0.0; }))
        throw ParameterError("x must contain at least one zero entry");
    if (n_list.empty()) throw ParameterError("n_list must not be empty");
    for (auto n : n_list)
        if (n == 0) throw ParameterError("n_list entries must be positive");
}

SystemParams make_regime_member(const RegimeFamily& f, std::uint64_t n) {
    f.validate();
    if (std::find(f.n_list.begin(), f.n_list.end(), n) == f.n_list.end())
        throw ParameterError("n=" + std::to_string(n) + " is not in the family's n_list");

    const double nn = static_cast<double>(n);
    const double root = std::sqrt(nn);

    SystemParams p;
    p.K = f.K;
    p.n = n;
    p.lambda.resize(f.K);
    p.q0.resize(f.K);
    p.delta = f.delta_limit;
    for (std::size_t i = 0; i < f.K; ++i) {
        p.lambda[i] = f.lambda0 * nn + f.beta[i] * root;
        if (!(p.lambda[i] > 0.0)) {
            std::ostringstream os;
            os << "arrival rate of category " << i << " is " << p.lambda[i] << " at n=" << n
               << " (lambda0 n + beta sqrt(n) must be positive)";
            throw ParameterError(os.str());
        }
        p.q0[i] = static_cast<std::uint64_t>(std::llround(f.x[i] * root));
    }
    auto smallest = std::min_element(p.q0.begin(), p.q0.end());
    *smallest = 0;
    return p;
}

LimitParams limit_of(const RegimeFamily& f) {
    f.validate();
    LimitParams lp;
    lp.K = f.K;
    lp.x = f.x;
    lp.beta = f.beta;
    lp.sigma.assign(f.K, std::sqrt(f.lambda0));
    lp.delta = f.delta_limit;
    return lp;
}

}  // namespace matchq
