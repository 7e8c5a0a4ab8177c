#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "matchq/error.hpp"
#include "matchq/limit.hpp"
#include "matchq/stats.hpp"

using namespace matchq;

namespace {
LimitParams lp(std::vector<double> x, std::vector<double> beta, std::vector<double> sigma,
               std::vector<double> delta) {
    LimitParams p;
    p.K = x.size();
    p.x = std::move(x);
    p.beta = std::move(beta);
    p.sigma = std::move(sigma);
    p.delta = std::move(delta);
    return p;
}

LimitParams random_params(std::size_t K, std::mt19937_64& gen, bool abandon = true) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    LimitParams p;
    p.K = K;
    for (std::size_t i = 0; i < K; ++i) {
        p.x.push_back(3.0 * u(gen));
        p.beta.push_back(-2.0 + 4.0 * u(gen));
        p.sigma.push_back(0.5 + 1.5 * u(gen));
        p.delta.push_back(abandon ? 2.0 * u(gen) : 0.0);
    }
    p.x[0] = 0.0;
    return p;
}

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }
}  // namespace

TEST_CASE("noise rows are nested across K and have the right scale") {
    const auto big = make_noise(5, 2000, 2.0, 31);
    const auto small = make_noise(2, 2000, 2.0, 31);
    CHECK(big.dW.topRows(2) == small.dW);
    RunningStats s;
    for (Eigen::Index j = 0; j < big.dW.cols(); ++j) s.add(big.dW(3, j));
    CHECK(s.variance() == doctest::Approx(big.dt()).epsilon(0.1));
    CHECK(big.brownian().col(0).isZero());
    CHECK(big.brownian()(1, 2000) == doctest::Approx(big.dW.row(1).sum()));
    CHECK(make_noise(2, 10, 1.0, 1).dW != make_noise(2, 10, 1.0, 2).dW);
}

TEST_CASE("coarsening keeps the Brownian path") {
    const auto fine = make_noise(3, 500, 1.0, 8);
    const auto coarse = coarsen(fine, 2);
    CHECK(coarse.N == 250);
    const auto Wf = fine.brownian();
    const auto Wc = coarse.brownian();
    for (Eigen::Index j = 0; j <= 250; ++j) CHECK((Wc.col(j) - Wf.col(2 * j)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK_THROWS_AS(coarsen(fine, 3), ArgumentError);
}

TEST_CASE("deterministic relaxation: one occupied queue decays by the trapezoid factor") {
    const auto p = lp({2.0, 0.0}, {0.0, 0.0}, {1.0, 1.0}, {1.0, 1.0});
    const std::size_t N = 250;
    const auto path = solve_explicit(p, zero_noise(2, N, 1.0));
    const double a = 0.5 / N;
    for (std::size_t j = 0; j <= N; ++j) {
        const double t = path.grid[j];
        CHECK(path.X(0, j) == doctest::Approx(2.0 * std::pow((1 - a) / (1 + a), j)).epsilon(1e-12));
        CHECK(std::abs(path.X(0, j) - 2.0 * std::exp(-t)) < 1e-5);
        CHECK(path.X(1, j) == 0.0);
        CHECK(path.R(j) == 0.0);
    }
}

TEST_CASE("no drift, no noise, no abandonment: X is the driving path minus its minimum") {
    const auto p = lp({1.0, 0.0, 0.5}, {0.5, 2.0, -1.0}, {1, 1, 1}, {0, 0, 0});
    const auto path = solve_explicit(p, zero_noise(3, 100, 1.0));
    for (std::size_t j = 0; j <= 100; ++j) {
        const double t = path.grid[j];
        const double a = 1 + 0.5 * t, b = 2 * t, c = 0.5 - t;
        const double m = std::min({a, b, c});
        CHECK(path.X(0, j) == doctest::Approx(a - m));
        CHECK(path.X(1, j) == doctest::Approx(b - m));
        CHECK(path.X(2, j) == doctest::Approx(c - m));
        CHECK(path.R(j) == doctest::Approx(m));
    }
}

TEST_CASE("closed form and explicit solver agree without abandonment") {
    std::mt19937_64 gen(3);
    for (std::size_t K : {2u, 3u, 4u})
        for (RngSeed s = 0; s < 20; ++s) {
            const auto p = random_params(K, gen, false);
            const auto noise = make_noise(K, 250, 1.0, s);
            const auto a = solve_explicit(p, noise);
            const auto b = solve_no_abandonment(p, noise);
            CHECK(max_abs(a.X - b.X) < 1e-12);
            CHECK(a.X.colwise().minCoeff().cwiseAbs().maxCoeff() == 0.0);
        }
    auto p = lp({0, 1}, {0, 0}, {1, 1}, {0.1, 0});
    CHECK_THROWS_AS(solve_no_abandonment(p, zero_noise(2, 10, 1.0)), ArgumentError);
}

TEST_CASE("coupling: min X is zero and X stays nonnegative") {
    std::mt19937_64 gen(4);
    for (std::size_t K : {2u, 3u, 5u, 20u})
        for (RngSeed s = 0; s < 10; ++s) {
            const auto p = random_params(K, gen);
            const auto noise = make_noise(K, 250, 1.0, s);
            const auto path = solve_explicit(p, noise);
            const double tol = coupling_tolerance(p, 1.0);
            CHECK(path.X.colwise().minCoeff().cwiseAbs().maxCoeff() <= tol);
            CHECK(path.X.minCoeff() >= -tol);
            // R(t) = min_k (xi_k - G_k)
            const auto xi = driving_path(p, noise);
            for (Eigen::Index j = 0; j <= 250; ++j)
                CHECK(std::abs(path.R(j) - (xi.col(j) - path.G.col(j)).minCoeff()) < 1e-12);
        }
}

TEST_CASE("explicit scheme and its stability guard") {
    const auto p = lp({0, 1}, {0, 0}, {1, 1}, {300.0, 1.0});
    CHECK_THROWS_AS(solve_explicit(p, zero_noise(2, 250, 1.0), Scheme::Explicit), ConfigurationError);
    const auto q = lp({0, 1}, {0, 0}, {1, 1}, {1.0, 1.0});
    const auto noise = make_noise(2, 4000, 1.0, 5);
    const auto e = solve_explicit(q, noise, Scheme::Explicit);
    const auto s = solve_explicit(q, noise, Scheme::SemiImplicit);
    CHECK(max_abs(e.X - s.X) < 1e-2);
}

TEST_CASE("fixed point: both starts reach the semi-implicit solution") {
    std::mt19937_64 gen(5);
    for (std::size_t K : {2u, 3u, 4u}) {
        const auto p = random_params(K, gen);
        const auto noise = make_noise(K, 250, 1.0, 17);
        FixedPointOptions o;
        o.tol = 1e-8;
        const auto z = solve_fixed_point(p, noise, o);
        o.init = InitialGuess::Driving;
        const auto d = solve_fixed_point(p, noise, o);
        CHECK(max_abs(z.path.X - d.path.X) < 2e-8);
        CHECK(max_abs(z.path.X - solve_explicit(p, noise).X) < 1e-7);
        const double L = p.max_delta();
        const double bound = (1.0 + K) * std::sqrt(double(K)) * L;
        CHECK(z.contraction_bound == doctest::Approx(bound));
        if (bound >= 1.0) CHECK(z.windows > 1);
        else CHECK(z.windows == 1);
    }
}

TEST_CASE("fixed point: small delta needs no windows; zero delta is one sweep") {
    const auto p = lp({0, 1}, {0, 0}, {1, 1}, {0.05, 0.05});
    const auto noise = make_noise(2, 100, 1.0, 2);
    const auto r = solve_fixed_point(p, noise);
    CHECK(r.windows == 1);
    const auto q = lp({0, 1}, {0, 0}, {1, 1}, {0, 0});
    const auto r0 = solve_fixed_point(q, noise);
    CHECK(r0.iterations == 1);
    CHECK(max_abs(r0.path.X - solve_no_abandonment(q, noise).X) < 1e-12);
}

TEST_CASE("fixed point: custom drift and iteration cap") {
    const auto p = lp({0, 1}, {0, 0}, {1, 1}, {1, 1});
    const auto noise = make_noise(2, 100, 1.0, 2);
    FixedPointOptions o;
    o.drift = [&](std::size_t i, double x) { return p.delta[i] * x; };
    o.lipschitz = 1.0;
    CHECK(max_abs(solve_fixed_point(p, noise, o).path.X - solve_fixed_point(p, noise).path.X) < 1e-9);
    o.max_iter = 2;
    o.tol = 1e-14;
    try {
        solve_fixed_point(p, noise, o);
        FAIL("expected ConvergenceError");
    } catch (const ConvergenceError& e) {
        CHECK(e.residual() > 0.0);
    }
}

TEST_CASE("grid refinement shrinks the discretization gap") {
    const auto p = lp({0, 0.5, 1.0}, {1, -1, 0.5}, {1, 1, 1}, {1.0, 0.5, 2.0});
    const auto fine = make_noise(3, 1000, 1.0, 12);
    const auto x1000 = solve_explicit(p, fine);
    const auto x500 = solve_explicit(p, coarsen(fine, 2));
    const auto x250 = solve_explicit(p, coarsen(fine, 4));
    double d1 = 0, d2 = 0;
    for (Eigen::Index j = 0; j <= 250; ++j) {
        d1 = std::max(d1, (x250.X.col(j) - x1000.X.col(4 * j)).norm());
        d2 = std::max(d2, (x500.X.col(2 * j) - x1000.X.col(4 * j)).norm());
    }
    CHECK(d2 < d1);
}

TEST_CASE("layered semimartingale construction") {
    std::mt19937_64 gen(6);
    for (std::size_t K : {2u, 3u, 4u, 5u})
        for (RngSeed s = 0; s < 10; ++s) {
            const auto p = random_params(K, gen, false);
            const auto noise = make_noise(K, 250, 1.0, s);
            for (std::size_t cat : {std::size_t{0}, K - 1}) {
                const auto r = semimartingale_decomposition(p, noise, cat);
                CHECK(r.identity_residual < 1e-12);
                CHECK(r.layered_residual < 1e-12);
                CHECK(r.local_time.size() == K - 1);
                for (double l : r.local_time) CHECK(l >= 0.0);
                CHECK(std::abs(r.X_closed(0) - (p.x[cat] - *std::min_element(p.x.begin(), p.x.end()))) < 1e-12);
            }
        }
}

TEST_CASE("B correlations follow the shared last coordinate") {
    const auto p = lp({0, 0, 0}, {0, 0, 0}, {1.0, 2.0, 3.0}, {0, 0, 0});
    const auto r = semimartingale_decomposition(p, make_noise(3, 50, 1.0, 1));
    REQUIRE(r.B_correlation.rows() == 2);
    // layers pair coordinates (1,3) and (2,3); correlation s3^2 / sqrt((s1^2+s3^2)(s2^2+s3^2))
    CHECK(r.B_correlation(0, 1) == doctest::Approx(9.0 / std::sqrt(10.0 * 13.0)));
    CHECK(r.B_correlation(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("Tanaka reconstruction tightens on a fine grid") {
    const auto p = lp({0, 0.3}, {0.2, -0.1}, {1, 1}, {0, 0});
    double coarse = 0.0, fine = 0.0;
    for (RngSeed s = 0; s < 5; ++s) {
        coarse += semimartingale_decomposition(p, make_noise(2, 500, 1.0, s)).decomposition_residual;
        fine += semimartingale_decomposition(p, make_noise(2, 50000, 1.0, s)).decomposition_residual;
    }
    CHECK(fine < coarse);
    CHECK(fine / 5 < 0.15);
}

TEST_CASE("limit csv") {
    const auto p = lp({0, 1}, {0, 0}, {1, 1}, {1, 1});
    std::ostringstream os;
    write_limit_csv(os, solve_explicit(p, zero_noise(2, 4, 1.0)));
    CHECK(os.str().rfind("t,series,category,value\n", 0) == 0);
}
