#include "matchq/limit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>

#include "matchq/error.hpp"

namespace matchq {

std::vector<double> NoiseDraws::grid() const {
    std::vector<double> g(N + 1);
    for (std::size_t j = 0; j <= N; ++j) g[j] = T * static_cast<double>(j) / static_cast<double>(N);
    return g;
}

Eigen::MatrixXd NoiseDraws::brownian() const {
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(dW.rows(), static_cast<Eigen::Index>(N + 1));
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(N); ++j) W.col(j + 1) = W.col(j) + dW.col(j);
    return W;
}

NoiseDraws make_noise(std::size_t K, std::size_t N, double T, RngSeed seed) {
    if (K == 0 || N == 0 || !(T > 0.0)) throw ArgumentError("noise needs K >= 1, N >= 1 and T > 0");
    NoiseDraws nd;
    nd.T = T;
    nd.N = N;
    nd.seed = seed;
    nd.dW.resize(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(N));
    const double sd = std::sqrt(T / static_cast<double>(N));
    for (std::size_t i = 0; i < K; ++i) {
        Rng rng = make_rng(derive_seed(seed, i));
        std::normal_distribution<double> normal(0.0, sd);
        for (std::size_t j = 0; j < N; ++j)
            nd.dW(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = normal(rng);
    }
    return nd;
}

NoiseDraws zero_noise(std::size_t K, std::size_t N, double T) {
    if (K == 0 || N == 0 || !(T > 0.0)) throw ArgumentError("noise needs K >= 1, N >= 1 and T > 0");
    NoiseDraws nd;
    nd.T = T;
    nd.N = N;
    nd.dW = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(N));
    return nd;
}

NoiseDraws coarsen(const NoiseDraws& fine, std::size_t factor) {
    if (factor == 0 || fine.N % factor != 0)
        throw ArgumentError("coarsening factor must divide the number of steps");
    NoiseDraws c;
    c.T = fine.T;
    c.N = fine.N / factor;
    c.seed = fine.seed;
    c.dW = Eigen::MatrixXd::Zero(fine.dW.rows(), static_cast<Eigen::Index>(c.N));
    for (std::size_t j = 0; j < fine.N; ++j)
        c.dW.col(static_cast<Eigen::Index>(j / factor)) += fine.dW.col(static_cast<Eigen::Index>(j));
    return c;
}

namespace {

void check_shapes(const LimitParams& p, const NoiseDraws& noise) {
    p.validate();
    if (noise.K() < p.K) throw ArgumentError("noise has fewer categories than the parameters");
    if (noise.N == 0) throw ArgumentError("noise grid is empty");
}

LimitPath empty_path(const LimitParams& p, const NoiseDraws& noise) {
    const auto K = static_cast<Eigen::Index>(p.K);
    const auto cols = static_cast<Eigen::Index>(noise.N + 1);
    LimitPath path;
    path.grid = noise.grid();
    path.X = Eigen::MatrixXd::Zero(K, cols);
    path.G = Eigen::MatrixXd::Zero(K, cols);
    path.R = Eigen::VectorXd::Zero(cols);
    path.argmin.assign(noise.N + 1, 0);
    for (Eigen::Index i = 0; i < K; ++i) path.X(i, 0) = p.x[static_cast<std::size_t>(i)];
    return path;
}

// R_j = min_i (xi_i - G_i) at column j, and X = xi - G - R. Lowest index wins ties.
void couple(const Eigen::MatrixXd& xi, LimitPath& path, Eigen::Index j) {
    double r = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (Eigen::Index i = 0; i < xi.rows(); ++i) {
        const double v = xi(i, j) - path.G(i, j);
        if (v < r) {
            r = v;
            arg = static_cast<std::size_t>(i);
        }
    }
    path.R(j) = r;
    path.argmin[static_cast<std::size_t>(j)] = arg;
    for (Eigen::Index i = 0; i < xi.rows(); ++i) path.X(i, j) = xi(i, j) - path.G(i, j) - r;
}

}  // namespace

Eigen::MatrixXd driving_path(const LimitParams& p, const NoiseDraws& noise) {
    check_shapes(p, noise);
    const Eigen::MatrixXd W = noise.brownian();
    const auto grid = noise.grid();
    Eigen::MatrixXd xi(static_cast<Eigen::Index>(p.K), static_cast<Eigen::Index>(noise.N + 1));
    for (std::size_t i = 0; i < p.K; ++i)
        for (std::size_t j = 0; j <= noise.N; ++j) {
            const auto ii = static_cast<Eigen::Index>(i);
            const auto jj = static_cast<Eigen::Index>(j);
            xi(ii, jj) = p.x[i] + p.beta[i] * grid[j] + p.sigma[i] * W(ii, jj);
        }
    return xi;
}

double coupling_tolerance(const LimitParams& p, double T) {
    return 1e-9 * (1.0 + p.max_sigma() * std::sqrt(T));
}

LimitPath solve_explicit(const LimitParams& p, const NoiseDraws& noise, Scheme scheme) {
    check_shapes(p, noise);
    const double dt = noise.dt();
    if (!(dt * p.max_delta() < 1.0)) {
        std::ostringstream os;
        os << "step dt=" << dt << " with max delta=" << p.max_delta()
           << " violates dt * max delta < 1; refine the grid";
        throw ConfigurationError(os.str());
    }

    const Eigen::MatrixXd xi = driving_path(p, noise);
    LimitPath path = empty_path(p, noise);
    const auto K = static_cast<Eigen::Index>(p.K);
    Eigen::VectorXd half(K);
    for (Eigen::Index i = 0; i < K; ++i) half(i) = 0.5 * p.delta[static_cast<std::size_t>(i)] * dt;

    for (Eigen::Index j = 1; j <= static_cast<Eigen::Index>(noise.N); ++j) {
        if (scheme == Scheme::SemiImplicit) {
            // With z_i = xi_i - G_i(t_{j-1}) - a_i X_i(t_{j-1}) the step equations
            // X_i = z_i - a_i X_i - R, R = min_k (z_k - a_k X_k) are solved by
            // R = min_k z_k, X_i = (z_i - R) / (1 + a_i).
            Eigen::VectorXd z = xi.col(j) - path.G.col(j - 1) - half.cwiseProduct(path.X.col(j - 1));
            const double r = z.minCoeff();
            for (Eigen::Index i = 0; i < K; ++i) {
                const double x_new = (z(i) - r) / (1.0 + half(i));
                path.G(i, j) = path.G(i, j - 1) + half(i) * (path.X(i, j - 1) + x_new);
            }
        } else {
            path.G.col(j) = path.G.col(j - 1) + 2.0 * half.cwiseProduct(path.X.col(j - 1));
        }
        couple(xi, path, j);
    }
    return path;
}

FixedPointResult solve_fixed_point(const LimitParams& p, const NoiseDraws& noise,
                                   const FixedPointOptions& opts) {
    check_shapes(p, noise);
    if (!(opts.tol > 0.0)) throw ArgumentError("fixed-point tolerance must be positive");
    if (!(opts.window_factor > 0.0 && opts.window_factor < 1.0))
        throw ArgumentError("window contraction factor must lie in (0, 1)");

    DriftFn h = opts.drift;
    double L = opts.lipschitz;
    if (!h) {
        h = [&p](std::size_t i, double x) { return p.delta[i] * x; };
        L = p.max_delta();
    }

    const Eigen::MatrixXd xi = driving_path(p, noise);
    const std::size_t N = noise.N;
    const double dt = noise.dt();
    const auto K = static_cast<Eigen::Index>(p.K);
    const double Kd = static_cast<double>(p.K);

    FixedPointResult out;
    out.contraction_bound = (1.0 + Kd) * std::sqrt(Kd) * L * noise.T;
    std::size_t windows = 1;
    if (out.contraction_bound >= 1.0)
        windows = std::min<std::size_t>(
            N, static_cast<std::size_t>(std::ceil(out.contraction_bound / opts.window_factor)));
    out.windows = windows;

    LimitPath path = empty_path(p, noise);
    Eigen::MatrixXd next = path.X;
    std::size_t start = 0;
    for (std::size_t w = 0; w < windows; ++w) {
        const std::size_t stop = (w + 1 == windows) ? N : (N * (w + 1)) / windows;
        if (stop <= start) continue;
        const auto a = static_cast<Eigen::Index>(start);
        const auto b = static_cast<Eigen::Index>(stop);
        for (Eigen::Index j = a + 1; j <= b; ++j)
            {
            if (opts.init == InitialGuess::Zero) path.X.col(j).setZero();
            else path.X.col(j) = xi.col(j);
        }

        double residual = std::numeric_limits<double>::infinity();
        std::size_t iter = 0;
        while (residual >= opts.tol) {
            if (iter == opts.max_iter) {
                std::ostringstream os;
                os << "fixed-point iteration did not converge in " << opts.max_iter
                   << " sweeps (window " << w + 1 << "/" << windows << ", residual " << residual << ")";
                throw ConvergenceError(os.str(), residual);
            }
            ++iter;
            Eigen::VectorXd prev_h(K);
            for (Eigen::Index i = 0; i < K; ++i) prev_h(i) = h(static_cast<std::size_t>(i), path.X(i, a));
            residual = 0.0;
            for (Eigen::Index j = a + 1; j <= b; ++j) {
                Eigen::VectorXd cur_h(K);
                for (Eigen::Index i = 0; i < K; ++i) {
                    cur_h(i) = h(static_cast<std::size_t>(i), path.X(i, j));
                    path.G(i, j) = path.G(i, j - 1) + 0.5 * dt * (prev_h(i) + cur_h(i));
                }
                prev_h = cur_h;
                const Eigen::VectorXd old = path.X.col(j);
                couple(xi, path, j);
                next.col(j) = path.X.col(j);
                path.X.col(j) = old;
            }
            for (Eigen::Index j = a + 1; j <= b; ++j) {
                residual = std::max(residual, (next.col(j) - path.X.col(j)).cwiseAbs().maxCoeff());
                path.X.col(j) = next.col(j);
            }
            // A drift with Lipschitz constant 0 makes the map constant: one sweep is exact.
            if (L == 0.0) residual = 0.0;
        }
        out.iterations += iter;
        out.residual = std::max(out.residual, residual);
        start = stop;
    }
    out.path = std::move(path);
    return out;
}

LimitPath solve_no_abandonment(const LimitParams& p, const NoiseDraws& noise) {
    check_shapes(p, noise);
    if (!p.no_abandonment()) throw ArgumentError("closed form requires delta = 0");
    const Eigen::MatrixXd xi = driving_path(p, noise);
    LimitPath path = empty_path(p, noise);
    for (Eigen::Index j = 0; j < xi.cols(); ++j) couple(xi, path, j);
    return path;
}

namespace {

// Occupation-time estimate of the local time at zero of a sampled path y:
// L(t_j) = (1 / 2 eps) sum_{k<j} 1[|y_k| <= eps] (y_{k+1} - y_k)^2,
// eps = dt^{1/4} sqrt(realized quadratic variation / T).
Eigen::VectorXd local_time(const Eigen::VectorXd& y, double dt, double T, double& eps) {
    const Eigen::Index n = y.size();
    double qv = 0.0;
    for (Eigen::Index k = 0; k + 1 < n; ++k) qv += (y(k + 1) - y(k)) * (y(k + 1) - y(k));
    eps = std::pow(dt, 0.25) * std::sqrt(qv / T);
    Eigen::VectorXd L = Eigen::VectorXd::Zero(n);
    if (eps <= 0.0) return L;
    for (Eigen::Index k = 0; k + 1 < n; ++k) {
        const double d = y(k + 1) - y(k);
        L(k + 1) = L(k) + (std::abs(y(k)) <= eps ? d * d : 0.0) / (2.0 * eps);
    }
    return L;
}

}  // namespace

SemimartingaleReport semimartingale_decomposition(const LimitParams& p, const NoiseDraws& noise,
                                                  std::size_t category) {
    check_shapes(p, noise);
    if (!p.no_abandonment()) throw ArgumentError("semimartingale decomposition requires delta = 0");
    if (category >= p.K) throw ArgumentError("category out of range");

    // Coordinate order with `category` first, the rest ascending.
    std::vector<std::size_t> order{category};
    for (std::size_t i = 0; i < p.K; ++i)
        if (i != category) order.push_back(i);

    const Eigen::MatrixXd xi_raw = driving_path(p, noise);
    const auto K = static_cast<Eigen::Index>(p.K);
    const auto cols = xi_raw.cols();
    Eigen::MatrixXd xi(K, cols);
    for (Eigen::Index r = 0; r < K; ++r) xi.row(r) = xi_raw.row(static_cast<Eigen::Index>(order[static_cast<std::size_t>(r)]));

    SemimartingaleReport rep;
    rep.category = category;
    rep.Y.resize(K - 1, cols);
    rep.eta.resize(K - 1, cols);
    auto pos = [](double v) { return v > 0.0 ? v : 0.0; };

    // Y_{K-1} = -xi_{K-1} + xi_K, eta_{K-1} = -xi_K + Y_{K-1}^+;
    // Y_l = -xi_l - eta_{l+1},   eta_l = eta_{l+1} + Y_l^+.   (1-based l)
    for (Eigen::Index j = 0; j < cols; ++j) {
        rep.Y(K - 2, j) = -xi(K - 2, j) + xi(K - 1, j);
        rep.eta(K - 2, j) = -xi(K - 1, j) + pos(rep.Y(K - 2, j));
        for (Eigen::Index l = K - 3; l >= 0; --l) {
            rep.Y(l, j) = -xi(l, j) - rep.eta(l + 1, j);
            rep.eta(l, j) = rep.eta(l + 1, j) + pos(rep.Y(l, j));
        }
    }
    rep.X_iterated = xi.row(0).transpose() + rep.eta.row(0).transpose();
    rep.X_closed = xi.row(0).transpose() - xi.colwise().minCoeff().transpose();
    rep.identity_residual = (rep.X_iterated - rep.X_closed).cwiseAbs().maxCoeff();

    Eigen::VectorXd layered = xi.row(0).transpose() - xi.row(K - 1).transpose();
    for (Eigen::Index l = 0; l < K - 1; ++l) layered += rep.Y.row(l).transpose().unaryExpr(pos);
    rep.layered_residual = (rep.X_closed - layered).cwiseAbs().maxCoeff();

    // Y_l^+(t) = Y_l^+(0) + int 1[Y_l > 0] dY_l + L^{Y_l}(t) / 2, summed over layers.
    const double dt = noise.dt();
    rep.reconstruction = xi.row(0).transpose() - xi.row(K - 1).transpose();
    rep.local_time.assign(static_cast<std::size_t>(K - 1), 0.0);
    rep.bandwidth.assign(static_cast<std::size_t>(K - 1), 0.0);
    for (Eigen::Index l = 0; l < K - 1; ++l) {
        const Eigen::VectorXd y = rep.Y.row(l).transpose();
        double eps = 0.0;
        const Eigen::VectorXd L = local_time(y, dt, noise.T, eps);
        // Layer l (0-based) is Y_{l+1}, whose local time is L^{(K-1-l)}.
        const auto idx = static_cast<std::size_t>(K - 2 - l);
        rep.local_time[idx] = L(cols - 1);
        rep.bandwidth[idx] = eps;
        double ito = pos(y(0));
        rep.reconstruction(0) += ito;
        for (Eigen::Index j = 1; j < cols; ++j) {
            ito += (y(j - 1) > 0.0 ? y(j) - y(j - 1) : 0.0);
            rep.reconstruction(j) += ito + 0.5 * L(j);
        }
    }
    rep.decomposition_residual = (rep.X_closed - rep.reconstruction).cwiseAbs().maxCoeff();

    // B_{lK} = (sigma_K W_K - sigma_l W_l) / sqrt(sigma_l^2 + sigma_K^2).
    rep.B_correlation.resize(K - 1, K - 1);
    const double sK2 = std::pow(p.sigma[order.back()], 2);
    for (Eigen::Index a = 0; a < K - 1; ++a)
        for (Eigen::Index b = 0; b < K - 1; ++b) {
            const double sa2 = std::pow(p.sigma[order[static_cast<std::size_t>(a)]], 2);
            const double sb2 = std::pow(p.sigma[order[static_cast<std::size_t>(b)]], 2);
            rep.B_correlation(a, b) = (a == b) ? 1.0 : sK2 / std::sqrt((sa2 + sK2) * (sb2 + sK2));
        }
    return rep;
}

void write_limit_csv(std::ostream& os, const LimitPath& path) {
    os << "t,series,category,value\n";
    char buf[128];
    for (Eigen::Index j = 0; j < path.X.cols(); ++j) {
        const double t = path.grid[static_cast<std::size_t>(j)];
        for (Eigen::Index i = 0; i < path.X.rows(); ++i) {
            std::snprintf(buf, sizeof buf, "%.12g,X,%td,%.12g\n", t, i + 1, path.X(i, j));
            os << buf;
            std::snprintf(buf, sizeof buf, "%.12g,G,%td,%.12g\n", t, i + 1, path.G(i, j));
            os << buf;
        }
        std::snprintf(buf, sizeof buf, "%.12g,R,0,%.12g\n", t, path.R(j));
        os << buf;
    }
}

}  // namespace matchq
