#pragma once

#include <atomic>
#include <future>
#include <numeric>
#include <thread>

#include <Eigen/Dense>

#include "gdf/amp.hpp"

// Reference solvers for finite instances: exact l0 best-subset selection
// (exhaustive with pruning, branch-and-bound at larger N), coordinate
// descent for the separable penalties, and the exact-GDF Monte Carlo
// protocol built on them.

namespace gdf {

struct BestSubsetResult {
    Eigen::VectorXd x_hat;
    double objective = kInf;      // 0.5*||y - A x||^2 + eta * ||x||_0
    bool used_pseudoinverse = false;  // some visited subset was rank-deficient
};

namespace detail {

struct SubsetContext {
    const Eigen::MatrixXd* G;   // A^T A
    const Eigen::VectorXd* b;   // A^T y
    double half_yy;
    double eta;
    BestSubsetResult* best;
    std::vector<int> support;
};

// least-squares cost on the given support; 0.5*||y-Ax||^2 = half_yy - 0.5 b_S^T x_S
inline double subset_cost(SubsetContext& ctx, Eigen::VectorXd& coef_out) {
    const int k = int(ctx.support.size());
    if (k == 0) {
        coef_out.resize(0);
        return ctx.half_yy;
    }
    Eigen::MatrixXd Gss(k, k);
    Eigen::VectorXd bs(k);
    for (int r = 0; r < k; ++r) {
        bs(r) = (*ctx.b)(ctx.support[r]);
        for (int c = 0; c < k; ++c) Gss(r, c) = (*ctx.G)(ctx.support[r], ctx.support[c]);
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(Gss);
    coef_out = ldlt.solve(bs);
    if ((Gss * coef_out - bs).cwiseAbs().maxCoeff() > 1e-8 * std::max(1.0, bs.cwiseAbs().maxCoeff())) {
        // rank-deficient support: minimum-norm least squares
        coef_out = Gss.completeOrthogonalDecomposition().solve(bs);
        ctx.best->used_pseudoinverse = true;
    }
    return ctx.half_yy - 0.5 * bs.dot(coef_out);
}

inline void subset_try(SubsetContext& ctx) {
    Eigen::VectorXd coef;
    const double cost = subset_cost(ctx, coef) + ctx.eta * double(ctx.support.size());
    if (cost < ctx.best->objective) {
        ctx.best->objective = cost;
        ctx.best->x_hat.setZero();
        for (size_t r = 0; r < ctx.support.size(); ++r)
            ctx.best->x_hat(ctx.support[r]) = coef(int(r));
    }
}

inline void enumerate_supports(SubsetContext& ctx, int first, int remaining, int N) {
    if (remaining == 0) {
        subset_try(ctx);
        return;
    }
    for (int i = first; i <= N - remaining; ++i) {
        ctx.support.push_back(i);
        enumerate_supports(ctx, i + 1, remaining - 1, N);
        ctx.support.pop_back();
    }
}

// depth-first include/exclude over columns ordered by |A_i^T y|; prunes on
// eta * (included so far) >= current best
inline void bnb(SubsetContext& ctx, const std::vector<int>& order, size_t pos, int kmax) {
    if (ctx.eta * double(ctx.support.size()) >= ctx.best->objective) return;
    subset_try(ctx);
    if (pos == order.size() || int(ctx.support.size()) == kmax) return;
    ctx.support.push_back(order[pos]);
    bnb(ctx, order, pos + 1, kmax);
    ctx.support.pop_back();
    bnb(ctx, order, pos + 1, kmax);
}

}  // namespace detail

// Global minimizer of 0.5*||y - A x||^2 + eta*||x||_0. Exhaustive search in
// ascending support size for N <= 22; branch-and-bound up to N = 50.
// Supports of size k with eta*k at or above the best cost found so far are
// skipped (they cannot beat the incumbent); the optimum never needs more
// than M columns.
inline BestSubsetResult best_subset_l0(const Instance& inst, double eta) {
    const int N = int(inst.A.cols()), M = int(inst.A.rows());
    if (N > 50) throw TooLargeError("best_subset_l0: N > 50 not supported");
    if (!(eta >= 0.0)) throw std::invalid_argument("best_subset_l0: eta must be >= 0");

    const Eigen::MatrixXd G = inst.A.transpose() * inst.A;
    const Eigen::VectorXd b = inst.A.transpose() * inst.y;
    BestSubsetResult best;
    best.x_hat = Eigen::VectorXd::Zero(N);

    detail::SubsetContext ctx{&G, &b, 0.5 * inst.y.squaredNorm(), eta, &best, {}};
    detail::subset_try(ctx);  // empty support incumbent

    // greedy forward selection first: a good incumbent tightens the pruning
    {
        std::vector<int> greedy;
        for (int k = 0; k < std::min(N, M); ++k) {
            int pick = -1;
            double pick_cost = best.objective;
            for (int i = 0; i < N; ++i) {
                if (std::find(greedy.begin(), greedy.end(), i) != greedy.end()) continue;
                ctx.support = greedy;
                ctx.support.push_back(i);
                Eigen::VectorXd coef;
                const double cost =
                    detail::subset_cost(ctx, coef) + eta * double(ctx.support.size());
                if (cost < pick_cost) {
                    pick_cost = cost;
                    pick = i;
                }
            }
            if (pick < 0) break;
            greedy.push_back(pick);
            ctx.support = greedy;
            detail::subset_try(ctx);
        }
        ctx.support.clear();
    }

    const int kcap = std::min(N, M);
    if (N <= 22) {
        for (int k = 1; k <= kcap; ++k) {
            if (eta > 0.0 && eta * double(k) >= best.objective) break;
            detail::enumerate_supports(ctx, 0, k, N);
        }
    } else {
        std::vector<int> order(N);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(),
                  [&](int i, int j) { return std::abs(b(i)) > std::abs(b(j)); });
        detail::bnb(ctx, order, 0, kcap);
    }
    return best;
}

// Cyclic coordinate descent for the separable penalties. The coordinate
// update is the same closed-form scalar maximizer as the single-body
// problem, with Qhat replaced by the column norm ||A_i||^2. SCAD is
// non-convex, so the best of several starts is reported.
inline Eigen::VectorXd coord_descent(const Instance& inst, const Penalty& p, double tol = 1e-12,
                                     long max_iter = 100000, int scad_starts = 5,
                                     std::uint64_t seed = 0) {
    const int N = int(inst.A.cols());
    const Eigen::VectorXd colnorm2 = inst.A.colwise().squaredNorm();

    auto descend = [&](Eigen::VectorXd x) {
        Eigen::VectorXd r = inst.y - inst.A * x;  // running residual
        for (long it = 0; it < max_iter; ++it) {
            double change = 0.0;
            for (int i = 0; i < N; ++i) {
                const double h = inst.A.col(i).dot(r) + colnorm2(i) * x(i);
                const double xn = single_body_argmax(p, h, colnorm2(i));
                if (xn != x(i)) {
                    r -= (xn - x(i)) * inst.A.col(i);
                    change = std::max(change, std::abs(xn - x(i)));
                    x(i) = xn;
                }
            }
            if (change <= tol) return x;
        }
        throw NonConvergenceError("coord_descent: max_iter exceeded");
    };

    auto objective = [&](const Eigen::VectorXd& x) {
        double obj = 0.5 * (inst.y - inst.A * x).squaredNorm();
        for (int i = 0; i < N; ++i) obj += penalty_value(p, x(i));
        return obj;
    };

    if (!std::holds_alternative<Scad>(p))
        return descend(Eigen::VectorXd::Zero(N));

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd best;
    double best_obj = kInf;
    for (int s = 0; s < scad_starts; ++s) {
        Eigen::VectorXd x0 = Eigen::VectorXd::Zero(N);
        if (s == 1) {
            x0 = inst.A.completeOrthogonalDecomposition().solve(inst.y);
        } else if (s > 1) {
            for (int i = 0; i < N; ++i) x0(i) = gauss(rng);
        }
        const Eigen::VectorXd x = descend(x0);
        const double obj = objective(x);
        if (obj < best_obj) {
            best_obj = obj;
            best = x;
        }
    }
    return best;
}

struct ExactL0Result {
    double df = kNaN;         // covariance-GDF over the sample ensemble
    double mean_delta = kNaN; // mean support size / M
};

// Monte Carlo exact-GDF protocol: S fresh Gaussian-iid instances, best
// subset on each, covariance estimator over the (y, yhat) pairs.
// Deterministic given (seed, S, N, eta, params).
inline ExactL0Result exact_gdf_l0(const ModelParams& mp, int N, double eta, int S,
                                  std::uint64_t seed, int threads = 0) {
    validate(mp);
    const int M = int(std::lround(mp.alpha * N));
    if (threads <= 0) threads = int(std::thread::hardware_concurrency());
    if (threads <= 0) threads = 1;

    std::vector<Eigen::VectorXd> ys(S), yhats(S);
    std::vector<double> deltas(S);
    std::atomic<int> next{0};
    auto worker = [&](int s) {
        const std::uint64_t s_seed = seed + 1000003ull * std::uint64_t(s);
        Instance inst;
        inst.A = gen_gaussian_iid(M, N, s_seed);
        inst.y = gen_y(M, mp.m_y, mp.sigma_y2, s_seed + 1);
        const auto sol = best_subset_l0(inst, eta);
        yhats[s] = inst.A * sol.x_hat;
        deltas[s] = double((sol.x_hat.array() != 0.0).count()) / double(M);
        ys[s] = std::move(inst.y);
    };
    std::vector<std::future<void>> tasks;
    for (int t = 0; t < std::min(threads, S); ++t)
        tasks.push_back(std::async(std::launch::async, [&] {
            for (int s = next.fetch_add(1); s < S; s = next.fetch_add(1)) worker(s);
        }));
    for (auto& f : tasks) f.get();

    std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> ens;
    ens.reserve(S);
    for (int s = 0; s < S; ++s) ens.emplace_back(std::move(ys[s]), std::move(yhats[s]));
    ExactL0Result res;
    res.df = gdf_covariance(ens, mp.m_y, mp.sigma_y2);
    res.mean_delta = std::accumulate(deltas.begin(), deltas.end(), 0.0) / double(S);
    return res;
}

}  // namespace gdf
