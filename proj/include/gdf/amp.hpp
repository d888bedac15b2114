#pragma once

#include <atomic>
#include <future>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "gdf/datagen.hpp"
#include "gdf/scalar_penalty.hpp"

// Finite-size belief propagation (AMP form) for the penalized regression
// estimator, plus the numerical GDF estimators: the covariance estimator
// over an ensemble of instances, the SURE finite-difference estimator, and
// the effective non-zero fraction at the BP fixed point.

namespace gdf {

struct Instance {
    Eigen::MatrixXd A;  // M x N
    Eigen::VectorXd y;  // M
};

struct BPState {
    Eigen::VectorXd x_hat, chi, h, Qhat_i;  // length N
    Eigen::VectorXd R, sigma2;              // length M
    long iter = 0;
    bool converged = false;
};

struct BPOptions {
    double damping = 0.5;
    double tol = 1e-10;
    long max_iter = 100000;
};

namespace detail {

// Single-body argmax and variance rule for BP. Identical to the closed
// forms except for SCAD coordinates whose instantaneous curvature violates
// Qhat*(a-1) > eta (possible transiently at finite size): there the
// middle-region formula is invalid, so the maximizer is found by direct
// comparison of the per-region candidates.
inline std::pair<double, double> bp_single_body(const Penalty& p, double h, double Qhat) {
    if (const auto* s = std::get_if<Scad>(&p)) {
        if (Qhat * (s->a - 1.0) <= s->eta) {
            const double sg = h >= 0 ? 1.0 : -1.0;
            auto phi = [&](double x) {
                return -0.5 * Qhat * x * x + h * x - penalty_value(p, x);
            };
            std::vector<double> cand{0.0, sg * s->lambda, sg * s->a * s->lambda};
            const double x1 = (h - s->lambda * s->eta * sg) / Qhat;
            if (std::abs(h) > s->lambda * s->eta && std::abs(x1) <= s->lambda) cand.push_back(x1);
            const double x3 = h / Qhat;
            if (std::abs(x3) > s->a * s->lambda) cand.push_back(x3);
            double best = 0.0, best_phi = phi(0.0);
            for (double x : cand)
                if (phi(x) > best_phi) {
                    best_phi = phi(x);
                    best = x;
                }
            const double chi = best == 0.0 ? 0.0 : 1.0 / Qhat;
            return {best, chi};
        }
    }
    return {single_body_argmax(p, h, Qhat), single_body_slope(p, h, Qhat)};
}

}  // namespace detail

inline BPState bp_init(const Instance& inst) {
    const auto M = inst.A.rows(), N = inst.A.cols();
    BPState st;
    st.x_hat = Eigen::VectorXd::Zero(N);
    st.chi = Eigen::VectorXd::Zero(N);
    st.h = Eigen::VectorXd::Zero(N);
    st.Qhat_i = Eigen::VectorXd::Ones(N);
    st.R = Eigen::VectorXd::Zero(M);
    st.sigma2 = Eigen::VectorXd::Zero(M);
    return st;
}

// One synchronous sweep:
//   sigma_mu^2 = sum_i A_mui^2 chi_i,
//   R_mu = (y_mu - yhat_mu + sigma_mu^2 R_mu^prev)/(1+sigma_mu^2)   (Onsager-corrected residual),
//   Qhat_i = sum_mu A_mui^2/(1+sigma_mu^2),  h_i = x_hat_i Qhat_i + sum_mu A_mui R_mu,
//   x_hat_i = single-body argmax,            chi_i = the penalty's slope rule,
// with damping applied to (x_hat, chi) only. The residual reweighting by the
// previous R makes the fixed point an exact stationary point of the penalized
// least-squares objective and gives Qhat_i -> 1/(1+chi), the saddle-point
// correspondence, at large N.
inline BPState bp_step(const BPState& st, const Instance& inst, const Penalty& p,
                       double damping) {
    const auto M = inst.A.rows(), N = inst.A.cols();
    if (st.x_hat.size() != N || st.R.size() != M || inst.y.size() != M)
        throw DimensionMismatchError("bp_step: state/instance shape mismatch");

    BPState nx = st;
    const Eigen::ArrayXXd A2 = inst.A.array().square();
    nx.sigma2 = A2.matrix() * st.chi;
    const Eigen::VectorXd yhat = inst.A * st.x_hat - nx.sigma2.cwiseProduct(st.R);
    const Eigen::ArrayXd denom = 1.0 + nx.sigma2.array();
    nx.R = ((inst.y - yhat).array() / denom).matrix();
    nx.Qhat_i = A2.matrix().transpose() * denom.inverse().matrix();
    nx.h = st.x_hat.cwiseProduct(nx.Qhat_i) + inst.A.transpose() * nx.R;

    for (Eigen::Index i = 0; i < N; ++i) {
        const auto [xi, ci] = detail::bp_single_body(p, nx.h(i), nx.Qhat_i(i));
        nx.x_hat(i) = (1.0 - damping) * st.x_hat(i) + damping * xi;
        nx.chi(i) = (1.0 - damping) * st.chi(i) + damping * ci;
    }
    nx.iter = st.iter + 1;
    return nx;
}

// Iterates bp_step's sweep until the largest per-component x_hat change drops
// below tol. Strongly correlated designs can send the iteration into a
// runaway (chi growing without bound); when that is detected the run restarts
// from scratch with the damping halved, within the same total iteration
// budget.
inline BPState bp_run(const Instance& inst, const Penalty& p,
                      const BPOptions& opts = BPOptions{}) {
    const auto N = inst.A.cols();
    const Eigen::MatrixXd A2 = inst.A.array().square();  // hoisted out of the sweep
    BPState st = bp_init(inst);
    double gamma = opts.damping;
    long used = 0;
    for (long t = 0; t < opts.max_iter; ++t) {
        st.sigma2 = A2 * st.chi;
        const Eigen::ArrayXd denom = 1.0 + st.sigma2.array();
        st.R = ((inst.y - inst.A * st.x_hat + st.sigma2.cwiseProduct(st.R)).array() / denom)
                   .matrix();
        st.Qhat_i = A2.transpose() * denom.inverse().matrix();
        st.h = st.x_hat.cwiseProduct(st.Qhat_i) + inst.A.transpose() * st.R;
        double change = 0.0;
        for (Eigen::Index i = 0; i < N; ++i) {
            const auto [xi, ci] = detail::bp_single_body(p, st.h(i), st.Qhat_i(i));
            const double xn = (1.0 - gamma) * st.x_hat(i) + gamma * xi;
            change = std::max(change, std::abs(xn - st.x_hat(i)));
            st.x_hat(i) = xn;
            st.chi(i) = (1.0 - gamma) * st.chi(i) + gamma * ci;
        }
        ++used;
        st.iter = used;
        if (!std::isfinite(change) || st.chi.maxCoeff() > 1e8 ||
            st.x_hat.cwiseAbs().maxCoeff() > 1e10) {
            if (gamma <= 1.0 / 1024.0) break;  // give up: report non-convergence
            gamma *= 0.5;
            const long iter_done = used;
            st = bp_init(inst);
            st.iter = iter_done;
            continue;
        }
        if (change < opts.tol) {
            st.converged = true;
            // one undamped sweep so x_hat and chi sit exactly on the
            // piecewise solution (damping alone leaves geometrically
            // decaying remnants on the zero components)
            const long iter_done = st.iter;
            st = bp_step(st, inst, p, 1.0);
            st.iter = iter_done;
            st.converged = true;
            break;
        }
    }
    return st;
}

// Covariance GDF estimator over an ensemble of (y, yhat) pairs from fresh
// instances: (1/(S M sigma_y^2)) sum_s sum_mu (y - m_y)(yhat - yhat_bar),
// with yhat_bar the across-sample mean per component.
inline double gdf_covariance(const std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>>& ens,
                             double m_y, double sigma_y2) {
    if (ens.size() < 2) throw TooFewSamplesError("gdf_covariance: need at least 2 samples");
    const Eigen::Index M = ens.front().first.size();
    Eigen::VectorXd yhat_bar = Eigen::VectorXd::Zero(M);
    for (const auto& [y, yhat] : ens) {
        if (y.size() != M || yhat.size() != M)
            throw DimensionMismatchError("gdf_covariance: unequal M across samples");
        yhat_bar += yhat;
    }
    yhat_bar /= double(ens.size());
    double acc = 0.0;
    for (const auto& [y, yhat] : ens)
        acc += (y.array() - m_y).matrix().dot(yhat - yhat_bar);
    return acc / (double(ens.size()) * double(M) * sigma_y2);
}

// SURE-style finite-difference GDF on a single instance:
// (1/M) sum_mu (yhat_mu(y + eps e_mu) - yhat_mu(y)) / eps.
inline double gdf_sure_fd(const Instance& inst, const Penalty& p, const BPOptions& opts,
                          double eps) {
    const auto M = inst.A.rows();
    const BPState base = bp_run(inst, p, opts);
    if (!base.converged) throw NonConvergenceError("gdf_sure_fd: base solve did not converge");
    const Eigen::VectorXd yhat0 = inst.A * base.x_hat;
    double acc = 0.0;
    for (Eigen::Index mu = 0; mu < M; ++mu) {
        Instance pert = inst;
        pert.y(mu) += eps;
        const BPState ps = bp_run(pert, p, opts);
        if (!ps.converged)
            throw NonConvergenceError("gdf_sure_fd: perturbed solve did not converge");
        acc += ((pert.A * ps.x_hat)(mu) - yhat0(mu)) / eps;
    }
    return acc / double(M);
}

// Effective non-zero fraction at the BP fixed point:
// (1/alpha) * [ensemble mean of (1/N) sum chi_i] * [ensemble mean of (1/N) sum Qhat_i].
// The per-component chi_i concentrate on alpha*chi of the saddle point and
// Qhat_i on 1/(1+chi), so this reproduces df = chi/(1+chi).
inline double delta_eff_bp(const std::vector<BPState>& states) {
    if (states.size() < 1) throw TooFewSamplesError("delta_eff_bp: empty ensemble");
    double mchi = 0.0, mq = 0.0;
    for (const auto& st : states) {
        mchi += st.chi.mean();
        mq += st.Qhat_i.mean();
    }
    mchi /= double(states.size());
    mq /= double(states.size());
    const double alpha = double(states.front().R.size()) / double(states.front().chi.size());
    return mchi * mq / alpha;
}

// ---------------------------------------------------------------------------
// Ensemble driver shared by the experiments and the CLI.

struct EnsembleSpec {
    enum class Kind { Iid, Ex1, Ex2 } kind = Kind::Iid;
    double c = 0.5;  // Ex1 lag-1 correlation
    int T = 0;       // Ex2 group size
};

struct BPEnsembleResult {
    double df_cov = kNaN;
    double delta_eff = kNaN;
    double mean_rho = kNaN;        // mean fraction of non-zero x_hat components
    double convergence_rate = 0.0;
    double mean_iters = 0.0;
    int converged_count = 0;
};

inline Eigen::MatrixXd make_predictors(const EnsembleSpec& spec, int M, int N,
                                       std::uint64_t seed) {
    switch (spec.kind) {
        case EnsembleSpec::Kind::Iid: return gen_gaussian_iid(M, N, seed);
        case EnsembleSpec::Kind::Ex1: return gen_example1(M, N, spec.c, seed);
        default: return gen_example2(M, N, spec.T, seed);
    }
}

// Draw S fresh (y, A) instances, run BP on each, and reduce to the GDF
// estimators. Samples run in parallel with per-sample seeds; reductions are
// in fixed sample order so the result is deterministic given the seed.
inline BPEnsembleResult run_bp_ensemble(const Penalty& p, int N, int M, double m_y,
                                        double sigma_y2, const EnsembleSpec& spec, int S,
                                        std::uint64_t seed, const BPOptions& opts = BPOptions{},
                                        int threads = 0) {
    if (threads <= 0) threads = int(std::thread::hardware_concurrency());
    if (threads <= 0) threads = 1;

    std::vector<BPState> states(S);
    std::vector<Eigen::VectorXd> ys(S), yhats(S);
    auto worker = [&](int s) {
        const std::uint64_t s_seed = seed + 1000003ull * std::uint64_t(s);
        Instance inst;
        inst.A = make_predictors(spec, M, N, s_seed);
        inst.y = gen_y(M, m_y, sigma_y2, s_seed + 1);
        states[s] = bp_run(inst, p, opts);
        yhats[s] = inst.A * states[s].x_hat;
        ys[s] = std::move(inst.y);
    };
    std::vector<std::future<void>> tasks;
    std::atomic<int> next{0};
    for (int t = 0; t < std::min(threads, S); ++t)
        tasks.push_back(std::async(std::launch::async, [&] {
            for (int s = next.fetch_add(1); s < S; s = next.fetch_add(1)) worker(s);
        }));
    for (auto& f : tasks) f.get();

    BPEnsembleResult res;
    std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> ens;
    std::vector<BPState> conv;
    double rho_acc = 0.0, iter_acc = 0.0;
    for (int s = 0; s < S; ++s) {
        iter_acc += double(states[s].iter);
        if (!states[s].converged) continue;
        ens.emplace_back(ys[s], yhats[s]);
        rho_acc += double((states[s].x_hat.array() != 0.0).count()) / double(N);
        conv.push_back(states[s]);
    }
    res.converged_count = int(conv.size());
    res.convergence_rate = double(conv.size()) / double(S);
    res.mean_iters = iter_acc / double(S);
    if (conv.size() >= 2) {
        res.df_cov = gdf_covariance(ens, m_y, sigma_y2);
        res.delta_eff = delta_eff_bp(conv);
        res.mean_rho = rho_acc / double(conv.size());
    }
    return res;
}

}  // namespace gdf
