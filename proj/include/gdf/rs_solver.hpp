#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "gdf/core.hpp"
#include "gdf/scalar_penalty.hpp"

// Solver for the coupled RS saddle-point system
//   chihat = (Q + sigma_y^2 + m_y^2) / (1+chi)^2,   Qhat = 1/(1+chi),
//   alpha*chi = chi_contrib(Qhat, chihat),          alpha*Q = q_contrib(Qhat, chihat),
// with branch classification (S1 finite, S2/S3 divergent), local-stability
// and AT-stability checks, and the delta -> eta inversion used by sweeps.

namespace gdf {

struct SolveOptions {
    double damping = 0.5;        // initial mixing weight for the fixed-point update
    double min_damping = 1.0 / 512.0;
    double tol = 1e-12;          // max component change of the undamped update
    long max_iter = 100000;
    double divergence_cut = 1e12;
};

namespace detail {

struct UpdateResult {
    double chi, Q;
    bool degenerate = false;
};

inline UpdateResult rs_update(const Penalty& p, const ModelParams& mp, double chi, double Q) {
    const double Qhat = 1.0 / (1.0 + chi);
    const double chihat = (Q + mp.y_second_moment()) / ((1.0 + chi) * (1.0 + chi));
    UpdateResult r{};
    try {
        r.chi = chi_contrib(p, Qhat, chihat) / mp.alpha;
        r.Q = q_contrib(p, Qhat, chihat) / mp.alpha;
    } catch (const DegenerateScadError&) {
        r.degenerate = true;
    }
    return r;
}

inline RSState rs_state_at(const ModelParams& mp, double chi, double Q) {
    RSState st;
    st.chi = chi;
    st.Q = Q;
    st.Qhat = 1.0 / (1.0 + chi);
    st.chihat = (Q + mp.y_second_moment()) / ((1.0 + chi) * (1.0 + chi));
    return st;
}

// Gauss-Legendre nodes/weights on [-1, 1], computed once per order by
// Newton iteration on the Legendre polynomial.
inline const std::pair<std::vector<double>, std::vector<double>>& gauss_legendre(int n) {
    static std::map<int, std::pair<std::vector<double>, std::vector<double>>> cache;
    static std::mutex mtx;
    std::lock_guard<std::mutex> lock(mtx);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    std::vector<double> x(n), w(n);
    for (int i = 0; i < n; ++i) {
        double t = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        for (int k = 0; k < 100; ++k) {
            double p0 = 1.0, p1 = t;
            for (int j = 2; j <= n; ++j) {
                const double p2 = ((2.0 * j - 1.0) * t * p1 - (j - 1.0) * p0) / j;
                p0 = p1;
                p1 = p2;
            }
            const double dp = n * (t * p1 - p0) / (t * t - 1.0);
            const double dt = p1 / dp;
            t -= dt;
            if (std::abs(dt) < 1e-15) {
                x[i] = t;
                w[i] = 2.0 / ((1.0 - t * t) * dp * dp);
                break;
            }
        }
    }
    return cache.emplace(n, std::make_pair(std::move(x), std::move(w))).first->second;
}

// integral of f over [a, b] by fixed-order Gauss-Legendre
template <class F>
inline double gl_integrate(F&& f, double a, double b, int order = 32) {
    const auto& [x, w] = gauss_legendre(order);
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    double acc = 0.0;
    for (size_t k = 0; k < x.size(); ++k) acc += w[k] * f(mid + half * x[k]);
    return acc * half;
}

}  // namespace detail

// SCAD S1 validity margin, alpha - rho_hat - kappa/(1-kappa) * pi4 with
// kappa = eta/(Qhat (a-1)). Positive on a valid S1 branch; equals
// alpha * (1 - df), so it vanishes exactly where chi diverges.
inline double scad_s1_margin(const Scad& s, const ModelParams& mp, const RSState& st) {
    const auto g = detail::scad_geometry(s, st.Qhat, st.chihat);
    const double kappa = s.eta / (st.Qhat * (s.a - 1.0));
    return mp.alpha - g.rho - kappa / (1.0 - kappa) * g.pi4;
}

// Closed-form AT condition value; RS is locally stable against
// replica-symmetry-breaking perturbations iff this is <= 1.
// For l0 the integrand carries a squared delta function, so the value is
// +inf (AT instability always appears).
inline double at_condition_value(const Penalty& p, const ModelParams& mp, const RSState& st) {
    const double pref = 1.0 / (mp.alpha * (1.0 + st.chi) * (1.0 + st.chi));
    return std::visit(
        [&](const auto& q) -> double {
            using T = std::decay_t<decltype(q)>;
            if constexpr (std::is_same_v<T, L1>) {
                const double rho = rho_hat(p, st.Qhat, st.chihat);
                return pref * rho / (st.Qhat * st.Qhat);
            } else if constexpr (std::is_same_v<T, ElasticNet>) {
                const double rho = rho_hat(p, st.Qhat, st.chihat);
                const double d = st.Qhat + q.eta2;
                return pref * rho / (d * d);
            } else if constexpr (std::is_same_v<T, L2>) {
                const double d = st.Qhat + q.eta2;
                return pref / (d * d);
            } else if constexpr (std::is_same_v<T, L0>) {
                return kInf;
            } else {
                const auto g = detail::scad_geometry(q, st.Qhat, st.chihat);
                const double invq2 = 1.0 / (st.Qhat * st.Qhat);
                const double invd2 = 1.0 / (g.D * g.D);
                return pref * (g.rho * invq2 + (invd2 - invq2) * g.pi4);
            }
        },
        p);
}

// Generic route to the same quantity: (1/(alpha (1+chi)^2)) int Dz (dx*/dh)^2,
// evaluated by quadrature of the single-body slope. Infinite for l0.
inline double at_integral_value(const Penalty& p, const ModelParams& mp, const RSState& st) {
    if (std::holds_alternative<L0>(p)) return kInf;
    const double sc = std::sqrt(st.chihat);
    // integration segments split at the thresholds (the slope jumps there)
    // and at a geometric ladder toward the z = 40 tail cut
    std::vector<double> cuts{0.0};
    for (double t : thresholds(p, st.Qhat, st.chihat).values)
        if (std::sqrt(2.0) * t < 40.0) cuts.push_back(std::sqrt(2.0) * t);
    for (double z = 1.0; z < 40.0; z *= 2.0) cuts.push_back(z);
    cuts.push_back(40.0);
    std::sort(cuts.begin(), cuts.end());

    double integral = 0.0;
    for (size_t s = 0; s + 1 < cuts.size(); ++s) {
        integral += detail::gl_integrate(
            [&](double z) {
                const double sl = single_body_slope(p, sc * z, st.Qhat);
                return sl * sl * gauss_pdf(z);
            },
            cuts[s], cuts[s + 1]);
    }
    integral *= 2.0;  // even integrand
    return integral / (mp.alpha * (1.0 + st.chi) * (1.0 + st.chi));
}

inline bool at_stability(const Penalty& p, const ModelParams& mp, const RSSolution& sol) {
    if (sol.divergent()) return false;  // S2/S3 lie in the RSB region (l0/SCAD)
    return at_condition_value(p, mp, sol.state) <= 1.0;
}

// True iff the solution's branch is locally stable under the linearized
// fixed-point map. Divergent branches are the attractor whenever they are
// reported, so they count as stable.
inline bool rs_branch_stability(const Penalty& p, const ModelParams& mp, const RSSolution& sol) {
    if (sol.divergent()) return true;
    const double chi = sol.state.chi, Q = sol.state.Q;
    const double e1 = 1e-7 * std::max(1.0, std::abs(chi));
    const double e2 = 1e-7 * std::max(1.0, std::abs(Q));
    const auto f0 = detail::rs_update(p, mp, chi, Q);
    const auto fc = detail::rs_update(p, mp, chi + e1, Q);
    const auto fq = detail::rs_update(p, mp, chi, Q + e2);
    if (f0.degenerate || fc.degenerate || fq.degenerate) return false;
    const double j11 = (fc.chi - f0.chi) / e1, j12 = (fq.chi - f0.chi) / e2;
    const double j21 = (fc.Q - f0.Q) / e1, j22 = (fq.Q - f0.Q) / e2;
    // spectral radius of the 2x2 Jacobian
    const double tr = j11 + j22, det = j11 * j22 - j12 * j21;
    const double disc = tr * tr - 4.0 * det;
    double rho;
    if (disc >= 0.0) {
        const double sq = std::sqrt(disc);
        rho = std::max(std::abs(0.5 * (tr + sq)), std::abs(0.5 * (tr - sq)));
    } else {
        rho = std::sqrt(det);
    }
    return rho < 1.0;
}

inline RSSolution solve_rs(const Penalty& p, const ModelParams& mp,
                           std::optional<RSState> init = std::nullopt,
                           const SolveOptions& opts = SolveOptions{}) {
    validate(p);
    validate(mp);

    double chi = init ? init->chi : 0.1;
    double Q = init ? init->Q : 0.1;
    const double chi_start = chi;
    double gamma = opts.damping;
    double prev_dchi = 0.0;
    int diverging_run = 0;

    const bool is_scad = std::holds_alternative<Scad>(p);
    const bool can_diverge = std::holds_alternative<L0>(p) || is_scad;

    auto make_divergent = [&](double chi_now, double q_now) {
        RSSolution sol;
        // sentinel state: chi (and possibly Q) at infinity. On S3 the ratio
        // Q/chi stays of order E[y^2]; on S2 Q remains finite while chi runs.
        Branch br = Branch::S2;
        if (is_scad && q_now > 0.2 * mp.y_second_moment() * chi_now) br = Branch::S3;
        sol.state = RSState{br == Branch::S3 ? kInf : q_now, kInf, 0.0, 0.0};
        sol.rho_hat = kNaN;
        sol.branch = br;
        sol.converged = true;
        sol.residual = kNaN;
        sol.rs_locally_stable = true;
        sol.at_stable = false;
        return sol;
    };

    auto finish = [&](double c, double q, double res) {
        RSSolution sol;
        sol.state = detail::rs_state_at(mp, c, q);
        sol.rho_hat = rho_hat(p, sol.state.Qhat, sol.state.chihat);
        sol.branch = Branch::S1;
        sol.converged = true;
        sol.residual = res;
        sol.rs_locally_stable = rs_branch_stability(p, mp, sol);
        sol.at_stable = at_stability(p, mp, sol);
        return sol;
    };

    // Newton refinement on H(chi,Q) = F(chi,Q) - (chi,Q); engaged once the
    // damped iteration is close, where it converges quadratically even when
    // the fixed-point map's leading eigenvalue approaches 1 (branch edges).
    auto try_newton = [&](double& c, double& q) -> std::optional<RSSolution> {
        for (int step = 0; step < 50; ++step) {
            const auto f0 = detail::rs_update(p, mp, c, q);
            if (f0.degenerate) return std::nullopt;
            const double h1 = f0.chi - c, h2 = f0.Q - q;
            const double res = std::max(std::abs(h1), std::abs(h2));
            if (res <= opts.tol) return finish(f0.chi, f0.Q, res);
            const double e1 = 1e-7 * std::max(1.0, std::abs(c));
            const double e2 = 1e-7 * std::max(1.0, std::abs(q));
            const auto fc = detail::rs_update(p, mp, c + e1, q);
            const auto fq = detail::rs_update(p, mp, c, q + e2);
            if (fc.degenerate || fq.degenerate) return std::nullopt;
            const double j11 = (fc.chi - f0.chi) / e1 - 1.0, j12 = (fq.chi - f0.chi) / e2;
            const double j21 = (fc.Q - f0.Q) / e1, j22 = (fq.Q - f0.Q) / e2 - 1.0;
            const double det = j11 * j22 - j12 * j21;
            if (std::abs(det) < 1e-14) return std::nullopt;
            const double dc = (h1 * j22 - h2 * j12) / det;
            const double dq = (h2 * j11 - h1 * j21) / det;
            const double cn = c - dc, qn = q - dq;
            if (!(cn >= 0.0) || !(qn >= 0.0) || !std::isfinite(cn) || !std::isfinite(qn))
                return std::nullopt;
            c = cn;
            q = qn;
        }
        return std::nullopt;
    };

    bool newton_failed = false;
    for (long it = 0; it < opts.max_iter; ++it) {
        const auto up = detail::rs_update(p, mp, chi, Q);
        if (up.degenerate) {
            // SCAD: Qhat*(a-1) <= eta. Near the start this is a genuine
            // parameter degeneracy; once chi has run well beyond its starting
            // point it signals the divergent branch (Qhat -> 0).
            if (can_diverge && chi > std::max(5.0, 2.0 * chi_start))
                return make_divergent(chi, Q);
            throw DegenerateScadError("solve_rs: SCAD degenerate at chi=" + std::to_string(chi));
        }
        const double dchi = up.chi - chi;
        const double dq = up.Q - Q;
        const double change = std::max(std::abs(dchi), std::abs(dq));

        if (change <= opts.tol) return finish(up.chi, up.Q, change);

        if (!newton_failed && change <= 1e-3 * std::max(1.0, std::abs(chi))) {
            double c = chi, q = Q;
            if (auto sol = try_newton(c, q)) return *sol;
            newton_failed = true;  // fall back to plain damped iteration
        }

        if (chi > opts.divergence_cut || Q > opts.divergence_cut) {
            if (++diverging_run >= 10 && can_diverge) return make_divergent(chi, Q);
        } else {
            diverging_run = 0;
        }

        // oscillation detection: sign flip of the chi update
        if (dchi * prev_dchi < 0.0 && gamma > opts.min_damping) gamma *= 0.5;
        prev_dchi = dchi;

        chi += gamma * dchi;
        Q += gamma * dq;
        if (chi < 0.0) chi = 0.0;
        if (Q < 0.0) Q = 0.0;
    }
    throw NonConvergenceError("solve_rs: no fixed point within max_iter");
}

namespace detail {

inline Penalty with_strength(const Penalty& p, double eta) {
    return std::visit(
        [eta](auto q) -> Penalty {
            using T = std::decay_t<decltype(q)>;
            if constexpr (std::is_same_v<T, L1>) { q.eta = eta; return q; }
            else if constexpr (std::is_same_v<T, ElasticNet>) { q.eta1 = eta; return q; }
            else if constexpr (std::is_same_v<T, L2>) { q.eta2 = eta; return q; }
            else if constexpr (std::is_same_v<T, L0>) { q.eta = eta; return q; }
            else { q.eta = eta; return q; }
        },
        p);
}

}  // namespace detail

// Inverse of the delta(eta) map: return the family member whose solved
// rho_hat/alpha equals delta. For l1/en/scad this bisects on the strength
// parameter (eta resp. eta1); for l0 the S1 branch admits a direct
// construction through theta0 = erfc^-1(alpha*delta).
inline Penalty eta_for_delta(const Penalty& family, const ModelParams& mp, double delta,
                             std::optional<RSState> warm = std::nullopt,
                             double tol_delta = 1e-9) {
    validate(mp);
    if (!(delta > 0.0) || delta > 1.0)
        throw std::invalid_argument("eta_for_delta: delta must lie in (0, 1]");

    if (const auto* l0 = std::get_if<L0>(&family)) {
        (void)l0;
        const double rho = mp.alpha * delta;
        if (rho >= 2.0) throw NotBracketedError("eta_for_delta: alpha*delta >= 2");
        const double theta0 = erfc_inv(rho);
        const double w = omega(theta0);
        if (mp.alpha <= rho + w)
            throw NotBracketedError("eta_for_delta: l0 target delta beyond the S1 branch");
        const double chi = (rho + w) / (mp.alpha - rho - w);
        const double Q = mp.y_second_moment() * chi;
        const auto st = detail::rs_state_at(mp, chi, Q);
        const double eta = theta0 * theta0 * st.chihat / st.Qhat;
        return L0{eta};
    }

    // l1/en: the target delta pins the threshold theta = erfc^-1(alpha*delta)
    // directly, so the reduced system in (chi, Q) at fixed theta can be
    // solved without an eta search; the strength is read off at the end as
    // eta = theta*sqrt(2*chihat).
    if (std::holds_alternative<L1>(family) || std::holds_alternative<ElasticNet>(family)) {
        const double rho = mp.alpha * delta;
        if (rho >= 2.0) throw NotBracketedError("eta_for_delta: alpha*delta >= 2");
        const double theta = erfc_inv(rho);
        const double tau = detail::soft_tau(theta);
        const double eta2 =
            std::holds_alternative<ElasticNet>(family) ? std::get<ElasticNet>(family).eta2 : 0.0;
        double chi = warm ? warm->chi : 0.1, Q = warm ? warm->Q : 0.1;
        for (int it = 0; it < 100000; ++it) {
            const auto st = detail::rs_state_at(mp, chi, Q);
            const double d = st.Qhat + eta2;
            const double cn = rho / (mp.alpha * d);
            const double qn = st.chihat * tau / (mp.alpha * d * d);
            const double change = std::max(std::abs(cn - chi), std::abs(qn - Q));
            chi += 0.5 * (cn - chi);
            Q += 0.5 * (qn - Q);
            if (change <= 1e-14 * std::max(1.0, chi)) break;
            if (!(chi < 1e14)) throw NotBracketedError("eta_for_delta: reduced system diverged");
        }
        const auto st = detail::rs_state_at(mp, chi, Q);
        const double eta1 = theta * std::sqrt(2.0 * st.chihat);
        if (std::holds_alternative<L1>(family)) return L1{eta1};
        return ElasticNet{eta1, eta2};
    }

    // delta(eta) decreases in eta; divergent solves count as delta = +inf,
    // SCAD degeneracy (eta too large) as delta = 0.
    auto delta_at = [&](double eta) -> double {
        const Penalty trial = detail::with_strength(family, eta);
        // warm-started solve first (tracks the branch near the target); cold
        // restart when it fails, since a warm state from a distant trial can
        // push the solve into spurious degeneracy or divergence
        for (const auto& init : {warm, std::optional<RSState>{}}) {
            try {
                const auto sol = solve_rs(trial, mp, init);
                if (sol.divergent()) continue;
                warm = sol.state;  // consecutive trials are close; reuse
                return sol.rho_hat / mp.alpha;
            } catch (const std::exception&) {
            }
            if (!warm) break;  // the cold attempt already ran
        }
        // no finite solution from either start: classify by a cold attempt
        try {
            const auto sol = solve_rs(trial, mp);
            return sol.divergent() ? kInf : sol.rho_hat / mp.alpha;
        } catch (const DegenerateScadError&) {
            return 0.0;  // eta too large for the penalty's curvature bound
        } catch (const std::exception&) {
            return kInf;
        }
    };

    double lo = 1e-8, hi = 1e4;
    double dlo = delta_at(lo), dhi = delta_at(hi);
    if (!(dlo >= delta && dhi <= delta)) {
        // fallback: log-grid scan for a bracket
        bool found = false;
        const int n = 200;
        double prev_eta = lo, prev_d = dlo;
        for (int i = 1; i <= n; ++i) {
            const double eta = lo * std::pow(hi / lo, double(i) / n);
            const double d = delta_at(eta);
            if (prev_d >= delta && d <= delta) {
                lo = prev_eta;
                hi = eta;
                dlo = prev_d;
                dhi = d;
                found = true;
                break;
            }
            prev_eta = eta;
            prev_d = d;
        }
        if (!found) throw NotBracketedError("eta_for_delta: target delta not bracketed in eta");
    }

    for (int it = 0; it < 200; ++it) {
        const double mid = std::sqrt(lo * hi);
        const double d = delta_at(mid);
        if (std::abs(d - delta) <= tol_delta && std::isfinite(d)) return detail::with_strength(family, mid);
        if (d > delta) lo = mid; else hi = mid;
    }
    const double d_final = delta_at(hi);
    if (std::isfinite(d_final) && std::abs(d_final - delta) <= 1e-6)
        return detail::with_strength(family, hi);
    throw NotBracketedError("eta_for_delta: bisection collapsed without reaching target delta");
}

}  // namespace gdf
