#pragma once

#include <algorithm>
#include <vector>

#include "gdf/core.hpp"

// Closed-form solutions of the effective single-body problem
//   x* = argmax_x exp(-Qhat x^2/2 + h x - r(x))
// together with the thresholds, the non-zero fraction rho_hat, the pi
// functions and their Qhat/chihat derivatives for each penalty family.

namespace gdf {

struct Thresholds {
    std::vector<double> values;  // in z-units; x* nonzero iff |z| beyond values[0]
};

namespace detail {

inline double sgn(double z) { return z > 0 ? 1.0 : (z < 0 ? -1.0 : 0.0); }

inline void check_scad(const Scad& s, double Qhat) {
    if (Qhat * (s.a - 1.0) <= s.eta)
        throw DegenerateScadError("SCAD single-body problem degenerate: Qhat*(a-1) <= eta");
}

// tau(theta) = (1 + 2 theta^2) erfc(theta) - (2 theta / sqrt(pi)) e^{-theta^2};
// the soft-threshold second moment appearing in the l1/en Q equations.
inline double soft_tau(double theta) {
    return (1.0 + 2.0 * theta * theta) * erfc(theta) -
           (2.0 * theta / kSqrtPi) * std::exp(-theta * theta);
}

struct ScadGeometry {
    double t1, t2, t3;       // thresholds theta_S1 <= theta_S2 <= theta_S3
    double D;                // Qhat - eta/(a-1), the middle-region curvature
    double rho;              // erfc(t1)
    double pi1, pi2, pi3, pi4;
};

inline ScadGeometry scad_geometry(const Scad& s, double Qhat, double chihat) {
    check_scad(s, Qhat);
    ScadGeometry g;
    const double scale = std::sqrt(2.0 * chihat);
    g.t1 = s.lambda * s.eta / scale;
    g.t2 = s.lambda * (Qhat + s.eta) / scale;
    g.t3 = s.a * s.lambda * Qhat / scale;
    g.D = Qhat - s.eta / (s.a - 1.0);
    g.rho = erfc(g.t1);
    g.pi4 = erfc(g.t2) - erfc(g.t3);

    const double e1 = std::exp(-g.t1 * g.t1);
    const double e2 = std::exp(-g.t2 * g.t2);
    const double e3 = std::exp(-g.t3 * g.t3);
    const double u = s.eta / (Qhat * (s.a - 1.0));

    g.pi1 = (chihat / Qhat) *
            (-(2.0 * g.t1 / kSqrtPi) * (e1 + ((Qhat - s.eta) / s.eta) * e2) +
             (1.0 + 2.0 * g.t1 * g.t1) * (g.rho - erfc(g.t2)));
    g.pi2 = (chihat / g.D) *
            ((2.0 / kSqrtPi) * ((g.t2 - 2.0 * g.t3 * u) * e2 - (1.0 - 2.0 * u) * g.t3 * e3) +
             (1.0 + 2.0 * (u * g.t3) * (u * g.t3)) * g.pi4);
    g.pi3 = (chihat / Qhat) * ((2.0 * g.t3 / kSqrtPi) * e3 + erfc(g.t3));
    return g;
}

}  // namespace detail

// Maximizer of the single-body problem. Ties at a threshold resolve to the
// zero / smaller-magnitude piece (consistent with sgn(0) = 0).
inline double single_body_argmax(const Penalty& p, double h, double Qhat) {
    const double s = detail::sgn(h);
    const double ah = std::abs(h);
    return std::visit(
        [&](const auto& q) -> double {
            using T = std::decay_t<decltype(q)>;
            if constexpr (std::is_same_v<T, L1>) {
                return ah > q.eta ? (h - q.eta * s) / Qhat : 0.0;
            } else if constexpr (std::is_same_v<T, ElasticNet>) {
                return ah > q.eta1 ? (h - q.eta1 * s) / (Qhat + q.eta2) : 0.0;
            } else if constexpr (std::is_same_v<T, L2>) {
                return h / (Qhat + q.eta2);
            } else if constexpr (std::is_same_v<T, L0>) {
                return ah > std::sqrt(2.0 * q.eta * Qhat) ? h / Qhat : 0.0;
            } else {
                detail::check_scad(q, Qhat);
                const double le = q.lambda * q.eta;
                if (ah <= le) return 0.0;
                if (ah <= q.lambda * (Qhat + q.eta)) return (h - le * s) / Qhat;
                if (ah <= q.a * q.lambda * Qhat)
                    return (h * (q.a - 1.0) - q.a * le * s) / (Qhat * (q.a - 1.0) - q.eta);
                return h / Qhat;
            }
        },
        p);
}

// Slope dx*/dh of the maximizer at field h (piecewise constant; undefined
// exactly at thresholds, where the smaller-slope piece is reported).
inline double single_body_slope(const Penalty& p, double h, double Qhat) {
    const double ah = std::abs(h);
    return std::visit(
        [&](const auto& q) -> double {
            using T = std::decay_t<decltype(q)>;
            if constexpr (std::is_same_v<T, L1>) {
                return ah > q.eta ? 1.0 / Qhat : 0.0;
            } else if constexpr (std::is_same_v<T, ElasticNet>) {
                return ah > q.eta1 ? 1.0 / (Qhat + q.eta2) : 0.0;
            } else if constexpr (std::is_same_v<T, L2>) {
                return 1.0 / (Qhat + q.eta2);
            } else if constexpr (std::is_same_v<T, L0>) {
                return ah > std::sqrt(2.0 * q.eta * Qhat) ? 1.0 / Qhat : 0.0;
            } else {
                detail::check_scad(q, Qhat);
                if (ah <= q.lambda * q.eta) return 0.0;
                if (ah <= q.lambda * (Qhat + q.eta)) return 1.0 / Qhat;
                if (ah <= q.a * q.lambda * Qhat)
                    return (q.a - 1.0) / (Qhat * (q.a - 1.0) - q.eta);
                return 1.0 / Qhat;
            }
        },
        p);
}

// Thresholds in z-units (h = sqrt(chihat) z). x* is non-zero iff |z| exceeds
// values[0]; for l0 the non-zero condition in field units is
// |h| > sqrt(2 chihat) * theta0.
inline Thresholds thresholds(const Penalty& p, double Qhat, double chihat) {
    const double scale = std::sqrt(2.0 * chihat);
    return std::visit(
        [&](const auto& q) -> Thresholds {
            using T = std::decay_t<decltype(q)>;
            if constexpr (std::is_same_v<T, L1>) {
                return {{q.eta / scale}};
            } else if constexpr (std::is_same_v<T, ElasticNet>) {
                return {{q.eta1 / scale}};
            } else if constexpr (std::is_same_v<T, L2>) {
                return {{0.0}};
            } else if constexpr (std::is_same_v<T, L0>) {
                return {{std::sqrt(q.eta * Qhat / chihat)}};
            } else {
                detail::check_scad(q, Qhat);
                return {{q.lambda * q.eta / scale, q.lambda * (Qhat + q.eta) / scale,
                         q.a * q.lambda * Qhat / scale}};
            }
        },
        p);
}

// Fraction of non-zero components, rho_hat = erfc(support threshold).
inline double rho_hat(const Penalty& p, double Qhat, double chihat) {
    return erfc(thresholds(p, Qhat, chihat).values.front());
}

// Discontinuity weight of the hard-threshold map, (2 theta0/sqrt(pi)) e^{-theta0^2}.
inline double omega(double theta0) {
    return (2.0 * theta0 / kSqrtPi) * std::exp(-theta0 * theta0);
}

// pi_r(Qhat, chihat) = 2 int Dz log g_r, in closed form per penalty.
inline double pi_value(const Penalty& p, double Qhat, double chihat) {
    return std::visit(
        [&](const auto& q) -> double {
            using T = std::decay_t<decltype(q)>;
            if constexpr (std::is_same_v<T, L1>) {
                const double th = q.eta / std::sqrt(2.0 * chihat);
                return (chihat / Qhat) * detail::soft_tau(th);
            } else if constexpr (std::is_same_v<T, ElasticNet>) {
                const double th = q.eta1 / std::sqrt(2.0 * chihat);
                return (chihat / (Qhat + q.eta2)) * detail::soft_tau(th);
            } else if constexpr (std::is_same_v<T, L2>) {
                return chihat / (Qhat + q.eta2);
            } else if constexpr (std::is_same_v<T, L0>) {
                const double th = std::sqrt(q.eta * Qhat / chihat);
                return (chihat / Qhat) *
                       (omega(th) + (1.0 - 2.0 * th * th) * erfc(th));
            } else {
                const auto g = detail::scad_geometry(q, Qhat, chihat);
                return g.pi1 + g.pi2 + g.pi3 +
                       q.eta * q.lambda * q.lambda * g.pi4 / (q.a - 1.0) -
                       q.eta * (q.a + 1.0) * q.lambda * q.lambda * erfc(g.t3);
            }
        },
        p);
}

// Regularization-dependent right-hand sides of the saddle equations,
// before dividing by alpha: chi_contrib = d pi / d chihat = alpha*chi,
// q_contrib = -d pi / d Qhat = alpha*Q.
inline double chi_contrib(const Penalty& p, double Qhat, double chihat) {
    return std::visit(
        [&](const auto& q) -> double {
            using T = std::decay_t<decltype(q)>;
            if constexpr (std::is_same_v<T, L1>) {
                return rho_hat(p, Qhat, chihat) / Qhat;
            } else if constexpr (std::is_same_v<T, ElasticNet>) {
                return rho_hat(p, Qhat, chihat) / (Qhat + q.eta2);
            } else if constexpr (std::is_same_v<T, L2>) {
                return 1.0 / (Qhat + q.eta2);
            } else if constexpr (std::is_same_v<T, L0>) {
                const double th = std::sqrt(q.eta * Qhat / chihat);
                return (omega(th) + erfc(th)) / Qhat;
            } else {
                const auto g = detail::scad_geometry(q, Qhat, chihat);
                return (g.rho + (q.eta / (q.a - 1.0)) / g.D * g.pi4) / Qhat;
            }
        },
        p);
}

inline double q_contrib(const Penalty& p, double Qhat, double chihat) {
    return std::visit(
        [&](const auto& q) -> double {
            using T = std::decay_t<decltype(q)>;
            if constexpr (std::is_same_v<T, L1>) {
                const double th = q.eta / std::sqrt(2.0 * chihat);
                return chihat * detail::soft_tau(th) / (Qhat * Qhat);
            } else if constexpr (std::is_same_v<T, ElasticNet>) {
                const double th = q.eta1 / std::sqrt(2.0 * chihat);
                const double d = Qhat + q.eta2;
                return chihat * detail::soft_tau(th) / (d * d);
            } else if constexpr (std::is_same_v<T, L2>) {
                const double d = Qhat + q.eta2;
                return chihat / (d * d);
            } else if constexpr (std::is_same_v<T, L0>) {
                const double th = std::sqrt(q.eta * Qhat / chihat);
                return chihat * (omega(th) + erfc(th)) / (Qhat * Qhat);
            } else {
                const auto g = detail::scad_geometry(q, Qhat, chihat);
                return g.pi1 / Qhat + g.pi2 / g.D + g.pi3 / Qhat;
            }
        },
        p);
}

// Expectation of the regularization term per component, in the penalty's
// simplified saddle-point form.
inline double r_bar_value(const Penalty& p, const ModelParams& params, const RSState& st) {
    const double a = params.alpha;
    return std::visit(
        [&](const auto& q) -> double {
            using T = std::decay_t<decltype(q)>;
            if constexpr (std::is_same_v<T, L1>) {
                return a * (st.chi * st.chihat - st.Q * st.Qhat);
            } else if constexpr (std::is_same_v<T, ElasticNet>) {
                return a * (st.chi * st.chihat - (st.Qhat + q.eta2) * st.Q) +
                       0.5 * a * q.eta2 * st.Q;
            } else if constexpr (std::is_same_v<T, L2>) {
                return 0.5 * a * q.eta2 * st.Q;
            } else if constexpr (std::is_same_v<T, L0>) {
                return q.eta * rho_hat(p, st.Qhat, st.chihat);
            } else {
                const auto g = detail::scad_geometry(q, st.Qhat, st.chihat);
                const double half_mid = (q.eta / (q.a - 1.0)) / (2.0 * g.D);
                return a * st.chi * st.chihat - g.pi1 - (1.0 + half_mid) * g.pi2 - g.pi3 -
                       q.eta * q.lambda * q.lambda * g.pi4 / (2.0 * (q.a - 1.0)) +
                       0.5 * q.eta * (q.a + 1.0) * q.lambda * q.lambda * erfc(g.t3);
            }
        },
        p);
}

}  // namespace gdf
