#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <variant>

#include <boost/math/special_functions/erf.hpp>

// Core domain types for the RS analysis of sparse linear regression:
// penalty families, ensemble parameters, saddle-point state and the
// observables derived from it.

namespace gdf {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
inline constexpr double kSqrtPi = 1.7724538509055160273;

// ---------------------------------------------------------------------------
// Errors

struct DegenerateScadError : std::runtime_error {
    explicit DegenerateScadError(const std::string& what) : std::runtime_error(what) {}
};

struct NonConvergenceError : std::runtime_error {
    explicit NonConvergenceError(const std::string& what) : std::runtime_error(what) {}
};

struct NotBracketedError : std::runtime_error {
    explicit NotBracketedError(const std::string& what) : std::runtime_error(what) {}
};

struct DimensionMismatchError : std::runtime_error {
    explicit DimensionMismatchError(const std::string& what) : std::runtime_error(what) {}
};

struct TooFewSamplesError : std::runtime_error {
    explicit TooFewSamplesError(const std::string& what) : std::runtime_error(what) {}
};

struct TooLargeError : std::runtime_error {
    explicit TooLargeError(const std::string& what) : std::runtime_error(what) {}
};

struct InvalidTError : std::runtime_error {
    explicit InvalidTError(const std::string& what) : std::runtime_error(what) {}
};

// ---------------------------------------------------------------------------
// Penalties
//
// The elastic net uses the convention r(x) = eta1*|x| + (eta2/2)*x^2.
// SCAD carries an overall strength eta in addition to (a, lambda):
//   r(x) = eta*lambda*|x|                                   for |x| <= lambda
//        = -eta*(x^2 - 2*a*lambda*|x| + lambda^2)/(2(a-1))  for lambda < |x| <= a*lambda
//        = eta*(a+1)*lambda^2/2                             for |x| > a*lambda

struct L1 {
    double eta;
};

struct ElasticNet {
    double eta1;
    double eta2;
};

struct L2 {
    double eta2;
};

struct L0 {
    double eta;
};

struct Scad {
    double eta;
    double a;  // must be > 2
    double lambda;
};

using Penalty = std::variant<L1, ElasticNet, L2, L0, Scad>;

inline void validate(const Penalty& p) {
    std::visit(
        [](const auto& q) {
            using T = std::decay_t<decltype(q)>;
            if constexpr (std::is_same_v<T, L1>) {
                if (!(q.eta > 0) || !std::isfinite(q.eta))
                    throw std::invalid_argument("L1: eta must be positive and finite");
            } else if constexpr (std::is_same_v<T, ElasticNet>) {
                if (q.eta1 < 0 || q.eta2 < 0 || !std::isfinite(q.eta1) || !std::isfinite(q.eta2))
                    throw std::invalid_argument("ElasticNet: eta1, eta2 must be nonnegative and finite");
            } else if constexpr (std::is_same_v<T, L2>) {
                if (!(q.eta2 > 0) || !std::isfinite(q.eta2))
                    throw std::invalid_argument("L2: eta2 must be positive and finite");
            } else if constexpr (std::is_same_v<T, L0>) {
                if (!(q.eta > 0) || !std::isfinite(q.eta))
                    throw std::invalid_argument("L0: eta must be positive and finite");
            } else {
                if (!(q.eta > 0) || !(q.a > 2) || !(q.lambda > 0) || !std::isfinite(q.eta) ||
                    !std::isfinite(q.a) || !std::isfinite(q.lambda))
                    throw std::invalid_argument("Scad: require eta > 0, a > 2, lambda > 0");
            }
        },
        p);
}

inline std::string penalty_name(const Penalty& p) {
    return std::visit(
        [](const auto& q) -> std::string {
            using T = std::decay_t<decltype(q)>;
            if constexpr (std::is_same_v<T, L1>) return "l1";
            else if constexpr (std::is_same_v<T, ElasticNet>) return "en";
            else if constexpr (std::is_same_v<T, L2>) return "l2";
            else if constexpr (std::is_same_v<T, L0>) return "l0";
            else return "scad";
        },
        p);
}

// Scalar penalty value r(x; eta); used by the finite-instance oracles.
inline double penalty_value(const Penalty& p, double x) {
    return std::visit(
        [x](const auto& q) -> double {
            using T = std::decay_t<decltype(q)>;
            const double ax = std::abs(x);
            if constexpr (std::is_same_v<T, L1>) {
                return q.eta * ax;
            } else if constexpr (std::is_same_v<T, ElasticNet>) {
                return q.eta1 * ax + 0.5 * q.eta2 * x * x;
            } else if constexpr (std::is_same_v<T, L2>) {
                return 0.5 * q.eta2 * x * x;
            } else if constexpr (std::is_same_v<T, L0>) {
                return x == 0.0 ? 0.0 : q.eta;
            } else {
                if (ax <= q.lambda) return q.eta * q.lambda * ax;
                if (ax <= q.a * q.lambda)
                    return -q.eta * (x * x - 2.0 * q.a * q.lambda * ax + q.lambda * q.lambda) /
                           (2.0 * (q.a - 1.0));
                return 0.5 * q.eta * (q.a + 1.0) * q.lambda * q.lambda;
            }
        },
        p);
}

// ---------------------------------------------------------------------------
// Ensemble parameters: alpha = M/N, data mean m_y and variance sigma_y2.

struct ModelParams {
    double alpha;
    double m_y;
    double sigma_y2;

    // E[y^2] = sigma_y^2 + m_y^2, the combination entering chihat.
    double y_second_moment() const { return sigma_y2 + m_y * m_y; }
};

inline void validate(const ModelParams& p) {
    if (!(p.alpha > 0) || !(p.sigma_y2 > 0) || !std::isfinite(p.m_y))
        throw std::invalid_argument("ModelParams: require alpha > 0, sigma_y2 > 0, m_y finite");
}

// ---------------------------------------------------------------------------
// Saddle-point state and solution

struct RSState {
    double Q;
    double chi;
    double Qhat;
    double chihat;
};

enum class Branch { S1, S2, S3 };

inline const char* branch_name(Branch b) {
    switch (b) {
        case Branch::S1: return "S1";
        case Branch::S2: return "S2";
        default: return "S3";
    }
}

// Converged saddle-point solution. On divergent branches (S2/S3) chi and Q
// carry the sentinel +inf and downstream formulas must use df = 1 rather
// than propagate the infinities through arithmetic.
struct RSSolution {
    RSState state{};
    double rho_hat = 0.0;
    Branch branch = Branch::S1;
    bool rs_locally_stable = false;
    bool at_stable = false;
    bool converged = false;
    double residual = kInf;

    bool divergent() const { return branch != Branch::S1; }
};

struct Observables {
    double df;
    double err_train;
    double err_pre;
    double r_bar;
    double free_energy;
    double aic;
};

// ---------------------------------------------------------------------------
// Special functions; erfc(a) = (2/sqrt(pi)) int_a^inf e^{-z^2} dz.

inline double erfc(double a) { return std::erfc(a); }
inline double erfc_inv(double p) { return boost::math::erfc_inv(p); }

// Standard normal density and upper tail in z-units (Dz measure).
inline double gauss_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }
inline double gauss_tail(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

}  // namespace gdf
