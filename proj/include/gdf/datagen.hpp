#pragma once

#include <cstdint>
#include <ostream>
#include <random>

#include <Eigen/Dense>

#include "gdf/core.hpp"

// Seeded generators for data vectors and the predictor ensembles: Gaussian
// iid, AR(1)-correlated columns (correlation c^|i-j|), and three-group
// shared-factor columns. All are pure functions of (shape, params, seed).

namespace gdf {

inline Eigen::VectorXd gen_y(int M, double m_y, double sigma_y2, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(m_y, std::sqrt(sigma_y2));
    Eigen::VectorXd y(M);
    for (int mu = 0; mu < M; ++mu) y(mu) = gauss(rng);
    return y;
}

// Entries iid N(0, 1/M), so columns have unit norm in expectation.
inline Eigen::MatrixXd gen_gaussian_iid(int M, int N, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(double(M)));
    Eigen::MatrixXd A(M, N);
    for (int mu = 0; mu < M; ++mu)
        for (int i = 0; i < N; ++i) A(mu, i) = gauss(rng);
    return A;
}

// Each row is a stationary AR(1) sequence across the column index with lag-1
// coefficient c, giving corr(A_i, A_j) = c^|i-j|; columns are then rescaled
// to unit norm.
inline Eigen::MatrixXd gen_example1(int M, int N, double c, std::uint64_t seed) {
    if (!(std::abs(c) < 1.0)) throw std::invalid_argument("gen_example1: require |c| < 1");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd A(M, N);
    const double innov = std::sqrt(1.0 - c * c);
    for (int mu = 0; mu < M; ++mu) {
        A(mu, 0) = gauss(rng);
        for (int i = 1; i < N; ++i) A(mu, i) = c * A(mu, i - 1) + innov * gauss(rng);
    }
    for (int i = 0; i < N; ++i) A.col(i) /= A.col(i).norm();
    return A;
}

// First 3T columns: Z_g + eps_i with a shared factor Z_g per consecutive
// T-block (within-group correlation 1/2 before normalization); remaining
// columns iid. Columns rescaled to unit norm.
inline Eigen::MatrixXd gen_example2(int M, int N, int T, std::uint64_t seed) {
    if (T < 0 || (T > 0 && 3 * T >= N))
        throw InvalidTError("gen_example2: require 3T < N");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd A(M, N);
    Eigen::MatrixXd Z(M, 3);
    for (int g = 0; g < 3; ++g)
        for (int mu = 0; mu < M; ++mu) Z(mu, g) = gauss(rng);
    for (int i = 0; i < N; ++i) {
        const int g = T > 0 ? i / T : 3;
        for (int mu = 0; mu < M; ++mu) {
            const double e = gauss(rng);
            A(mu, i) = g < 3 ? Z(mu, g) + e : e;
        }
    }
    for (int i = 0; i < N; ++i) A.col(i) /= A.col(i).norm();
    return A;
}

// Row-major CSV export with a header comment carrying shape, seed and the
// generator tag.
inline void write_matrix_csv(std::ostream& os, const Eigen::MatrixXd& A, const std::string& tag,
                             std::uint64_t seed) {
    os << "# generator=" << tag << " M=" << A.rows() << " N=" << A.cols() << " seed=" << seed
       << "\n";
    os.precision(17);
    for (Eigen::Index mu = 0; mu < A.rows(); ++mu) {
        for (Eigen::Index i = 0; i < A.cols(); ++i) {
            if (i) os << ',';
            os << A(mu, i);
        }
        os << '\n';
    }
}

}  // namespace gdf
