#pragma once

// Dense linear-algebra helpers shared by the model, the cost oracles and the
// trainer. Everything here works on dynamic-size Eigen matrices; the problem
// sizes (4 states per area, a handful of areas) are small.

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace rclfc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Largest eigenvalue magnitude. An empty matrix has radius 0.
inline double spectral_radius(const Matrix& a) {
    if (a.rows() != a.cols()) {
        throw std::invalid_argument("spectral_radius: matrix is not square");
    }
    if (a.size() == 0) {
        return 0.0;
    }
    if (!a.allFinite()) {
        throw std::runtime_error("spectral_radius: matrix has non-finite entries");
    }
    Eigen::EigenSolver<Matrix> solver(a, /*computeEigenvectors=*/false);
    if (solver.info() != Eigen::Success) {
        throw std::runtime_error("spectral_radius: eigenvalue solver did not converge");
    }
    return solver.eigenvalues().cwiseAbs().maxCoeff();
}

/// Orthonormal basis (as columns) of the column space of `a`, rank decided
/// with a relative singular-value threshold.
inline Matrix orthonormal_range(const Matrix& a, double rel_tol = 1e-10) {
    if (a.cols() == 0 || a.rows() == 0) {
        return Matrix(a.rows(), 0);
    }
    Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU);
    const auto& s = svd.singularValues();
    if (s.size() == 0 || s(0) == 0.0) {
        return Matrix(a.rows(), 0);
    }
    Eigen::Index rank = 0;
    while (rank < s.size() && s(rank) > rel_tol * s(0)) {
        ++rank;
    }
    return svd.matrixU().leftCols(rank);
}

namespace detail {

// Gram-Schmidt (two passes) of `candidates` against `basis`; appends the
// surviving directions. A direction survives when its residual exceeds
// rel_tol times max(its own norm, floor). Returns the number added.
inline Eigen::Index extend_basis(Matrix& basis, const Matrix& candidates, double rel_tol, double floor) {
    Eigen::Index added = 0;
    for (Eigen::Index c = 0; c < candidates.cols(); ++c) {
        Vector v = candidates.col(c);
        const double scale = std::max(v.norm(), floor);
        if (scale == 0.0) {
            continue;
        }
        for (int pass = 0; pass < 2; ++pass) {
            if (basis.cols() > 0) {
                v -= basis * (basis.transpose() * v);
            }
        }
        const double residual = v.norm();
        if (residual > rel_tol * scale) {
            basis.conservativeResize(basis.rows(), basis.cols() + 1);
            basis.col(basis.cols() - 1) = v / residual;
            ++added;
        }
    }
    return added;
}

}  // namespace detail

/// Orthonormal basis of the smallest a-invariant subspace containing the
/// columns of `inputs` (the reachable subspace of the pair (a, inputs)).
/// Krylov vectors are generated with a - I, which spans the same subspace and
/// keeps near-identity discrete-time matrices well conditioned.
inline Matrix reachable_subspace(const Matrix& a, const Matrix& inputs, double rel_tol = 1e-9) {
    const Eigen::Index n = a.rows();
    const Matrix shifted = a - Matrix::Identity(n, n);
    const double floor = shifted.norm();
    Matrix basis(n, 0);
    detail::extend_basis(basis, orthonormal_range(inputs, rel_tol), rel_tol, 0.0);
    Eigen::Index processed = 0;
    while (processed < basis.cols() && basis.cols() < n) {
        const Matrix images = shifted * basis.middleCols(processed, basis.cols() - processed);
        processed = basis.cols();
        detail::extend_basis(basis, images, rel_tol, floor);
    }
    return basis;
}

/// The part of a closed-loop system x' = a x + noise, y = c x that can affect
/// the output: reachable from the noise directions and observable through c.
/// `basis` has orthonormal columns; the reduced system is
/// (basisᵀ a basis, basisᵀ noise, c basis) and reproduces the output exactly.
struct RelevantSubspace {
    Matrix basis;
    Matrix reduced_a;
};

inline RelevantSubspace relevant_subspace(const Matrix& a, const Matrix& noise_dirs, const Matrix& c,
                                          double rel_tol = 1e-9) {
    const Matrix reach = reachable_subspace(a, noise_dirs, rel_tol);
    if (reach.cols() == 0) {
        return {reach, Matrix(0, 0)};
    }
    const Matrix a_r = reach.transpose() * a * reach;
    const Matrix c_r = c * reach;
    // Observable directions of (a_r, c_r) span the row space of the
    // observability matrix, i.e. the reachable subspace of (a_rᵀ, c_rᵀ).
    const Matrix obs = reachable_subspace(a_r.transpose(), c_r.transpose(), rel_tol);
    RelevantSubspace out;
    out.basis = reach * obs;
    out.reduced_a = out.basis.transpose() * a * out.basis;
    return out;
}

/// Solves sigma = a sigma aᵀ + q for a Schur-stable `a` by the doubling
/// iteration. Throws if `a` is not stable or the iteration does not settle.
inline Matrix solve_discrete_lyapunov(const Matrix& a, const Matrix& q) {
    if (a.rows() != a.cols() || q.rows() != a.rows() || q.cols() != a.cols()) {
        throw std::invalid_argument("solve_discrete_lyapunov: shape mismatch");
    }
    if (a.size() == 0) {
        return Matrix(0, 0);
    }
    if (spectral_radius(a) >= 1.0) {
        throw std::domain_error("solve_discrete_lyapunov: matrix is not Schur stable");
    }
    Matrix sigma = q;
    Matrix power = a;
    for (int k = 0; k < 200; ++k) {
        const Matrix increment = power * sigma * power.transpose();
        sigma += increment;
        power = power * power;
        const double scale = std::max(sigma.norm(), std::numeric_limits<double>::min());
        if (increment.norm() <= 1e-16 * scale && power.norm() < 1e-12) {
            return 0.5 * (sigma + sigma.transpose());
        }
        if (!sigma.allFinite()) {
            break;
        }
    }
    throw std::runtime_error("solve_discrete_lyapunov: doubling iteration did not converge");
}

/// Symmetric square root factor L with L Lᵀ = a for a symmetric PSD `a`.
inline Matrix psd_factor(const Matrix& a) {
    if (a.size() == 0) {
        return a;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(a);
    if (es.info() != Eigen::Success) {
        throw std::runtime_error("psd_factor: eigen decomposition failed");
    }
    const double tol = -1e-10 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    if (es.eigenvalues().minCoeff() < tol) {
        throw std::invalid_argument("psd_factor: matrix is not positive semidefinite");
    }
    const Vector roots = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * roots.asDiagonal();
}

inline bool is_symmetric(const Matrix& a, double tol = 1e-12) {
    if (a.rows() != a.cols()) {
        return false;
    }
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    return (a - a.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

inline bool is_psd(const Matrix& a, double tol = 1e-10) {
    if (!is_symmetric(a)) {
        return false;
    }
    if (a.size() == 0) {
        return true;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(a, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff() >= -tol * std::max(1.0, a.cwiseAbs().maxCoeff());
}

inline bool is_pd(const Matrix& a) {
    if (!is_symmetric(a) || a.size() == 0) {
        return false;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(a, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff() > 0.0;
}

/// FNV-1a over the raw bytes of the entries, used to tag artifacts.
inline std::uint64_t matrix_hash(const Matrix& a, std::uint64_t seed = 1469598103934665603ULL) {
    std::uint64_t h = seed;
    auto mix = [&h](const unsigned char* p, std::size_t len) {
        for (std::size_t i = 0; i < len; ++i) {
            h ^= p[i];
            h *= 1099511628211ULL;
        }
    };
    const std::int64_t dims[2] = {static_cast<std::int64_t>(a.rows()), static_cast<std::int64_t>(a.cols())};
    mix(reinterpret_cast<const unsigned char*>(dims), sizeof(dims));
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
        for (Eigen::Index i = 0; i < a.rows(); ++i) {
            const double v = a(i, j) == 0.0 ? 0.0 : a(i, j);  // fold -0.0
            mix(reinterpret_cast<const unsigned char*>(&v), sizeof(v));
        }
    }
    return h;
}

inline std::string shape_string(const Matrix& a) {
    return std::to_string(a.rows()) + "x" + std::to_string(a.cols());
}

}  // namespace rclfc
