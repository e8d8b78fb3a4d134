#pragma once

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "errors.hpp"
#include "model.hpp"

namespace lowrank_levy {

enum class PsdMode { Unconstrained, PSDCone };

inline Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

/// Applies `f` to the eigenvalues of a symmetric matrix.
template <class F>
Matrix spectral_map(const Matrix& m, F&& f) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(m));
    Vector ev = eig.eigenvalues();
    for (Eigen::Index i = 0; i < ev.size(); ++i) ev(i) = f(ev(i));
    const Matrix& q = eig.eigenvectors();
    return symmetrize(q * ev.asDiagonal() * q.transpose());
}

/// Proximal map of tau * nuclear norm on symmetric matrices, optionally
/// intersected with the PSD cone.
inline Matrix prox_nuclear(const Matrix& m, double tau, PsdMode mode = PsdMode::Unconstrained) {
    if (!(tau >= 0)) throw InvalidParameter("prox threshold must be nonnegative");
    if (mode == PsdMode::PSDCone) return spectral_map(m, [tau](double l) { return std::max(l - tau, 0.0); });
    if (tau == 0) return symmetrize(m);
    return spectral_map(m, [tau](double l) { return std::copysign(std::max(std::abs(l) - tau, 0.0), l); });
}

/// Entrywise soft threshold.
inline Matrix soft_threshold(const Matrix& m, double tau) {
    return m.unaryExpr([tau](double x) { return std::copysign(std::max(std::abs(x) - tau, 0.0), x); });
}

/// Frobenius-nearest PSD matrix: negative eigenvalues clipped to zero.
inline Matrix nearest_psd(const Matrix& m) {
    return spectral_map(m, [](double l) { return std::max(l, 0.0); });
}

/// Sum of singular values of a symmetric matrix.
inline double nuclear_norm(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(m), Eigen::EigenvaluesOnly);
    return eig.eigenvalues().cwiseAbs().sum();
}

inline double spectral_norm(const Matrix& m) {
    if (m.size() == 0) return 0.0;
    Eigen::JacobiSVD<Matrix> svd(m);
    return svd.singularValues()(0);
}

/// Number of singular values above tol * sigma_max * max(rows, cols).
inline int numerical_rank(const Matrix& m, double tol = 1e-6) {
    if (!(tol > 0)) throw InvalidParameter("rank tolerance must be positive");
    if (m.size() == 0) return 0;
    Eigen::JacobiSVD<Matrix> svd(m);
    const Vector& s = svd.singularValues();
    if (s(0) <= 0) return 0;
    const double threshold = tol * s(0) * static_cast<double>(std::max(m.rows(), m.cols()));
    return static_cast<int>((s.array() > threshold).count());
}

}  // namespace lowrank_levy
