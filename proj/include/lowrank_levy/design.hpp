#pragma once

#include <cmath>
#include <vector>

#include "errors.hpp"
#include "frequency.hpp"
#include "linalg.hpp"
#include "spectral.hpp"

namespace lowrank_levy {

/// One frequency of the discretized least-squares objective.
struct DesignRow {
    /// Unit direction u / |u|; theta = direction * direction^T.
    Vector direction;
    /// 2 U^2 / |u|^2, zero when the intercept is disabled.
    double intercept_coeff = 0.0;
    /// 2 |u|^-2 Re psi_hat(u).
    double response = 0.0;
    double weight = 0.0;

    Matrix theta() const { return direction * direction.transpose(); }
};

struct Design {
    std::vector<DesignRow> rows;
    double cutoff = 1.0;
    bool intercept = false;

    Eigen::Index dim() const { return rows.empty() ? 0 : rows.front().direction.size(); }
    std::size_t size() const { return rows.size(); }
};

/// Rows for the unmasked frequencies of `est`, weighted by `scheme`.
inline Design build_design(const ExponentEstimate& est, const FrequencyScheme& scheme, bool intercept) {
    if (static_cast<Eigen::Index>(est.size()) != scheme.count())
        throw InvalidParameter("exponent estimate and frequency scheme differ in size");
    Design design;
    design.cutoff = scheme.cutoff;
    design.intercept = intercept;
    const double u2 = scheme.cutoff * scheme.cutoff;
    for (Eigen::Index i = 0; i < scheme.count(); ++i) {
        if (est.masked[static_cast<std::size_t>(i)]) continue;
        const Vector u = scheme.freqs.row(i).transpose();
        const double norm2 = u.squaredNorm();
        if (norm2 == 0) continue;
        DesignRow row;
        row.direction = u / std::sqrt(norm2);
        row.intercept_coeff = intercept ? 2.0 * u2 / norm2 : 0.0;
        row.response = 2.0 * est.values[static_cast<std::size_t>(i)].real() / norm2;
        row.weight = scheme.weights(i);
        design.rows.push_back(std::move(row));
    }
    if (design.rows.empty()) throw EmptySpectralInformation("design has no unmasked frequency");
    return design;
}

/// Residual response + intercept_coeff a / U^2 + <theta, M> of every row.
inline Vector design_residuals(const Design& design, const Matrix& m, double a) {
    Vector r(static_cast<Eigen::Index>(design.size()));
    const double u2 = design.cutoff * design.cutoff;
    for (std::size_t i = 0; i < design.size(); ++i) {
        const auto& row = design.rows[i];
        r(static_cast<Eigen::Index>(i)) =
            row.response + row.intercept_coeff * a / u2 + row.direction.dot(m * row.direction);
    }
    return r;
}

/// Weighted squared residual sum plus lambda (||M||_1 + a / U^2).
inline double objective(const Design& design, const Matrix& m, double a, double lambda) {
    const Vector r = design_residuals(design, m, a);
    double quad = 0.0;
    for (std::size_t i = 0; i < design.size(); ++i)
        quad += design.rows[i].weight * r(static_cast<Eigen::Index>(i)) * r(static_cast<Eigen::Index>(i));
    if (lambda == 0) return quad;
    return quad + lambda * (nuclear_norm(m) + a / (design.cutoff * design.cutoff));
}

/// ||(A, a)||_w^2 = int (<theta(u), A> + 2 U^2 |u|^-2 a)^2 w_U(u) du on the
/// annulus quadrature.
inline double weighted_norm_sq(const Matrix& a_mat, double a, const FrequencyScheme& scheme) {
    if (scheme.mode != SchemeMode::AnnulusQuadrature)
        throw InvalidParameter("the weighted norm is defined on the annulus scheme");
    if (a_mat.rows() != scheme.dim()) throw InvalidParameter("matrix dimension does not match the scheme");
    const double u2 = scheme.cutoff * scheme.cutoff;
    double s = 0.0;
    for (Eigen::Index i = 0; i < scheme.count(); ++i) {
        const Vector u = scheme.freqs.row(i).transpose();
        const double n2 = u.squaredNorm();
        const double v = u.dot(a_mat * u) / n2 + 2.0 * u2 / n2 * a;
        s += scheme.weights(i) * v * v;
    }
    return s;
}

inline double weighted_norm(const Matrix& a_mat, double a, const FrequencyScheme& scheme) {
    return std::sqrt(weighted_norm_sq(a_mat, a, scheme));
}

struct ErrorMatrix {
    Matrix matrix;
    double spectral_norm = 0.0;
};

/// R_n = 2 sum_i w_i (response_i + <theta~_i, diag(sigma, alpha / U^2)>) theta~_i with
/// theta~ = diag(theta, 2 U^2 / |u|^2), over the unmasked frequencies.
inline ErrorMatrix error_matrix_diagnostic(const ExponentEstimate& est, const FrequencyScheme& scheme,
                                           const Matrix& sigma_true, double alpha_true) {
    const Design design = build_design(est, scheme, true);
    const Eigen::Index d = design.dim();
    if (sigma_true.rows() != d) throw InvalidParameter("true sigma dimension does not match the scheme");
    const Vector r = design_residuals(design, sigma_true, alpha_true);
    ErrorMatrix out;
    out.matrix = Matrix::Zero(d + 1, d + 1);
    for (std::size_t i = 0; i < design.size(); ++i) {
        const auto& row = design.rows[i];
        const double c = 2.0 * row.weight * r(static_cast<Eigen::Index>(i));
        out.matrix.topLeftCorner(d, d) += c * row.theta();
        out.matrix(d, d) += c * row.intercept_coeff;
    }
    out.spectral_norm = spectral_norm(out.matrix);
    return out;
}

}  // namespace lowrank_levy
