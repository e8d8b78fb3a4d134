#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <variant>
#include <vector>

#include "design.hpp"
#include "errors.hpp"
#include "linalg.hpp"

namespace lowrank_levy {

enum class InterceptMode { None, NonnegativeInterval };

struct NuclearOnly {};
/// M = M_r + M_s with lambda ||M_r||_1 + lambda_sparse |M_s|_1.
struct LowRankPlusSparse {
    double lambda_sparse = 0.0;
};
/// M = F F^T with F of size d x k.
struct Factorized {
    Eigen::Index k = 1;
};
using SolverVariant = std::variant<NuclearOnly, LowRankPlusSparse, Factorized>;

struct SolverConfig {
    double lambda = 0.0;
    int max_iter = 20000;
    double grad_tol = 1e-12;
    PsdMode psd_mode = PsdMode::Unconstrained;
    InterceptMode intercept = InterceptMode::None;
    SolverVariant variant = NuclearOnly{};
    double rank_tol = 1e-6;

    void validate(Eigen::Index dim) const {
        if (!(lambda >= 0) || !std::isfinite(lambda)) throw InvalidParameter("lambda must be finite and nonnegative");
        if (max_iter < 1) throw InvalidParameter("max_iter must be positive");
        if (!(grad_tol > 0)) throw InvalidParameter("grad_tol must be positive");
        if (!(rank_tol > 0)) throw InvalidParameter("rank_tol must be positive");
        if (const auto* f = std::get_if<Factorized>(&variant))
            if (f->k < 1 || f->k > dim) throw InvalidParameter("factorization rank must lie in [1, d]");
        if (const auto* s = std::get_if<LowRankPlusSparse>(&variant))
            if (!(s->lambda_sparse >= 0)) throw InvalidParameter("lambda_sparse must be nonnegative");
    }
};

struct EstimateReport {
    Matrix sigma_hat;
    std::optional<double> alpha_hat;
    Matrix sigma_psd;
    int rank = 0;
    std::vector<double> objective_trace;
    std::optional<double> rel_error;
    double lambda = 0.0;
    double cutoff = 0.0;
    int iterations = 0;
    bool converged = false;
    /// Sparse component of the low-rank plus sparse variant.
    std::optional<Matrix> sparse_part;
};

/// ||sigma_psd - truth||_F / ||truth||_F.
inline double relative_error(const Matrix& estimate, const Matrix& truth) {
    const double denom = truth.norm();
    if (denom == 0) return estimate.norm();
    return (estimate - truth).norm() / denom;
}

namespace detail {

/// The smooth part sum_i w_i (response_i + c_i a + <theta_i, M>)^2 in
/// vectorized form, with c_i = intercept_coeff_i / U^2.
class LeastSquaresPart {
public:
    explicit LeastSquaresPart(const Design& design) {
        const auto m = static_cast<Eigen::Index>(design.size());
        const Eigen::Index d = design.dim();
        dirs_.resize(m, d);
        weights_.resize(m);
        coeff_.resize(m);
        response_.resize(m);
        const double u2 = design.cutoff * design.cutoff;
        for (Eigen::Index i = 0; i < m; ++i) {
            const auto& row = design.rows[static_cast<std::size_t>(i)];
            dirs_.row(i) = row.direction.transpose();
            weights_(i) = row.weight;
            coeff_(i) = row.intercept_coeff / u2;
            response_(i) = row.response;
        }
    }

    Vector residuals(const Matrix& m, double a) const {
        return response_ + a * coeff_ + (dirs_ * m).cwiseProduct(dirs_).rowwise().sum();
    }

    double value(const Matrix& m, double a) const {
        const Vector r = residuals(m, a);
        return weights_.dot(r.cwiseProduct(r));
    }

    /// Gradient in (M, a), returning the value as well.
    double gradient(const Matrix& m, double a, Matrix& grad_m, double& grad_a) const {
        const Vector r = residuals(m, a);
        const Vector g = 2.0 * weights_.cwiseProduct(r);
        grad_m = dirs_.transpose() * g.asDiagonal() * dirs_;
        grad_a = g.dot(coeff_);
        return weights_.dot(r.cwiseProduct(r));
    }

    /// Exact Lipschitz constant of the gradient, 2 lambda_max of the weighted
    /// Gram matrix of the rows (theta_i, c_i).
    double lipschitz(bool with_intercept) const {
        const Vector sw = weights_.cwiseSqrt();
        Matrix gram = (dirs_ * dirs_.transpose()).array().square().matrix();
        if (with_intercept) gram += coeff_ * coeff_.transpose();
        gram = sw.asDiagonal() * gram * sw.asDiagonal();
        Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
        return std::max(2.0 * eig.eigenvalues().maxCoeff(), std::numeric_limits<double>::min());
    }

private:
    Matrix dirs_;
    Vector weights_;
    Vector coeff_;
    Vector response_;
};

struct Iterate {
    Matrix low;
    Matrix sparse;  // empty unless low-rank plus sparse
    double a = 0.0;

    Matrix total() const { return sparse.size() == 0 ? low : Matrix(low + sparse); }
};

inline double distance(const Iterate& x, const Iterate& y) {
    double s = (x.low - y.low).squaredNorm() + (x.a - y.a) * (x.a - y.a);
    if (x.sparse.size() != 0) s += (x.sparse - y.sparse).squaredNorm();
    return std::sqrt(s);
}

inline double magnitude(const Iterate& x) {
    double s = x.low.squaredNorm() + x.a * x.a;
    if (x.sparse.size() != 0) s += x.sparse.squaredNorm();
    return std::sqrt(s);
}

/// y = x + c1 (z - x) + c2 (x - x_prev)
inline Iterate extrapolate(const Iterate& x, const Iterate& z, const Iterate& prev, double c1, double c2) {
    Iterate y;
    y.low = x.low + c1 * (z.low - x.low) + c2 * (x.low - prev.low);
    if (x.sparse.size() != 0) y.sparse = x.sparse + c1 * (z.sparse - x.sparse) + c2 * (x.sparse - prev.sparse);
    y.a = x.a + c1 * (z.a - x.a) + c2 * (x.a - prev.a);
    return y;
}

struct ProximalResult {
    Iterate x;
    std::vector<double> trace;
    int iterations = 0;
    bool converged = false;
};

/// Monotone FISTA with function-value restart over (M_r[, M_s], a).
inline ProximalResult accelerated_proximal_gradient(const Design& design, const SolverConfig& cfg,
                                                    const std::optional<LowRankPlusSparse>& sparse) {
    const LeastSquaresPart ls(design);
    const Eigen::Index d = design.dim();
    const bool with_a = cfg.intercept == InterceptMode::NonnegativeInterval;
    const double u2 = design.cutoff * design.cutoff;
    // Two blocks entering through their sum double the Lipschitz constant.
    const double lip = ls.lipschitz(with_a) * (sparse ? 2.0 : 1.0);
    const double step = 1.0 / lip;

    auto penalized = [&](const Iterate& x) {
        double v = ls.value(x.total(), x.a);
        if (cfg.lambda > 0) v += cfg.lambda * (nuclear_norm(x.low) + x.a / u2);
        if (sparse && sparse->lambda_sparse > 0) v += sparse->lambda_sparse * x.sparse.cwiseAbs().sum();
        return v;
    };
    auto prox_step = [&](const Iterate& y) {
        Matrix gm;
        double ga = 0.0;
        ls.gradient(y.total(), y.a, gm, ga);
        Iterate z;
        z.low = prox_nuclear(y.low - step * gm, step * cfg.lambda, cfg.psd_mode);
        if (sparse) z.sparse = soft_threshold(symmetrize(y.sparse - step * gm), step * sparse->lambda_sparse);
        z.a = with_a ? std::max(0.0, y.a - step * (ga + cfg.lambda / u2)) : 0.0;
        return z;
    };

    ProximalResult out;
    Iterate x{Matrix::Zero(d, d), sparse ? Matrix::Zero(d, d) : Matrix(), 0.0};
    Iterate prev = x;
    Iterate y = x;
    double fx = penalized(x);
    double t = 1.0;
    int increases = 0;
    bool at_incumbent = true;
    out.trace.push_back(fx);

    for (int it = 1; it <= cfg.max_iter; ++it) {
        Iterate z = prox_step(y);
        const double fz = penalized(z);
        if (!std::isfinite(fz)) throw SolverFailure("non-finite objective", out.trace);
        const double residual = distance(z, y);
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        out.iterations = it;
        if (fz <= fx) {
            increases = 0;
            const double change = fx - fz;
            prev = x;
            x = std::move(z);
            fx = fz;
            out.trace.push_back(fx);
            if (change <= cfg.grad_tol * std::max(1.0, std::abs(fx)) &&
                residual <= std::sqrt(cfg.grad_tol) * std::max(1.0, magnitude(x))) {
                out.converged = true;
                break;
            }
            y = extrapolate(x, x, prev, 0.0, (t - 1.0) / t_next);
            t = t_next;
            at_incumbent = false;
        } else {
            // A plain step from x cannot increase the objective in exact
            // arithmetic, so this is rounding at the optimum.
            if (at_incumbent) {
                out.converged = true;
                break;
            }
            if (++increases >= 10) throw SolverFailure("objective increased on 10 consecutive steps", out.trace);
            out.trace.push_back(fx);
            // The monotone update keeps x; momentum towards z is kept per MFISTA
            // only on the first rejection, later rejections restart plainly.
            if (increases == 1) {
                y = extrapolate(x, z, x, t / t_next, 0.0);
                t = t_next;
            } else {
                prev = x;
                y = x;
                t = 1.0;
                at_incumbent = true;
            }
        }
    }
    out.x = std::move(x);
    return out;
}

inline Matrix truncated_factor(const Matrix& m, Eigen::Index k) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(m));
    const Eigen::Index d = m.rows();
    Matrix f(d, k);
    for (Eigen::Index j = 0; j < k; ++j) {
        const Eigen::Index col = d - 1 - j;
        const double l = std::max(eig.eigenvalues()(col), 0.0);
        f.col(j) = std::sqrt(l) * eig.eigenvectors().col(col);
        // A zero column is a stationary point of the factorized problem.
        if (f.col(j).norm() < 1e-6) f.col(j) = 1e-3 * eig.eigenvectors().col(col);
    }
    return f;
}

/// Gradient descent with Armijo backtracking on F -> Q(F F^T, a) + lambda (tr(F F^T) + a / U^2).
inline ProximalResult factorized_descent(const Design& design, const SolverConfig& cfg, Matrix factor,
                                         double a) {
    const LeastSquaresPart ls(design);
    const bool with_a = cfg.intercept == InterceptMode::NonnegativeInterval;
    const double u2 = design.cutoff * design.cutoff;
    auto value = [&](const Matrix& f, double aa) {
        const Matrix m = f * f.transpose();
        return ls.value(m, aa) + cfg.lambda * (m.trace() + aa / u2);
    };

    ProximalResult out;
    double fx = value(factor, a);
    out.trace.push_back(fx);
    double step = 1.0 / ls.lipschitz(with_a);
    for (int it = 1; it <= cfg.max_iter; ++it) {
        out.iterations = it;
        Matrix gm;
        double ga = 0.0;
        ls.gradient(factor * factor.transpose(), a, gm, ga);
        gm += cfg.lambda * Matrix::Identity(gm.rows(), gm.cols());
        const Matrix gf = 2.0 * gm * factor;
        ga += cfg.lambda / u2;
        const double gnorm2 = gf.squaredNorm() + (with_a ? ga * ga : 0.0);
        if (gnorm2 <= 1e-30) {
            out.converged = true;
            break;
        }
        bool accepted = false;
        for (int back = 0; back < 60; ++back) {
            const Matrix cand = factor - step * gf;
            const double ca = with_a ? std::max(0.0, a - step * ga) : 0.0;
            const double fc = value(cand, ca);
            if (std::isfinite(fc) && fc <= fx - 1e-4 * step * gnorm2) {
                factor = cand;
                a = ca;
                const double change = fx - fc;
                fx = fc;
                accepted = true;
                out.trace.push_back(fx);
                if (change <= cfg.grad_tol * std::max(1.0, std::abs(fx))) out.converged = true;
                step *= 2.0;
                break;
            }
            step *= 0.5;
        }
        if (!accepted || out.converged) {
            out.converged = true;
            break;
        }
    }
    out.x.low = factor * factor.transpose();
    out.x.a = a;
    return out;
}

}  // namespace detail

/// Minimizes the penalized weighted least-squares objective over symmetric
/// matrices (and the intercept when enabled) and post-processes the result.
inline EstimateReport solve(const Design& design, const SolverConfig& cfg) {
    if (design.rows.empty()) throw EmptySpectralInformation("cannot solve an empty design");
    const Eigen::Index d = design.dim();
    cfg.validate(d);

    EstimateReport report;
    report.lambda = cfg.lambda;
    report.cutoff = design.cutoff;

    detail::ProximalResult res;
    if (const auto* s = std::get_if<LowRankPlusSparse>(&cfg.variant)) {
        res = detail::accelerated_proximal_gradient(design, cfg, *s);
        report.sparse_part = res.x.sparse;
    } else if (const auto* f = std::get_if<Factorized>(&cfg.variant)) {
        SolverConfig seed_cfg = cfg;
        seed_cfg.variant = NuclearOnly{};
        const auto seed = detail::accelerated_proximal_gradient(design, seed_cfg, std::nullopt);
        res = detail::factorized_descent(design, cfg, detail::truncated_factor(seed.x.low, f->k), seed.x.a);
    } else {
        res = detail::accelerated_proximal_gradient(design, cfg, std::nullopt);
    }

    report.sigma_hat = symmetrize(res.x.total());
    if (cfg.intercept == InterceptMode::NonnegativeInterval) report.alpha_hat = res.x.a;
    report.sigma_psd = nearest_psd(report.sigma_hat);
    report.rank = numerical_rank(report.sigma_psd, cfg.rank_tol);
    report.objective_trace = std::move(res.trace);
    report.iterations = res.iterations;
    report.converged = res.converged;
    return report;
}

inline EstimateReport solve(const Design& design, const SolverConfig& cfg, const Matrix& truth) {
    auto report = solve(design, cfg);
    report.rel_error = relative_error(report.sigma_psd, truth);
    return report;
}

}  // namespace lowrank_levy
