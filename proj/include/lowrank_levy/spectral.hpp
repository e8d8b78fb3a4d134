#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <concepts>
#include <numbers>
#include <vector>

#include "errors.hpp"
#include "laplace.hpp"
#include "sim.hpp"

namespace lowrank_levy {

// ---------------------------------------------------------------- ecf

/// Empirical characteristic function (1/n) sum_j exp(i <u, Y_j>).
inline Complex ecf(const Matrix& increments, const Vector& u) {
    if (u.size() != increments.cols()) throw InvalidParameter("frequency dimension does not match the sample");
    const Vector proj = increments * u;
    double re = 0.0, im = 0.0;
    for (Eigen::Index j = 0; j < proj.size(); ++j) {
        re += std::cos(proj(j));
        im += std::sin(proj(j));
    }
    const auto n = static_cast<double>(proj.size());
    return {re / n, im / n};
}

inline Complex ecf(const SampleSet& sample, const Vector& u) { return ecf(sample.increments, u); }

/// ecf at every row of `freqs`, evaluated in column blocks.
inline std::vector<Complex> ecf_many(const Matrix& increments, const Matrix& freqs) {
    if (freqs.cols() != increments.cols()) throw InvalidParameter("frequency dimension does not match the sample");
    const Eigen::Index m = freqs.rows();
    std::vector<Complex> out(static_cast<std::size_t>(m));
    const auto n = static_cast<double>(increments.rows());
    constexpr Eigen::Index block = 64;
    for (Eigen::Index start = 0; start < m; start += block) {
        const Eigen::Index width = std::min(block, m - start);
        const Matrix proj = increments * freqs.middleRows(start, width).transpose();
        for (Eigen::Index c = 0; c < width; ++c) {
            double re = 0.0, im = 0.0;
            for (Eigen::Index j = 0; j < proj.rows(); ++j) {
                re += std::cos(proj(j, c));
                im += std::sin(proj(j, c));
            }
            out[static_cast<std::size_t>(start + c)] = {re / n, im / n};
        }
    }
    return out;
}

// ---------------------------------------------------------------- exponent

/// Anything that can play the role of L^{-1}.
template <class T>
concept LaplaceInverter = requires(const T& f, Complex w, double guard) {
    { f.inverse(w, guard) } -> std::convertible_to<Complex>;
    { f.branch_sensitive() } -> std::convertible_to<bool>;
};

/// psi_hat(u) = -L^{-1}(phi_n(u)) at each frequency (rows of `freqs`).
struct ExponentEstimate {
    Matrix freqs;
    std::vector<Complex> values;
    std::vector<Complex> cf_values;
    /// True where the frequency was dropped; `values` there is NaN.
    std::vector<bool> masked;
    double guard = 0.0;

    std::size_t size() const { return values.size(); }
    std::size_t unmasked_count() const {
        return static_cast<std::size_t>(std::count(masked.begin(), masked.end(), false));
    }
};

/// Default inversion guard max(0.05, 2 / sqrt(n)).
inline double default_inversion_guard(Eigen::Index n) {
    return std::max(0.05, 2.0 / std::sqrt(static_cast<double>(n)));
}

/// Inverts given characteristic function values. Frequencies whose value
/// trips the guard (or leaves the inverter's domain) are masked.
template <LaplaceInverter Inverter>
ExponentEstimate exponent_estimate_from_values(const Matrix& freqs, const std::vector<Complex>& cf_values,
                                               const Inverter& inverter, double guard) {
    if (freqs.rows() == 0) throw InvalidParameter("exponent estimate needs at least one frequency");
    if (static_cast<std::size_t>(freqs.rows()) != cf_values.size())
        throw InvalidParameter("one characteristic function value per frequency is required");
    ExponentEstimate est;
    est.freqs = freqs;
    est.cf_values = cf_values;
    est.guard = guard;
    est.values.assign(cf_values.size(), Complex(std::nan(""), std::nan("")));
    est.masked.assign(cf_values.size(), true);
    for (std::size_t i = 0; i < cf_values.size(); ++i) {
        try {
            const Complex z = inverter.inverse(cf_values[i], guard);
            if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) continue;
            est.values[i] = -z;
            est.masked[i] = false;
        } catch (const InversionGuard&) {
        } catch (const OutOfDomain&) {
        }
    }
    if (est.unmasked_count() == 0) throw EmptySpectralInformation("every frequency was masked by the inversion guard");
    return est;
}

namespace detail {

/// Whether the principal argument of phi_n(u) agrees with the phase obtained by
/// unwrapping phi_n(t u) from t = 0 to 1.
inline bool principal_phase_is_continuous(const Matrix& increments, const Vector& u, Complex at_u,
                                          int steps = 8) {
    double unwrapped = 0.0;
    double prev = 0.0;
    for (int k = 1; k <= steps; ++k) {
        const Complex v = k == steps ? at_u : ecf(increments, (static_cast<double>(k) / steps) * u);
        const double a = std::arg(v);
        double delta = a - prev;
        while (delta > std::numbers::pi) delta -= 2 * std::numbers::pi;
        while (delta < -std::numbers::pi) delta += 2 * std::numbers::pi;
        unwrapped += delta;
        prev = a;
    }
    return std::abs(unwrapped - std::arg(at_u)) < 1e-9;
}

}  // namespace detail

/// psi_hat_n(u) = -L^{-1}(phi_n(u)) from a sample.
template <LaplaceInverter Inverter>
ExponentEstimate exponent_estimate(const SampleSet& sample, const Inverter& inverter, const Matrix& freqs,
                                   double guard) {
    if (freqs.rows() == 0) throw InvalidParameter("exponent estimate needs at least one frequency");
    const auto cf = ecf_many(sample.increments, freqs);
    if (!inverter.branch_sensitive()) return exponent_estimate_from_values(freqs, cf, inverter, guard);

    // Frequencies whose phase wraps past the principal branch are masked.
    std::vector<Complex> checked = cf;
    for (Eigen::Index i = 0; i < freqs.rows(); ++i) {
        auto& v = checked[static_cast<std::size_t>(i)];
        if (std::abs(v) < guard) continue;
        if (!detail::principal_phase_is_continuous(sample.increments, freqs.row(i).transpose(), v))
            v = Complex(0.0, 0.0);
    }
    auto est = exponent_estimate_from_values(freqs, checked, inverter, guard);
    est.cf_values = cf;
    return est;
}

template <LaplaceInverter Inverter>
ExponentEstimate exponent_estimate(const SampleSet& sample, const Inverter& inverter, const Matrix& freqs) {
    return exponent_estimate(sample, inverter, freqs, default_inversion_guard(sample.size()));
}

// ---------------------------------------------------------------- empirical inverse

/// Partial Bell polynomials B_{n,k}(x_1, ..., x_{n-k+1}) for 0 <= k <= n <= order,
/// by B_{n,k} = sum_i binom(n-1, i-1) x_i B_{n-i,k-1}. `x[0]` holds x_1.
inline std::vector<std::vector<long double>> partial_bell_table(const std::vector<long double>& x, int order) {
    std::vector<std::vector<long double>> binom(static_cast<std::size_t>(order + 1));
    for (int n = 0; n <= order; ++n) {
        binom[n].assign(static_cast<std::size_t>(n + 1), 1.0L);
        for (int k = 1; k < n; ++k) binom[n][k] = binom[n - 1][k - 1] + binom[n - 1][k];
    }
    std::vector<std::vector<long double>> b(static_cast<std::size_t>(order + 1),
                                            std::vector<long double>(static_cast<std::size_t>(order + 1), 0.0L));
    b[0][0] = 1.0L;
    for (int n = 1; n <= order; ++n)
        for (int k = 1; k <= n; ++k) {
            long double s = 0.0L;
            for (int i = 1; i <= n - k + 1; ++i)
                if (static_cast<std::size_t>(i) <= x.size()) s += binom[n - 1][i - 1] * x[i - 1] * b[n - i][k - 1];
            b[n][k] = s;
        }
    return b;
}

/// Truncated Taylor series of the inverse of the empirical Laplace transform
/// L_m(z) = (1/m) sum_j exp(-z T_j) around w = 1, from Lagrange inversion.
class EmpiricalLaplaceInverse {
public:
    static constexpr int max_order = 30;
    static constexpr double default_radius = 0.5;

    EmpiricalLaplaceInverse(const Vector& clock_sample, int order, double radius = default_radius)
        : order_(order), sample_size_(clock_sample.size()), radius_(radius) {
        if (order < 1 || order > max_order) throw InvalidParameter("series order must lie in [1, 30]");
        if (clock_sample.size() < order + 1) throw InvalidParameter("clock sample size must be at least J + 1");
        if (!(radius > 0)) throw InvalidParameter("series radius must be positive");
        if ((clock_sample.array() < 0).any() || !clock_sample.allFinite())
            throw InvalidParameter("clock increments must be finite and nonnegative");

        const auto m = static_cast<long double>(clock_sample.size());
        long double m1 = 0.0L;
        for (Eigen::Index j = 0; j < clock_sample.size(); ++j) m1 += clock_sample(j);
        m1 /= m;
        if (!(m1 > 0)) throw InvalidParameter("degenerate clock sample: all increments are zero");

        // Moments of T / M_1; the inverse rescales by 1 / M_1 at the end.
        std::vector<long double> scaled(static_cast<std::size_t>(order + 1), 0.0L);
        for (Eigen::Index j = 0; j < clock_sample.size(); ++j) {
            const long double t = clock_sample(j) / m1;
            long double p = 1.0L;
            for (int k = 1; k <= order + 1; ++k) {
                p *= t;
                scaled[k - 1] += p;
            }
        }
        moments_.resize(static_cast<std::size_t>(order + 1));
        long double m1k = 1.0L;
        for (int k = 1; k <= order + 1; ++k) {
            scaled[k - 1] /= m;
            m1k *= m1;
            moments_[k - 1] = static_cast<double>(scaled[k - 1] * m1k);
        }

        // L_m(z/M_1) - 1 = sum_k f_k z^k / k! with f_k = (-1)^k M_k / M_1^k, so
        // f_1 = -1 and the reduced coefficients f_{k+1} / ((k+1) f_1) equal
        // (-1)^k Mhat_k with Mhat_k = M_{k+1} / ((k+1) M_1) in the scaled units.
        std::vector<long double> reduced(static_cast<std::size_t>(order), 0.0L);
        for (int k = 1; k <= order; ++k) {
            const long double mhat = scaled[k] / static_cast<long double>(k + 1);
            reduced[k - 1] = (k % 2 == 0 ? 1.0L : -1.0L) * mhat;
        }
        const auto bell = partial_bell_table(reduced, order);
        coefficients_.resize(static_cast<std::size_t>(order));
        for (int j = 1; j <= order; ++j) {
            long double h;
            if (j == 1) {
                h = -1.0L;
            } else {
                long double s = 0.0L;
                long double rising = 1.0L;
                for (int k = 1; k <= j - 1; ++k) {
                    rising *= static_cast<long double>(j + k - 1);
                    s += (k % 2 == 0 ? 1.0L : -1.0L) * rising * bell[j - 1][k];
                }
                // 1 / f_1^j = (-1)^j.
                h = (j % 2 == 0 ? 1.0L : -1.0L) * s;
            }
            coefficients_[j - 1] = static_cast<double>(h / m1);
        }
    }

    int order() const { return order_; }
    Eigen::Index sample_size() const { return sample_size_; }
    double radius() const { return radius_; }
    /// M_1..M_{J+1}.
    const std::vector<double>& moments() const { return moments_; }
    /// H_1..H_J, the derivatives of the inverse at w = 1.
    const std::vector<double>& coefficients() const { return coefficients_; }

    /// Partial sum of H_j (w - 1)^j / j! for j <= J.
    Complex evaluate(Complex w) const {
        if (std::abs(w - 1.0) > radius_) throw OutOfDomain("argument outside the series disk");
        const Complex x = w - 1.0;
        Complex acc = 0.0;
        for (int j = order_; j >= 1; --j) acc = (acc + coefficients_[j - 1]) * x / static_cast<double>(j);
        return acc;
    }

    Complex inverse(Complex w, double guard = LaplaceFamily::default_guard) const {
        if (!(std::abs(w) >= guard)) throw InversionGuard("Laplace inverse argument too close to zero");
        return evaluate(w);
    }

    bool branch_sensitive() const { return false; }

private:
    int order_;
    Eigen::Index sample_size_;
    double radius_;
    std::vector<double> moments_;
    std::vector<double> coefficients_;
};

inline EmpiricalLaplaceInverse empirical_laplace_inverse(const Vector& clock_sample, int order,
                                                         double radius = EmpiricalLaplaceInverse::default_radius) {
    return EmpiricalLaplaceInverse(clock_sample, order, radius);
}

inline Complex evaluate_series(const EmpiricalLaplaceInverse& inv, Complex w) { return inv.evaluate(w); }

}  // namespace lowrank_levy
