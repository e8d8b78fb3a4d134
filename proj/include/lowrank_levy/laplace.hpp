#pragma once

#include <cmath>
#include <complex>
#include <string>
#include <variant>

#include "errors.hpp"
#include "model.hpp"

namespace lowrank_levy {

namespace detail {

/// Laplace transform of the integral over [0, 1] of a stationary CIR process.
/// Affine closed form with Gamma(2 kappa eta / xi^2, rate 2 kappa / xi^2)
/// initial law. Written with e^{-gamma} so that every log argument stays in
/// the right half plane for Re z >= 0.
inline Complex integrated_cir_laplace(const IntegratedCirClock& c, Complex z) {
    const double k = c.kappa;
    const double xi2 = c.xi * c.xi;
    const double shape = 2.0 * k * c.eta / xi2;
    const double rate = 2.0 * k / xi2;
    const Complex g = std::sqrt(Complex(k * k) + 2.0 * xi2 * z);
    const Complex e = std::exp(-g);
    const Complex ratio = (g - k) / (g + k);
    const Complex tail = 1.0 + e * ratio;
    const Complex log_a = shape * ((k - g) / 2.0 + std::log(2.0 * g / (g + k)) - std::log(tail));
    const Complex b = 2.0 * z * (1.0 - e) / ((g + k) * tail);
    return std::exp(log_a - shape * std::log(1.0 + b / rate));
}

}  // namespace detail

/// Laplace transform of the clock-increment law, with derivative and a
/// continuously chosen inverse on the image of {Re z > 0}.
class LaplaceFamily {
public:
    /// Inverse arguments below this modulus are rejected outright.
    static constexpr double default_guard = 1e-12;

    explicit LaplaceFamily(ClockSpec clock) : clock_(clock) {
        validate(clock_);
        if (const auto* cir = std::get_if<IntegratedCirClock>(&clock_)) {
            // Two-moment Gamma surrogate used as Newton start.
            const double h = 1e-3;
            const double m1 = cir->eta;
            const double l0 = 1.0, lp = detail::integrated_cir_laplace(*cir, h).real(),
                         lpp = detail::integrated_cir_laplace(*cir, 2 * h).real(),
                         lm = detail::integrated_cir_laplace(*cir, -h).real(),
                         lmm = detail::integrated_cir_laplace(*cir, -2 * h).real();
            const double m2 = (-lpp + 16 * lp - 30 * l0 + 16 * lm - lmm) / (12 * h * h);
            const double var = std::max(m2 - m1 * m1, 1e-12 * m1 * m1);
            start_ = GammaClock{m1 * m1 / var, m1 / var};
        }
    }

    const ClockSpec& clock() const { return clock_; }

    std::string tag() const {
        return std::visit(
            [](const auto& c) -> std::string {
                using T = std::decay_t<decltype(c)>;
                if constexpr (std::is_same_v<T, DeterministicClock>) return "deterministic";
                else if constexpr (std::is_same_v<T, ExponentialClock>) return "exponential";
                else if constexpr (std::is_same_v<T, GammaClock>) return "gamma";
                else return "integrated_cir";
            },
            clock_);
    }

    /// Mean clock increment, equal to -L'(0).
    double mean() const { return clock_mean(clock_); }

    Complex operator()(Complex z) const {
        return std::visit(
            [z](const auto& c) -> Complex {
                using T = std::decay_t<decltype(c)>;
                if constexpr (std::is_same_v<T, DeterministicClock>) return std::exp(-c.step * z);
                else if constexpr (std::is_same_v<T, ExponentialClock>) return 1.0 / (1.0 + c.mean * z);
                else if constexpr (std::is_same_v<T, GammaClock>)
                    return std::exp(-c.shape * std::log(1.0 + z / c.rate));
                else return detail::integrated_cir_laplace(c, z);
            },
            clock_);
    }

    Complex derivative(Complex z) const {
        return std::visit(
            [this, z](const auto& c) -> Complex {
                using T = std::decay_t<decltype(c)>;
                if constexpr (std::is_same_v<T, DeterministicClock>) return -c.step * std::exp(-c.step * z);
                else if constexpr (std::is_same_v<T, ExponentialClock>) {
                    const Complex den = 1.0 + c.mean * z;
                    return -c.mean / (den * den);
                } else if constexpr (std::is_same_v<T, GammaClock>)
                    return -(c.shape / c.rate) * std::exp(-(c.shape + 1.0) * std::log(1.0 + z / c.rate));
                else {
                    const double h = 1e-6 * std::max(1.0, std::abs(z));
                    return ((*this)(z + h) - (*this)(z - h)) / (2.0 * h);
                }
            },
            clock_);
    }

    /// Continuously chosen inverse (principal branch for the closed forms).
    /// Throws InversionGuard when |w| < guard or when the numeric inverse
    /// does not converge.
    Complex inverse(Complex w, double guard = default_guard) const {
        if (!(std::abs(w) >= guard)) throw InversionGuard("Laplace inverse argument too close to zero");
        return std::visit(
            [this, w](const auto& c) -> Complex {
                using T = std::decay_t<decltype(c)>;
                if constexpr (std::is_same_v<T, DeterministicClock>) return -std::log(w) / c.step;
                else if constexpr (std::is_same_v<T, ExponentialClock>) return (1.0 / w - 1.0) / c.mean;
                else if constexpr (std::is_same_v<T, GammaClock>) return gamma_inverse(c, w);
                else return newton_inverse(w);
            },
            clock_);
    }

    /// True when Re of the principal inverse can jump across a branch cut,
    /// so that callers must track continuity along frequency rays.
    bool branch_sensitive() const {
        if (const auto* g = std::get_if<GammaClock>(&clock_)) {
            const double r = 1.0 / g->shape;
            return std::abs(r - std::round(r)) > 1e-12;
        }
        return std::holds_alternative<IntegratedCirClock>(clock_);
    }

private:
    static Complex gamma_inverse(const GammaClock& c, Complex w) {
        return c.rate * (std::exp(-std::log(w) / c.shape) - 1.0);
    }

    Complex newton_inverse(Complex w) const {
        Complex z = gamma_inverse(start_, w);
        if (z.real() < 0) z.real(0.0);
        Complex res = (*this)(z)-w;
        for (int it = 0; it < 200; ++it) {
            const double scale = std::max(1.0, std::abs(z));
            if (std::abs(res) <= 1e-15 * std::max(std::abs(w), 1e-300)) return z;
            const Complex step = res / derivative(z);
            double damping = 1.0;
            bool accepted = false;
            for (int half = 0; half < 40; ++half) {
                const Complex cand = z - damping * step;
                const Complex cand_res = (*this)(cand)-w;
                if (std::abs(cand_res) < std::abs(res)) {
                    z = cand;
                    res = cand_res;
                    accepted = true;
                    break;
                }
                damping *= 0.5;
            }
            if (!accepted || std::abs(damping * step) <= 1e-14 * scale) {
                if (std::abs(res) <= 1e-10 * std::abs(w)) return z;
                break;
            }
        }
        if (std::abs(res) <= 1e-10 * std::abs(w)) return z;
        throw InversionGuard("integrated CIR Laplace inverse did not converge");
    }

    ClockSpec clock_;
    GammaClock start_{};
};

inline LaplaceFamily laplace_family(const ClockSpec& clock) { return LaplaceFamily(clock); }

}  // namespace lowrank_levy
