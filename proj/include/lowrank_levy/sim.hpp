#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <random>
#include <variant>

#include "laplace.hpp"
#include "model.hpp"
#include "rng.hpp"

namespace lowrank_levy {

/// n observed increments Y_j (rows) with provenance.
struct SampleSet {
    Matrix increments;
    std::uint64_t seed = 0;
    std::uint64_t spec_digest = 0;
    /// Realized clock increments T_j, when known.
    std::optional<Vector> clock_increments;

    Eigen::Index size() const { return increments.rows(); }
    Eigen::Index dim() const { return increments.cols(); }
};

/// Sub-steps per unit interval for the integrated CIR clock.
inline constexpr int cir_substeps = 64;

/// Inverse Gaussian draw by the Michael–Schucany–Haas transformation.
template <class Rng>
double sample_inverse_gaussian(double mean, double shape, Rng& rng) {
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> uniform;
    const double v = normal(rng);
    const double y = v * v;
    const double my = mean * y;
    const double x = mean + mean * my / (2.0 * shape) -
                     mean / (2.0 * shape) * std::sqrt(4.0 * shape * my + my * my);
    if (uniform(rng) <= mean / (mean + x)) return x;
    return mean * mean / x;
}

/// NIG Lévy increment over business time t, as a normal variance–mean mixture.
template <class Rng>
double sample_nig_increment(const IndependentNIG& p, double t, Rng& rng) {
    if (t <= 0) return 0.0;
    const double g = std::sqrt(p.alpha * p.alpha - p.beta * p.beta);
    const double z = sample_inverse_gaussian(t * p.delta / g, t * t * p.delta * p.delta, rng);
    std::normal_distribution<double> normal;
    return p.mu * t + p.beta * z + std::sqrt(z) * normal(rng);
}

namespace detail {

/// One exact CIR transition over `dt`: scaled noncentral chi-square drawn as a
/// Poisson mixture of central chi-squares.
template <class Rng>
double cir_transition(const IntegratedCirClock& c, double z, double dt, Rng& rng) {
    const double decay = std::exp(-c.kappa * dt);
    const double scale = c.xi * c.xi * (1.0 - decay) / (4.0 * c.kappa);
    const double dof = 4.0 * c.kappa * c.eta / (c.xi * c.xi);
    const double noncentrality = z * decay / scale;
    long long k = 0;
    if (noncentrality > 0) {
        std::poisson_distribution<long long> poisson(noncentrality / 2.0);
        k = poisson(rng);
    }
    std::gamma_distribution<double> chi2_half((dof + 2.0 * static_cast<double>(k)) / 2.0, 1.0);
    return scale * 2.0 * chi2_half(rng);
}

}  // namespace detail

/// Realized clock increments T_1..T_n.
template <class Rng>
Vector sample_clock(const ClockSpec& clock, Eigen::Index n, Rng& rng) {
    if (n < 1) throw InvalidParameter("sample_clock requires n >= 1");
    validate(clock);
    Vector t(n);
    std::visit(
        [&](const auto& c) {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, DeterministicClock>) {
                t.setConstant(c.step);
            } else if constexpr (std::is_same_v<T, ExponentialClock>) {
                std::exponential_distribution<double> exp(1.0 / c.mean);
                for (Eigen::Index j = 0; j < n; ++j) t(j) = exp(rng);
            } else if constexpr (std::is_same_v<T, GammaClock>) {
                std::gamma_distribution<double> gamma(c.shape, 1.0 / c.rate);
                for (Eigen::Index j = 0; j < n; ++j) t(j) = gamma(rng);
            } else {
                const double xi2 = c.xi * c.xi;
                std::gamma_distribution<double> stationary(2.0 * c.kappa * c.eta / xi2, xi2 / (2.0 * c.kappa));
                const double dt = 1.0 / cir_substeps;
                double z = stationary(rng);
                for (Eigen::Index j = 0; j < n; ++j) {
                    double integral = 0.0;
                    for (int s = 0; s < cir_substeps; ++s) {
                        const double next = detail::cir_transition(c, z, dt, rng);
                        integral += 0.5 * (z + next) * dt;
                        z = next;
                    }
                    t(j) = integral;
                }
            }
        },
        clock);
    return t;
}

/// Y_j = sigma^{1/2} sqrt(T_j) G_j + J(T_j) + drift T_j, conditionally
/// independent given T_j. A pure function of (spec, n, seed).
inline SampleSet sample_increments(const ModelSpec& spec, Eigen::Index n, std::uint64_t seed) {
    if (n < 1) throw InvalidParameter("sample_increments requires n >= 1");
    Engine rng = make_engine(seed);
    const Eigen::Index d = spec.dim();
    Vector clock = sample_clock(spec.clock(), n, rng);

    SampleSet out;
    out.seed = seed;
    out.spec_digest = spec.digest();
    out.increments.resize(n, d);

    std::normal_distribution<double> normal;
    Vector g(d);
    const Matrix& root = spec.sigma_root();
    const Vector& drift = spec.drift();
    for (Eigen::Index j = 0; j < n; ++j) {
        const double tj = clock(j);
        for (Eigen::Index k = 0; k < d; ++k) g(k) = normal(rng);
        Vector y = std::sqrt(tj) * (root * g) + tj * drift;
        std::visit(
            [&](const auto& jumps) {
                using T = std::decay_t<decltype(jumps)>;
                if constexpr (std::is_same_v<T, IndependentNIG>) {
                    for (Eigen::Index k = 0; k < d; ++k) y(k) += sample_nig_increment(jumps, tj, rng);
                } else if constexpr (std::is_same_v<T, CompoundPoissonGaussian>) {
                    std::poisson_distribution<long long> count(jumps.intensity * tj);
                    for (Eigen::Index k = 0; k < d; ++k) {
                        const auto m = count(rng);
                        // A sum of m standard normals is N(0, m).
                        if (m > 0) y(k) += std::sqrt(static_cast<double>(m)) * normal(rng);
                    }
                }
            },
            spec.jumps());
        out.increments.row(j) = y.transpose();
    }
    out.clock_increments = std::move(clock);
    return out;
}

/// Lévy–Khintchine exponent psi(u) per unit of business time.
inline Complex characteristic_exponent(const ModelSpec& spec, const Vector& u) {
    if (u.size() != spec.dim()) throw InvalidParameter("frequency dimension does not match the model");
    Complex psi(-0.5 * u.dot(spec.sigma() * u), spec.drift().dot(u));
    std::visit(
        [&](const auto& jumps) {
            using T = std::decay_t<decltype(jumps)>;
            if constexpr (std::is_same_v<T, IndependentNIG>) {
                const double a2 = jumps.alpha * jumps.alpha;
                const double g = std::sqrt(a2 - jumps.beta * jumps.beta);
                for (Eigen::Index k = 0; k < u.size(); ++k) {
                    const Complex b(jumps.beta, u(k));
                    psi += jumps.delta * (g - std::sqrt(a2 - b * b)) + Complex(0.0, jumps.mu * u(k));
                }
            } else if constexpr (std::is_same_v<T, CompoundPoissonGaussian>) {
                for (Eigen::Index k = 0; k < u.size(); ++k)
                    psi += jumps.intensity * (std::exp(-0.5 * u(k) * u(k)) - 1.0);
            }
        },
        spec.jumps());
    return psi;
}

/// phi(u) = L(-psi(u)).
inline Complex true_characteristic_function(const ModelSpec& spec, const Vector& u) {
    const LaplaceFamily family(spec.clock());
    return family(-characteristic_exponent(spec, u));
}

}  // namespace lowrank_levy
