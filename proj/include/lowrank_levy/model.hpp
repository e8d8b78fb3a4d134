#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <string>
#include <variant>

#include <Eigen/Dense>

#include "errors.hpp"

namespace lowrank_levy {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Complex = std::complex<double>;

// ---------------------------------------------------------------- jumps

struct NoJumps {};

/// Independent NIG Lévy components, one per coordinate, parameters per unit
/// of business time. mu is the NIG location (drift of the jump part).
struct IndependentNIG {
    double alpha = 1.0;
    double beta = 0.0;
    double delta = 1.0;
    double mu = 0.0;
};

/// Per coordinate: Poisson(intensity) many standard normal jumps per unit time.
struct CompoundPoissonGaussian {
    double intensity = 1.0;
};

using JumpSpec = std::variant<NoJumps, IndependentNIG, CompoundPoissonGaussian>;

// ---------------------------------------------------------------- clocks

/// T_j = step.
struct DeterministicClock {
    double step = 1.0;
};

/// T_j ~ Exp with mean `mean`, Laplace transform 1/(1 + mean z).
struct ExponentialClock {
    double mean = 1.0;
};

/// T_j ~ Gamma(shape, rate), Laplace transform (1 + z/rate)^(-shape).
struct GammaClock {
    double shape = 1.0;
    double rate = 1.0;
};

/// T_j = integral of a stationary CIR process dZ = kappa(eta - Z)dt + xi sqrt(Z) dW
/// over [j-1, j].
struct IntegratedCirClock {
    double kappa = 1.0;
    double eta = 1.0;
    double xi = 1.0;
};

using ClockSpec = std::variant<DeterministicClock, ExponentialClock, GammaClock, IntegratedCirClock>;

namespace detail {
inline void require(bool ok, const char* what) {
    if (!ok) throw InvalidParameter(what);
}
inline bool positive(double x) { return std::isfinite(x) && x > 0; }
}  // namespace detail

inline void validate(const JumpSpec& jumps) {
    using detail::require;
    if (const auto* nig = std::get_if<IndependentNIG>(&jumps)) {
        require(detail::positive(nig->alpha), "NIG alpha must be positive");
        require(std::isfinite(nig->beta) && std::abs(nig->beta) < nig->alpha, "NIG requires |beta| < alpha");
        require(detail::positive(nig->delta), "NIG delta must be positive");
        require(std::isfinite(nig->mu), "NIG mu must be finite");
    } else if (const auto* cp = std::get_if<CompoundPoissonGaussian>(&jumps)) {
        require(detail::positive(cp->intensity), "compound Poisson intensity must be positive");
    }
}

inline void validate(const ClockSpec& clock) {
    using detail::require;
    std::visit(
        [](const auto& c) {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, DeterministicClock>) {
                require(detail::positive(c.step), "deterministic clock step must be positive");
            } else if constexpr (std::is_same_v<T, ExponentialClock>) {
                require(detail::positive(c.mean), "exponential clock mean must be positive");
            } else if constexpr (std::is_same_v<T, GammaClock>) {
                require(detail::positive(c.shape) && detail::positive(c.rate),
                        "gamma clock shape and rate must be positive");
            } else {
                require(detail::positive(c.kappa) && detail::positive(c.eta) && detail::positive(c.xi),
                        "CIR clock parameters must be positive");
                require(2.0 * c.kappa * c.eta > c.xi * c.xi, "CIR clock violates the Feller condition 2 kappa eta > xi^2");
            }
        },
        clock);
}

/// Mean of one clock increment.
inline double clock_mean(const ClockSpec& clock) {
    return std::visit(
        [](const auto& c) -> double {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, DeterministicClock>) return c.step;
            else if constexpr (std::is_same_v<T, ExponentialClock>) return c.mean;
            else if constexpr (std::is_same_v<T, GammaClock>) return c.shape / c.rate;
            else return c.eta;
        },
        clock);
}

// ---------------------------------------------------------------- model

/// Generative description of Y_j = X_{T(j)} - X_{T(j-1)} where X has Lévy
/// triplet (sigma, drift, jumps) and T is driven by `clock`.
class ModelSpec {
public:
    ModelSpec(const Matrix& sigma, JumpSpec jumps, ClockSpec clock, Vector drift = Vector())
        : jumps_(jumps), clock_(clock) {
        const auto d = sigma.rows();
        detail::require(d >= 1 && sigma.cols() == d, "sigma must be a non-empty square matrix");
        detail::require(sigma.allFinite(), "sigma must be finite");
        const double scale = std::max(1.0, sigma.cwiseAbs().maxCoeff());
        detail::require((sigma - sigma.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale,
                        "sigma must be symmetric");
        if (drift.size() == 0) drift = Vector::Zero(d);
        detail::require(drift.size() == d, "drift dimension does not match sigma");
        detail::require(drift.allFinite(), "drift must be finite");
        validate(jumps_);
        validate(clock_);

        const Matrix sym = 0.5 * (sigma + sigma.transpose());
        Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
        Vector ev = eig.eigenvalues();
        detail::require(ev.minCoeff() >= -1e-10, "sigma must be positive semi-definite");
        ev = ev.cwiseMax(0.0);
        const Matrix& q = eig.eigenvectors();
        sigma_ = q * ev.asDiagonal() * q.transpose();
        sigma_ = 0.5 * (sigma_ + sigma_.transpose());
        root_ = q * ev.cwiseSqrt().asDiagonal() * q.transpose();
        drift_ = std::move(drift);
    }

    Eigen::Index dim() const { return sigma_.rows(); }
    const Matrix& sigma() const { return sigma_; }
    /// Symmetric square root of sigma.
    const Matrix& sigma_root() const { return root_; }
    const Vector& drift() const { return drift_; }
    const JumpSpec& jumps() const { return jumps_; }
    const ClockSpec& clock() const { return clock_; }

    /// Total jump activity nu(R^d); zero when infinite or absent.
    double jump_activity() const {
        if (const auto* cp = std::get_if<CompoundPoissonGaussian>(&jumps_))
            return cp->intensity * static_cast<double>(dim());
        return 0.0;
    }

    /// Canonical text form, used for hashing and config echoes.
    std::string canonical() const {
        std::string s = "d=" + std::to_string(dim()) + ";sigma=";
        for (Eigen::Index i = 0; i < dim(); ++i)
            for (Eigen::Index j = 0; j < dim(); ++j) s += fmt_num(sigma_(i, j)) + ",";
        s += ";drift=";
        for (Eigen::Index i = 0; i < dim(); ++i) s += fmt_num(drift_(i)) + ",";
        s += ";jumps=";
        std::visit(
            [&](const auto& j) {
                using T = std::decay_t<decltype(j)>;
                if constexpr (std::is_same_v<T, NoJumps>) s += "none";
                else if constexpr (std::is_same_v<T, IndependentNIG>)
                    s += "nig(" + fmt_num(j.alpha) + "," + fmt_num(j.beta) + "," + fmt_num(j.delta) + "," +
                         fmt_num(j.mu) + ")";
                else s += "cpg(" + fmt_num(j.intensity) + ")";
            },
            jumps_);
        s += ";clock=";
        std::visit(
            [&](const auto& c) {
                using T = std::decay_t<decltype(c)>;
                if constexpr (std::is_same_v<T, DeterministicClock>) s += "deterministic(" + fmt_num(c.step) + ")";
                else if constexpr (std::is_same_v<T, ExponentialClock>) s += "exponential(" + fmt_num(c.mean) + ")";
                else if constexpr (std::is_same_v<T, GammaClock>)
                    s += "gamma(" + fmt_num(c.shape) + "," + fmt_num(c.rate) + ")";
                else s += "cir(" + fmt_num(c.kappa) + "," + fmt_num(c.eta) + "," + fmt_num(c.xi) + ")";
            },
            clock_);
        return s;
    }

    /// FNV-1a 64 of the canonical form.
    std::uint64_t digest() const {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (unsigned char c : canonical()) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        return h;
    }

private:
    static std::string fmt_num(double x) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", x);
        return buf;
    }

    Matrix sigma_;
    Matrix root_;
    Vector drift_;
    JumpSpec jumps_;
    ClockSpec clock_;
};

inline std::string hex_digest(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace lowrank_levy
