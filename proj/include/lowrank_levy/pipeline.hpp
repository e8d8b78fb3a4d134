#pragma once

#include <cstdint>
#include <optional>

#include "design.hpp"
#include "frequency.hpp"
#include "laplace.hpp"
#include "rng.hpp"
#include "sim.hpp"
#include "solver.hpp"
#include "spectral.hpp"

namespace lowrank_levy {

/// Spectral cut-off rule c * n^p; the default is the 0.7 n^{1/4} rule of thumb.
struct CutoffRule {
    double scale = 0.7;
    double power = 0.25;
    std::optional<double> fixed;

    double operator()(Eigen::Index n) const {
        if (fixed) return *fixed;
        return scale * std::pow(static_cast<double>(n), power);
    }
};

struct SchemeOptions {
    SchemeMode mode = SchemeMode::MonteCarloCube;
    Eigen::Index count = 70;
    AnnulusOptions annulus{};
};

inline FrequencyScheme make_scheme(const SchemeOptions& opt, Eigen::Index dim, double cutoff, std::uint64_t seed) {
    if (opt.mode == SchemeMode::AnnulusQuadrature) return annulus_quadrature(dim, cutoff, opt.annulus);
    return monte_carlo_cube(dim, cutoff, opt.count, seed);
}

/// The spectral estimate and the design it induces, before any solve.
struct SpectralFit {
    FrequencyScheme scheme;
    ExponentEstimate exponent;
    Design design;
};

template <LaplaceInverter Inverter>
SpectralFit spectral_fit(const SampleSet& sample, const Inverter& inverter, FrequencyScheme scheme, bool intercept,
                         std::optional<double> guard = std::nullopt) {
    auto exponent = exponent_estimate(sample, inverter, scheme.freqs, guard.value_or(default_inversion_guard(sample.size())));
    auto design = build_design(exponent, scheme, intercept);
    return {std::move(scheme), std::move(exponent), std::move(design)};
}

}  // namespace lowrank_levy
