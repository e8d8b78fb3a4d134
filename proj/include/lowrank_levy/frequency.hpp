#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "model.hpp"
#include "rng.hpp"

namespace lowrank_levy {

enum class SchemeMode { MonteCarloCube, AnnulusQuadrature };

/// Radial weight profile w(|v|), supported on 1/4 < |v| <= 1/2.
using RadialProfile = std::function<double(double)>;

inline double indicator_annulus(double r) { return (r > 0.25 && r <= 0.5) ? 1.0 : 0.0; }

/// Frequencies u_i (rows of `freqs`) and weights discretizing the weighted
/// L2 objective.
struct FrequencyScheme {
    SchemeMode mode = SchemeMode::MonteCarloCube;
    double cutoff = 2.0;
    Matrix freqs;
    Vector weights;

    Eigen::Index count() const { return freqs.rows(); }
    Eigen::Index dim() const { return freqs.cols(); }
};

inline FrequencyScheme monte_carlo_cube(Eigen::Index dim, double cutoff, Eigen::Index count, std::uint64_t seed) {
    if (dim < 1 || count < 1) throw InvalidParameter("Monte Carlo scheme needs dim >= 1 and count >= 1");
    if (!(cutoff > 1)) throw InvalidParameter("spectral cut-off must exceed 1");
    auto rng = make_engine(seed);
    std::uniform_real_distribution<double> unif(-cutoff, cutoff);
    FrequencyScheme s;
    s.mode = SchemeMode::MonteCarloCube;
    s.cutoff = cutoff;
    s.freqs.resize(count, dim);
    for (Eigen::Index i = 0; i < count; ++i)
        for (Eigen::Index k = 0; k < dim; ++k) s.freqs(i, k) = unif(rng);
    s.weights = Vector::Constant(count, 1.0 / static_cast<double>(count));
    return s;
}

namespace detail {

/// Gauss–Legendre nodes and weights on [a, b] (Golub–Welsch).
inline std::pair<Vector, Vector> gauss_legendre(int points, double a, double b) {
    Matrix jacobi = Matrix::Zero(points, points);
    for (int k = 1; k < points; ++k) {
        const double beta = k / std::sqrt(4.0 * k * k - 1.0);
        jacobi(k, k - 1) = beta;
        jacobi(k - 1, k) = beta;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(jacobi);
    Vector nodes = eig.eigenvalues();
    Vector weights = 2.0 * eig.eigenvectors().row(0).transpose().array().square();
    nodes = (0.5 * (b - a)) * nodes.array() + 0.5 * (a + b);
    weights *= 0.5 * (b - a);
    return {nodes, weights};
}

inline std::vector<int> first_primes(int count) {
    std::vector<int> primes;
    for (int c = 2; static_cast<int>(primes.size()) < count; ++c) {
        bool prime = true;
        for (int p : primes) {
            if (p * p > c) break;
            if (c % p == 0) {
                prime = false;
                break;
            }
        }
        if (prime) primes.push_back(c);
    }
    return primes;
}

inline double radical_inverse(long long index, int base) {
    double result = 0.0;
    double f = 1.0 / base;
    while (index > 0) {
        result += f * static_cast<double>(index % base);
        index /= base;
        f /= base;
    }
    return result;
}

/// Unit directions from a Halton sequence pushed through Box–Muller.
inline Matrix halton_directions(Eigen::Index dim, Eigen::Index count) {
    const auto pairs = static_cast<int>((dim + 1) / 2);
    const auto primes = first_primes(2 * pairs);
    Matrix dirs(count, dim);
    for (Eigen::Index i = 0; i < count; ++i) {
        Vector g(2 * pairs);
        for (int p = 0; p < pairs; ++p) {
            const double u1 = radical_inverse(i + 1, primes[2 * p]);
            const double u2 = radical_inverse(i + 1, primes[2 * p + 1]);
            const double r = std::sqrt(-2.0 * std::log(u1));
            g(2 * p) = r * std::cos(2 * std::numbers::pi * u2);
            g(2 * p + 1) = r * std::sin(2 * std::numbers::pi * u2);
        }
        Vector v = g.head(dim);
        dirs.row(i) = (v / v.norm()).transpose();
    }
    return dirs;
}

}  // namespace detail

struct AnnulusOptions {
    int radial_nodes = 4;
    Eigen::Index directions = 256;
    RadialProfile profile = indicator_annulus;
};

/// Product quadrature of w_U(u) du: Gauss–Legendre in the radius times
/// equal-weight quasi-random directions. Frequencies are u = U r theta with
/// weights approximating w(v) dv at v = r theta.
inline FrequencyScheme annulus_quadrature(Eigen::Index dim, double cutoff, const AnnulusOptions& opt = {}) {
    if (dim < 1) throw InvalidParameter("annulus scheme needs dim >= 1");
    if (!(cutoff > 1)) throw InvalidParameter("spectral cut-off must exceed 1");
    if (opt.radial_nodes < 1 || opt.directions < 1) throw InvalidParameter("annulus quadrature needs nodes");
    const auto [radii, rw] = detail::gauss_legendre(opt.radial_nodes, 0.25, 0.5);
    const Matrix dirs = detail::halton_directions(dim, opt.directions);
    const double d = static_cast<double>(dim);
    const double sphere = 2.0 * std::pow(std::numbers::pi, d / 2.0) / std::tgamma(d / 2.0);

    FrequencyScheme s;
    s.mode = SchemeMode::AnnulusQuadrature;
    s.cutoff = cutoff;
    const Eigen::Index total = opt.radial_nodes * opt.directions;
    s.freqs.resize(total, dim);
    s.weights.resize(total);
    Eigen::Index row = 0;
    for (int r = 0; r < opt.radial_nodes; ++r) {
        const double w = rw(r) * std::pow(radii(r), d - 1.0) * sphere / static_cast<double>(opt.directions) *
                         opt.profile(radii(r));
        for (Eigen::Index k = 0; k < opt.directions; ++k, ++row) {
            s.freqs.row(row) = cutoff * radii(r) * dirs.row(k);
            s.weights(row) = w;
        }
    }
    return s;
}

/// kappa_lower^2 = int v_1^4 / |v|^4 w(v) dv and kappa_upper^2 = 8 int |v|^-4 w(v) dv
/// on the scheme's own quadrature.
struct IsometryConstants {
    double lower_sq = 0.0;
    double upper_sq = 0.0;
};

inline IsometryConstants isometry_constants(const FrequencyScheme& s) {
    if (s.mode != SchemeMode::AnnulusQuadrature)
        throw InvalidParameter("isometry constants are defined for the annulus scheme only");
    IsometryConstants c;
    for (Eigen::Index i = 0; i < s.count(); ++i) {
        const Vector v = s.freqs.row(i).transpose() / s.cutoff;
        const double r2 = v.squaredNorm();
        c.lower_sq += s.weights(i) * std::pow(v(0), 4) / (r2 * r2);
        c.upper_sq += 8.0 * s.weights(i) / (r2 * r2);
    }
    return c;
}

}  // namespace lowrank_levy
