#include <gtest/gtest.h>

#include <array>
#include <functional>

#include "test_support.hpp"

using namespace lowrank_levy;
using testing_support::exact_design;
using testing_support::random_psd;
using testing_support::random_symmetric;
using testing_support::grid_minimize_2x2;
using testing_support::prox_subgradient_violation;
using testing_support::random_2x2_design;

namespace {

// Stopping on relative objective change leaves parameter error near sqrt(grad_tol).
SolverConfig tight() {
    SolverConfig cfg;
    cfg.grad_tol = 1e-20;
    cfg.max_iter = 200000;
    return cfg;
}

ModelSpec gaussian_rank2(Eigen::Index d) {
    ModelConfig mc;
    mc.dim = d;
    mc.eigenvalues = {1.0, 0.5};
    return build_model(mc, 7);
}

}  // namespace

// ---------------------------------------------------------------- schemes

TEST(FrequencyScheme, MonteCarloCube) {
    const auto s = monte_carlo_cube(4, 3.0, 70, 5);
    EXPECT_EQ(s.count(), 70);
    EXPECT_LE(s.freqs.cwiseAbs().maxCoeff(), 3.0);
    EXPECT_TRUE((s.weights.array() == 1.0 / 70).all());
    EXPECT_TRUE(s.freqs == monte_carlo_cube(4, 3.0, 70, 5).freqs);
    EXPECT_FALSE(s.freqs == monte_carlo_cube(4, 3.0, 70, 6).freqs);
    EXPECT_THROW(monte_carlo_cube(4, 1.0, 70, 5), InvalidParameter);
}

TEST(FrequencyScheme, AnnulusSupportAndMass) {
    for (Eigen::Index d : {2, 3, 5, 8}) {
        const double cutoff = 4.0;
        const auto s = annulus_quadrature(d, cutoff);
        const Vector norms = s.freqs.rowwise().norm();
        EXPECT_GT(norms.minCoeff(), cutoff / 4);
        EXPECT_LE(norms.maxCoeff(), cutoff / 2 + 1e-12);
        // int over the annulus of dv = |S^{d-1}| (2^-d - 4^-d) / d; Gauss-Legendre
        // integrates r^{d-1} exactly for d <= 8.
        const double dd = static_cast<double>(d);
        const double sphere = 2 * std::pow(std::numbers::pi, dd / 2) / std::tgamma(dd / 2);
        const double mass = sphere * (std::pow(0.5, dd) - std::pow(0.25, dd)) / dd;
        EXPECT_NEAR(s.weights.sum(), mass, 1e-12 * mass) << "d=" << d;
        EXPECT_NEAR(weighted_norm_sq(Matrix::Identity(d, d), 0.0, s), s.weights.sum(), 1e-12);
    }
}

TEST(FrequencyScheme, IsometryConstantsMatchClosedForms) {
    for (Eigen::Index d : {5, 6, 8}) {
        const auto s = annulus_quadrature(d, 3.0);
        const auto k = isometry_constants(s);
        const double dd = static_cast<double>(d);
        const double sphere = 2 * std::pow(std::numbers::pi, dd / 2) / std::tgamma(dd / 2);
        // 8 int |v|^-4 dv: radial integrand r^{d-5}, exact under Gauss-Legendre.
        const double upper = 8 * sphere * (std::pow(0.5, dd - 4) - std::pow(0.25, dd - 4)) / (dd - 4);
        EXPECT_NEAR(k.upper_sq, upper, 1e-10 * upper);
        // E theta_1^4 = 3 / (d (d + 2)) on the sphere; directions are quasi-random.
        const double lower = 3.0 / (dd * (dd + 2)) * sphere * (std::pow(0.5, dd) - std::pow(0.25, dd)) / dd;
        EXPECT_NEAR(k.lower_sq, lower, 0.05 * lower);
    }
}

// ---------------------------------------------------------------- design

TEST(Design, Examples) {
    const ModelSpec m(Matrix::Identity(3, 3), NoJumps{}, DeterministicClock{1});
    FrequencyScheme s;
    s.cutoff = 4.0;
    s.freqs.resize(2, 3);
    s.freqs << 1, 0, 0, 0, 2, 0;
    s.weights = Vector::Constant(2, 0.5);
    std::vector<Complex> phi;
    for (int i = 0; i < 2; ++i) phi.push_back(true_characteristic_function(m, s.freqs.row(i).transpose()));
    const auto est = exponent_estimate_from_values(s.freqs, phi, LaplaceFamily(m.clock()), 1e-9);
    const auto design = build_design(est, s, true);
    ASSERT_EQ(design.size(), 2u);
    Matrix e1 = Matrix::Zero(3, 3);
    e1(0, 0) = 1;
    EXPECT_NEAR((design.rows[0].theta() - e1).norm(), 0.0, 1e-15);
    for (const auto& row : design.rows) {
        EXPECT_NEAR(row.response, -1.0, 1e-14);
        EXPECT_NEAR(row.theta().trace(), 1.0, 1e-12);
    }
    // |u| = U/2 gives 2 U^2 / (U^2 / 4) = 8.
    EXPECT_NEAR(design.rows[1].intercept_coeff, 8.0, 1e-14);
    EXPECT_EQ(build_design(est, s, false).rows[1].intercept_coeff, 0.0);
}

TEST(Design, MaskedFrequenciesAreDropped) {
    FrequencyScheme s = monte_carlo_cube(2, 2.0, 3, 1);
    ExponentEstimate est;
    est.freqs = s.freqs;
    est.values = {Complex(-1, 0), Complex(std::nan(""), 0), Complex(-2, 0)};
    est.masked = {false, true, false};
    EXPECT_EQ(build_design(est, s, false).size(), 2u);
    est.masked = {true, true, true};
    EXPECT_THROW(build_design(est, s, false), EmptySpectralInformation);
}

TEST(Objective, Examples) {
    std::mt19937_64 rng(1);
    const auto s = monte_carlo_cube(3, 2.0, 20, 2);
    Design d = exact_design(s.freqs, s.weights, s.cutoff, Matrix::Identity(3, 3), 0.0, false);
    EXPECT_NEAR(objective(d, Matrix::Identity(3, 3), 0.0, 0.0), 0.0, 1e-28);
    double zero_value = 0;
    for (const auto& row : d.rows) zero_value += row.weight * row.response * row.response;
    EXPECT_NEAR(objective(d, Matrix::Zero(3, 3), 0.0, 0.0), zero_value, 1e-14);
    for (auto& row : d.rows) row.response = 0;
    Matrix m = Matrix::Zero(3, 3);
    m(0, 0) = 2;
    m(1, 1) = 1;
    // Only the penalty remains once the quadratic part is removed.
    for (auto& row : d.rows) row.weight = 0;
    EXPECT_NEAR(objective(d, m, 0.0, 1.0), 3.0, 1e-14);
}

// ---------------------------------------------------------------- linear algebra

TEST(ProxNuclear, Examples) {
    Matrix m = Vector::Map(std::array<double, 3>{3, 1, 0.5}.data(), 3).asDiagonal();
    Matrix expect = Matrix::Zero(3, 3);
    expect(0, 0) = 2;
    EXPECT_NEAR((prox_nuclear(m, 1.0, PsdMode::PSDCone) - expect).norm(), 0.0, 1e-14);
    std::mt19937_64 rng(3);
    const Matrix r = random_symmetric(4, rng);
    EXPECT_NEAR((prox_nuclear(r, 0.0) - r).norm(), 0.0, 1e-13);
    Matrix neg = Matrix::Zero(2, 2);
    neg(0, 0) = -3;
    neg(1, 1) = 0.2;
    Matrix neg_expect = Matrix::Zero(2, 2);
    neg_expect(0, 0) = -2;
    EXPECT_NEAR((prox_nuclear(neg, 1.0) - neg_expect).norm(), 0.0, 1e-14);
}

TEST(ProxNuclear, MatchesGridSearch) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 5; ++trial) {
        const Matrix m = random_symmetric(2, rng);
        for (const auto mode : {PsdMode::Unconstrained, PsdMode::PSDCone}) {
            auto f = [&](const Matrix& x) { return 0.5 * (x - m).squaredNorm() + 0.5 * nuclear_norm(x); };
            const Matrix oracle = grid_minimize_2x2(f, 4.0, mode == PsdMode::PSDCone);
            EXPECT_LT((prox_nuclear(m, 0.5, mode) - oracle).norm(), 1e-3);
        }
    }
}

TEST(ProxNuclear, SubgradientOptimality) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> tau_dist(0.0, 2.0);
    for (int trial = 0; trial < 100; ++trial) {
        const Matrix m = random_symmetric(2 + trial % 5, rng);
        const double tau = tau_dist(rng);
        for (const auto mode : {PsdMode::Unconstrained, PsdMode::PSDCone})
            EXPECT_LE(prox_subgradient_violation(m, tau, mode), 1e-8) << "trial " << trial;
    }
}

TEST(NearestPsd, Examples) {
    Matrix m = Matrix::Zero(2, 2);
    m(0, 0) = 1;
    m(1, 1) = -0.5;
    Matrix expect = Matrix::Zero(2, 2);
    expect(0, 0) = 1;
    EXPECT_NEAR((nearest_psd(m) - expect).norm(), 0.0, 1e-15);
    std::mt19937_64 rng(6);
    const Matrix p = random_psd(4, 4, rng);
    EXPECT_NEAR((nearest_psd(p) - p).norm(), 0.0, 1e-12);
}

TEST(NearestPsd, ProjectionOptimalityConditions) {
    // X solves min ||X - M||_F over the PSD cone iff X >= 0, X - M >= 0 and <X, X - M> = 0.
    std::mt19937_64 rng(7);
    for (int t = 0; t < 20; ++t) {
        const Matrix m = random_symmetric(4, rng);
        const Matrix x = nearest_psd(m);
        Eigen::SelfAdjointEigenSolver<Matrix> ex(x, Eigen::EigenvaluesOnly), ed(Matrix(x - m), Eigen::EigenvaluesOnly);
        EXPECT_GE(ex.eigenvalues().minCoeff(), -1e-10);
        EXPECT_GE(ed.eigenvalues().minCoeff(), -1e-10);
        EXPECT_NEAR((x.cwiseProduct(x - m)).sum(), 0.0, 1e-10);
    }
}

TEST(NumericalRank, Examples) {
    Vector ev = Vector::Zero(10);
    ev.head(3) << 1, 0.5, 0.1;
    EXPECT_EQ(numerical_rank(ev.asDiagonal().toDenseMatrix()), 3);
    EXPECT_EQ(numerical_rank(Matrix::Zero(4, 4)), 0);
    Matrix tiny = Matrix::Zero(2, 2);
    tiny(0, 0) = 1;
    tiny(1, 1) = 1e-9;
    EXPECT_EQ(numerical_rank(tiny, 1e-6), 1);
    EXPECT_THROW(numerical_rank(tiny, 0.0), InvalidParameter);
}

// ---------------------------------------------------------------- solver

TEST(Solve, ExactGaussianDesignRecoversIdentity) {
    const Eigen::Index d = 4;
    const ModelSpec m(Matrix::Identity(d, d), NoJumps{}, DeterministicClock{1});
    const auto s = monte_carlo_cube(d, 2.0, 40, 3);
    std::vector<Complex> phi;
    for (Eigen::Index i = 0; i < s.count(); ++i) phi.push_back(true_characteristic_function(m, s.freqs.row(i).transpose()));
    const auto est = exponent_estimate_from_values(s.freqs, phi, LaplaceFamily(m.clock()), 1e-12);
    const auto report = solve(build_design(est, s, false), tight(), m.sigma());
    EXPECT_LT((report.sigma_hat - Matrix::Identity(d, d)).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_LT(*report.rel_error, 1e-6);
    EXPECT_TRUE(report.converged);
}

TEST(Solve, ZeroResidualLowRankPsd) {
    std::mt19937_64 rng(8);
    for (Eigen::Index d : {3, 5}) {
        const Matrix target = random_psd(d, 2, rng);
        const auto s = annulus_quadrature(d, 3.0, {2, 64});
        const auto design = exact_design(s.freqs, s.weights, s.cutoff, target, 0.0, false);
        const auto report = solve(design, tight());
        EXPECT_LT((report.sigma_hat - target).cwiseAbs().maxCoeff(), 1e-6) << "d=" << d;
        EXPECT_EQ(report.rank, 2);
    }
}

TEST(Solve, InterceptIsIdentifiedOnAnnulus) {
    std::mt19937_64 rng(9);
    const Matrix target = random_psd(3, 1, rng);
    const auto s = annulus_quadrature(3, 3.0, {4, 64});
    const auto design = exact_design(s.freqs, s.weights, s.cutoff, target, 2.5, true);
    SolverConfig cfg = tight();
    cfg.intercept = InterceptMode::NonnegativeInterval;
    const auto report = solve(design, cfg);
    ASSERT_TRUE(report.alpha_hat);
    EXPECT_NEAR(*report.alpha_hat, 2.5, 1e-5);
    EXPECT_LT((report.sigma_hat - target).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Solve, InterceptStaysNonnegative) {
    std::mt19937_64 rng(10);
    const Matrix target = random_psd(3, 1, rng);
    const auto s = annulus_quadrature(3, 3.0, {4, 64});
    // Responses built with a negative shift: the constrained optimum sits at a = 0.
    const auto design = exact_design(s.freqs, s.weights, s.cutoff, target, -1.0, true);
    SolverConfig cfg;
    cfg.intercept = InterceptMode::NonnegativeInterval;
    EXPECT_GE(*solve(design, cfg).alpha_hat, 0.0);
}

TEST(Solve, HugePenaltyGivesZero) {
    std::mt19937_64 rng(11);
    const auto s = monte_carlo_cube(3, 2.0, 30, 4);
    const auto design = exact_design(s.freqs, s.weights, s.cutoff, random_psd(3, 3, rng), 0.0, false);
    SolverConfig cfg;
    cfg.lambda = 1e6;
    cfg.psd_mode = PsdMode::PSDCone;
    const auto report = solve(design, cfg);
    EXPECT_EQ(report.sigma_hat.norm(), 0.0);
    EXPECT_EQ(report.rank, 0);
}

TEST(Solve, MatchesGridSearchOn2x2) {
    std::mt19937_64 rng(12);
    int instance = 0;
    for (double lambda : {0.0, 0.3, 1.0})
        for (int t = 0; t < 7 && instance < 20; ++t, ++instance) {
            const Design d = random_2x2_design(rng);
            SolverConfig cfg;
            cfg.lambda = lambda;
            const Matrix x = solve(d, cfg).sigma_hat;
            const Matrix oracle = grid_minimize_2x2([&](const Matrix& m) { return objective(d, m, 0.0, lambda); }, 20.0);
            EXPECT_LT((x - oracle).norm(), 1e-3) << "lambda=" << lambda;
        }
}

TEST(Solve, ObjectiveTraceIsMonotone) {
    const auto model = gaussian_rank2(5);
    const auto sample = sample_increments(model, 2000, 13);
    const auto s = monte_carlo_cube(5, 2.5, 70, 14);
    const auto design = build_design(exponent_estimate(sample, LaplaceFamily(model.clock()), s.freqs), s, false);
    for (double lambda : {0.0, 0.01, 0.1}) {
        SolverConfig cfg;
        cfg.lambda = lambda;
        const auto report = solve(design, cfg);
        ASSERT_GE(report.objective_trace.size(), 2u);
        for (std::size_t i = 2; i < report.objective_trace.size(); ++i)
            EXPECT_LE(report.objective_trace[i], report.objective_trace[i - 1] * (1 + 1e-15) + 1e-300);
        EXPECT_NEAR(report.objective_trace.back(), objective(design, report.sigma_hat, 0.0, lambda),
                    1e-9 * std::max(1.0, report.objective_trace.back()));
    }
}

TEST(Solve, RankNonIncreasingInLambda) {
    const auto model = gaussian_rank2(6);
    const auto sample = sample_increments(model, 3000, 15);
    const auto s = monte_carlo_cube(6, 2.5, 70, 16);
    const auto design = build_design(exponent_estimate(sample, LaplaceFamily(model.clock()), s.freqs), s, false);
    int previous = std::numeric_limits<int>::max();
    for (double lambda : {0.0, 0.001, 0.01, 0.05, 0.2}) {
        SolverConfig cfg;
        cfg.lambda = lambda;
        const int rank = solve(design, cfg).rank;
        EXPECT_LE(rank, previous) << "lambda=" << lambda;
        previous = rank;
    }
}

TEST(Solve, LipschitzConstantBoundedByRowNorms) {
    std::mt19937_64 rng(17);
    const auto s = annulus_quadrature(4, 3.0, {2, 32});
    const auto design = exact_design(s.freqs, s.weights, s.cutoff, random_psd(4, 2, rng), 1.0, true);
    const detail::LeastSquaresPart ls(design);
    double bound = 0;
    for (const auto& row : design.rows) {
        const double c = row.intercept_coeff / (design.cutoff * design.cutoff);
        bound += 2 * row.weight * (row.theta().squaredNorm() + c * c);
    }
    EXPECT_LE(ls.lipschitz(true), bound * (1 + 1e-12));
    EXPECT_GT(ls.lipschitz(true), 0.0);
}

TEST(Solve, FactorizedRecoversLowRank) {
    std::mt19937_64 rng(18);
    const Matrix target = random_psd(4, 2, rng);
    const auto s = annulus_quadrature(4, 3.0, {2, 64});
    const auto design = exact_design(s.freqs, s.weights, s.cutoff, target, 0.0, false);
    SolverConfig cfg;
    cfg.variant = Factorized{2};
    const auto report = solve(design, cfg);
    EXPECT_LT((report.sigma_hat - target).norm() / target.norm(), 1e-4);
    EXPECT_LE(report.rank, 2);
}

TEST(Solve, LowRankPlusSparseReducesToNuclear) {
    const auto model = gaussian_rank2(4);
    const auto sample = sample_increments(model, 3000, 19);
    const auto s = monte_carlo_cube(4, 2.0, 50, 20);
    const auto design = build_design(exponent_estimate(sample, LaplaceFamily(model.clock()), s.freqs), s, false);
    SolverConfig plain = tight();
    plain.lambda = 0.01;
    SolverConfig split = plain;
    split.variant = LowRankPlusSparse{1e6};
    const auto a = solve(design, plain), b = solve(design, split);
    ASSERT_TRUE(b.sparse_part);
    EXPECT_EQ(b.sparse_part->norm(), 0.0);
    EXPECT_LT((a.sigma_hat - b.sigma_hat).norm(), 1e-6);
}

TEST(Solve, LowRankPlusSparseFitsDiagonalPerturbation) {
    std::mt19937_64 rng(21);
    const Matrix low = random_psd(4, 1, rng);
    Matrix target = low;
    target(2, 2) += 1.5;
    const auto s = annulus_quadrature(4, 3.0, {2, 64});
    const auto design = exact_design(s.freqs, s.weights, s.cutoff, target, 0.0, false);
    SolverConfig cfg;
    cfg.lambda = 1e-4;
    cfg.variant = LowRankPlusSparse{1e-4};
    const auto report = solve(design, cfg);
    EXPECT_LT((report.sigma_hat - target).norm() / target.norm(), 0.02);
}

TEST(Solve, RejectsInvalidConfigs) {
    const auto s = monte_carlo_cube(2, 2.0, 5, 1);
    const auto design = exact_design(s.freqs, s.weights, s.cutoff, Matrix::Identity(2, 2), 0.0, false);
    SolverConfig cfg;
    cfg.lambda = -1;
    EXPECT_THROW(solve(design, cfg), InvalidParameter);
    cfg.lambda = 0;
    cfg.variant = Factorized{3};
    EXPECT_THROW(solve(design, cfg), InvalidParameter);
    EXPECT_THROW(solve(Design{}, SolverConfig{}), EmptySpectralInformation);
}

// ---------------------------------------------------------------- diagnostics

TEST(ErrorMatrix, ZeroForExactExponent) {
    const auto model = gaussian_rank2(4);
    const auto s = annulus_quadrature(4, 3.0, {2, 32});
    std::vector<Complex> phi;
    for (Eigen::Index i = 0; i < s.count(); ++i)
        phi.push_back(true_characteristic_function(model, s.freqs.row(i).transpose()));
    const auto est = exponent_estimate_from_values(s.freqs, phi, LaplaceFamily(model.clock()), 1e-12);
    const auto r = error_matrix_diagnostic(est, s, model.sigma(), 0.0);
    EXPECT_EQ(r.matrix.rows(), 5);
    EXPECT_LT(r.matrix.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ErrorMatrix, FiniteActivityRemainder) {
    // With the true (Sigma, alpha) the residual of a compound Poisson model is
    // 2 |u|^-2 sum_k exp(-u_k^2 / 2), the Fourier transform of the jump law.
    const ModelSpec model(Matrix::Identity(2, 2), CompoundPoissonGaussian{1.0}, DeterministicClock{1});
    const auto s = annulus_quadrature(2, 6.0, {2, 16});
    std::vector<Complex> phi;
    for (Eigen::Index i = 0; i < s.count(); ++i)
        phi.push_back(true_characteristic_function(model, s.freqs.row(i).transpose()));
    const auto est = exponent_estimate_from_values(s.freqs, phi, LaplaceFamily(model.clock()), 1e-300);
    const auto r = error_matrix_diagnostic(est, s, model.sigma(), model.jump_activity());
    Matrix expect = Matrix::Zero(3, 3);
    for (Eigen::Index i = 0; i < s.count(); ++i) {
        const Vector u = s.freqs.row(i).transpose();
        const double n2 = u.squaredNorm();
        const double resid = 2.0 / n2 * (u.array().square() * -0.5).exp().sum();
        Matrix theta = Matrix::Zero(3, 3);
        theta.topLeftCorner(2, 2) = u * u.transpose() / n2;
        theta(2, 2) = 2 * s.cutoff * s.cutoff / n2;
        expect += 2 * s.weights(i) * resid * theta;
    }
    EXPECT_LT((r.matrix - expect).norm(), 1e-10 * expect.norm());
}

TEST(ErrorMatrix, LinearInWeights) {
    const auto model = gaussian_rank2(3);
    const auto sample = sample_increments(model, 1000, 22);
    auto s = annulus_quadrature(3, 3.0, {2, 32});
    const auto est = exponent_estimate(sample, LaplaceFamily(model.clock()), s.freqs);
    const auto base = error_matrix_diagnostic(est, s, model.sigma(), 0.0);
    s.weights *= 3.5;
    const auto scaled = error_matrix_diagnostic(est, s, model.sigma(), 0.0);
    EXPECT_LT((scaled.matrix - 3.5 * base.matrix).norm(), 1e-12 * std::max(1.0, scaled.matrix.norm()));
    EXPECT_NEAR(scaled.spectral_norm, 3.5 * base.spectral_norm, 1e-12);
}

TEST(WeightedNorm, ExamplesAndIsometryBand) {
    const auto s0 = annulus_quadrature(3, 2.0);
    EXPECT_EQ(weighted_norm(Matrix::Zero(3, 3), 0.0, s0), 0.0);
    EXPECT_THROW(weighted_norm(Matrix::Zero(3, 3), 0.0, monte_carlo_cube(3, 2.0, 10, 1)), InvalidParameter);

    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> a_dist(0.0, 3.0);
    for (int t = 0; t < 50; ++t) {
        const Eigen::Index d = 2 + t % 9;
        const auto s = annulus_quadrature(d, 2.5);
        const auto k = isometry_constants(s);
        const Matrix a_mat = random_psd(d, 1 + t % d, rng);
        const double a = a_dist(rng);
        const double frob = std::sqrt(a_mat.squaredNorm() + a * a);
        const double w = weighted_norm(a_mat, a, s);
        EXPECT_GE(w, std::sqrt(k.lower_sq) * frob);
        EXPECT_LE(w, std::sqrt(k.upper_sq) * frob);
    }
}
