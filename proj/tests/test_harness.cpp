#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "test_support.hpp"

using namespace lowrank_levy;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("lowrank_levy_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

ExperimentConfig small_config() {
    ExperimentConfig cfg;
    cfg.model.dim = 4;
    cfg.model.eigenvalues = {1.0, 0.5};
    cfg.model.jumps = IndependentNIG{1.0, -0.1, 1.0, -0.1};
    cfg.model.clock = GammaClock{1.0, 1.0};
    cfg.n_grid = {500, 1000};
    cfg.lambda_rule = LambdaGrid{{0.0, 0.01, 0.1}};
    cfg.replicates = 3;
    cfg.master_seed = 42;
    cfg.guard.floor = 0.0;
    cfg.threads = 1;
    return cfg;
}

}  // namespace

TEST(RandomOrthogonal, Properties) {
    auto rng = make_engine(1);
    const Matrix one = random_orthogonal(1, rng);
    EXPECT_EQ(std::abs(one(0, 0)), 1.0);
    for (Eigen::Index d : {2, 5, 10, 40}) {
        const Matrix q = random_orthogonal(d, rng);
        EXPECT_LE((q.transpose() * q - Matrix::Identity(d, d)).norm(), 1e-10);
    }
    auto a = make_engine(7), b = make_engine(7);
    EXPECT_TRUE(random_orthogonal(6, a) == random_orthogonal(6, b));
    EXPECT_THROW(random_orthogonal(0, a), InvalidParameter);
}

TEST(RandomOrthogonal, FirstColumnIsUniformOnSphere) {
    // Haar measure: E q_11^2 = 1 / d.
    auto rng = make_engine(2);
    const int reps = 4000;
    double s = 0;
    for (int i = 0; i < reps; ++i) s += std::pow(random_orthogonal(5, rng)(0, 0), 2);
    EXPECT_NEAR(s / reps, 0.2, 0.02);
}

TEST(BuildModel, SpectrumOfSigma) {
    ModelConfig mc;
    mc.dim = 10;
    mc.eigenvalues = {1.0, 0.5, 0.1};
    const auto model = build_model(mc, 3);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(model.sigma(), Eigen::EigenvaluesOnly);
    const Vector ev = eig.eigenvalues().reverse();
    EXPECT_NEAR(ev(0), 1.0, 1e-12);
    EXPECT_NEAR(ev(1), 0.5, 1e-12);
    EXPECT_NEAR(ev(2), 0.1, 1e-12);
    EXPECT_EQ(numerical_rank(model.sigma()), 3);
    EXPECT_TRUE(build_model(mc, 3).sigma() == model.sigma());
}

TEST(LambdaRules, Values) {
    EXPECT_EQ(lambda_values(FixedLambda{0.3}, 10), std::vector<double>{0.3});
    EXPECT_EQ(lambda_values(ScaledLambda{1e3}, 10000), std::vector<double>{0.1});
    EXPECT_EQ(lambda_values(LambdaGrid{{1, 2}}, 5).size(), 2u);
    EXPECT_NEAR(CutoffRule{}(10000), 7.0, 1e-12);
    CutoffRule fixed;
    fixed.fixed = 3.0;
    EXPECT_EQ(fixed(123), 3.0);
    GuardRule g;
    EXPECT_DOUBLE_EQ(g(10000), 0.05);
    g.floor = 0;
    EXPECT_DOUBLE_EQ(g(10000), 0.02);
}

TEST(RunExperiment, Bookkeeping) {
    auto cfg = small_config();
    cfg.n_grid = {1000};
    cfg.replicates = 1;
    const auto records = run_experiment(cfg);
    ASSERT_EQ(records.size(), 3u);
    for (const auto& r : records) {
        EXPECT_EQ(r.status, "ok");
        EXPECT_EQ(r.n, 1000);
        EXPECT_GE(r.rank, 0);
        EXPECT_TRUE(std::isfinite(r.rel_error));
        EXPECT_NEAR(r.cutoff, 0.7 * std::pow(1000.0, 0.25), 1e-12);
    }
}

TEST(RunExperiment, DeterministicOutputs) {
    auto cfg = small_config();
    cfg.output_dir = scratch_dir("det_a");
    run_experiment(cfg);
    auto again = cfg;
    again.output_dir = scratch_dir("det_b");
    again.threads = 3;
    run_experiment(again);
    EXPECT_EQ(slurp(cfg.output_dir / "runs.csv"), slurp(again.output_dir / "runs.csv"));
    EXPECT_TRUE(fs::exists(cfg.output_dir / "config_echo.json"));
    EXPECT_TRUE(fs::exists(cfg.output_dir / "timings.csv"));
}

TEST(RunExperiment, ExecutionOrderDoesNotMatter) {
    auto cfg = small_config();
    const auto a = run_experiment(cfg);
    cfg.execution_order_seed = 99;
    const auto b = run_experiment(cfg);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].seed, b[i].seed);
        EXPECT_EQ(a[i].rel_error, b[i].rel_error);
        EXPECT_EQ(a[i].rank, b[i].rank);
    }
}

TEST(RunExperiment, ReplicatesUseDistinctStreams) {
    auto cfg = small_config();
    cfg.n_grid = {500};
    const auto records = run_experiment(cfg);
    std::set<std::uint64_t> seeds;
    for (const auto& r : records) seeds.insert(r.seed);
    EXPECT_EQ(seeds.size(), 3u);
}

TEST(RunExperiment, FailuresAreRecorded) {
    auto cfg = small_config();
    cfg.n_grid = {200};
    cfg.replicates = 1;
    cfg.guard.fixed = 2.0;  // masks everything
    const auto records = run_experiment(cfg);
    ASSERT_EQ(records.size(), 3u);
    for (const auto& r : records) EXPECT_NE(r.status.find("spectral_failure"), std::string::npos);
}

TEST(RunExperiment, EmpiricalLaplaceAndIntercept) {
    auto cfg = small_config();
    cfg.model.jumps = CompoundPoissonGaussian{1.0};
    cfg.n_grid = {2000};
    cfg.replicates = 2;
    cfg.intercept = true;
    cfg.empirical_laplace = EmpiricalLaplaceConfig{500, 20, 0.5};
    cfg.cutoff.fixed = 2.0;
    const auto records = run_experiment(cfg);
    for (const auto& r : records) {
        EXPECT_EQ(r.status, "ok");
        ASSERT_TRUE(r.alpha_hat);
        EXPECT_GE(*r.alpha_hat, 0.0);
    }
}

TEST(RunsCsv, RoundTrip) {
    auto cfg = small_config();
    cfg.output_dir = scratch_dir("roundtrip");
    const auto records = run_experiment(cfg);
    const auto parsed = read_runs_csv(cfg.output_dir / "runs.csv");
    ASSERT_EQ(parsed.size(), records.size());
    for (std::size_t i = 0; i < parsed.size(); ++i) {
        EXPECT_EQ(parsed[i].rel_error, records[i].rel_error);
        EXPECT_EQ(parsed[i].lambda, records[i].lambda);
        EXPECT_EQ(parsed[i].seed, records[i].seed);
        EXPECT_EQ(parsed[i].rank, records[i].rank);
    }
}

TEST(FiguresExport, EmptyInputWritesNothing) {
    const auto dir = scratch_dir("fig_empty");
    EXPECT_THROW(figures_export(std::vector<RunRecord>{}, dir / "out"), InvalidParameter);
    EXPECT_FALSE(fs::exists(dir / "out"));
    EXPECT_THROW(figures_export(dir / "missing.csv", dir / "out"), InvalidParameter);
}

TEST(FiguresExport, CountsAreConserved) {
    std::vector<RunRecord> records(3);
    for (int i = 0; i < 3; ++i) {
        records[i].n = 1000;
        records[i].replicate = i;
        records[i].lambda = 0.1;
        records[i].rel_error = 0.1 * (i + 1);
        records[i].rank = i == 2 ? 4 : 3;
    }
    const auto dir = scratch_dir("fig_counts");
    figures_export(records, dir);
    std::ifstream ranks(dir / "ranks.csv");
    std::string line;
    std::getline(ranks, line);
    EXPECT_EQ(line, "lambda,rank,count");
    int total = 0;
    while (std::getline(ranks, line)) total += std::stoi(split_csv_line(line)[2]);
    EXPECT_EQ(total, 3);
    std::ifstream box(dir / "boxplot.csv");
    std::getline(box, line);
    EXPECT_EQ(line, "n,lambda,rel_error");
    int rows = 0;
    while (std::getline(box, line)) ++rows;
    EXPECT_EQ(rows, 3);
}

TEST(FiguresExport, Idempotent) {
    auto cfg = small_config();
    cfg.output_dir = scratch_dir("fig_idem");
    run_experiment(cfg);
    figures_export(cfg.output_dir / "runs.csv", cfg.output_dir / "a");
    figures_export(read_runs_csv(cfg.output_dir / "runs.csv"), cfg.output_dir / "b");
    figures_export(cfg.output_dir / "runs.csv", cfg.output_dir / "a");
    for (const char* f : {"boxplot.csv", "ranks.csv"})
        EXPECT_EQ(slurp(cfg.output_dir / "a" / f), slurp(cfg.output_dir / "b" / f));
}

TEST(ExperimentJson, ParsesAndEchoes) {
    const auto j = Json::parse(R"({
        "model": {"dim": 3, "eigenvalues": [1, 0.5],
                  "jumps": {"type": "nig", "alpha": 1, "beta": -0.1, "delta": 1, "mu": -0.1},
                  "clock": {"type": "gamma", "shape": 1, "rate": 1}},
        "n_grid": [100, 200],
        "lambda_rule": {"grid": [0, 0.1]},
        "cutoff_rule": {"fixed": 2.5},
        "replicates": 2,
        "master_seed": 9,
        "guard": {"floor": 0, "scale": 2},
        "psd_mode": "psd",
        "intercept": true
    })");
    const auto cfg = experiment_from_json(j);
    EXPECT_EQ(cfg.model.dim, 3);
    EXPECT_EQ(cfg.n_grid.size(), 2u);
    EXPECT_EQ(lambda_values(cfg.lambda_rule, 100).size(), 2u);
    EXPECT_EQ(cfg.cutoff(100), 2.5);
    EXPECT_EQ(cfg.guard.floor, 0.0);
    EXPECT_EQ(cfg.solver.psd_mode, PsdMode::PSDCone);
    EXPECT_TRUE(cfg.intercept);
    EXPECT_TRUE(std::holds_alternative<GammaClock>(cfg.model.clock));
    const auto echo = experiment_to_json(cfg, build_model(cfg.model, cfg.master_seed));
    const auto back = experiment_from_json(echo);
    EXPECT_EQ(back.master_seed, 9u);
    EXPECT_EQ(back.cutoff(100), 2.5);
    EXPECT_EQ(back.solver.psd_mode, PsdMode::PSDCone);
    EXPECT_THROW(experiment_from_json(Json::parse(R"({"model": {"dim": 2}, "n_grid": []})")), InvalidParameter);
    EXPECT_THROW(experiment_from_json(Json::parse(R"({"model": {"dim": 2, "clock": {"type": "bogus"}}, "n_grid": [10]})")),
                 InvalidParameter);
}

TEST(ParseClock, Specs) {
    EXPECT_TRUE(std::holds_alternative<DeterministicClock>(parse_clock("deterministic:2")));
    const auto g = std::get<GammaClock>(parse_clock("gamma:2,3"));
    EXPECT_EQ(g.shape, 2.0);
    EXPECT_EQ(g.rate, 3.0);
    EXPECT_EQ(std::get<ExponentialClock>(parse_clock("exponential:0.5")).mean, 0.5);
    EXPECT_EQ(std::get<IntegratedCirClock>(parse_clock("cir:2,0.5,0.8")).xi, 0.8);
    EXPECT_THROW(parse_clock("cir:1,0.1,1"), InvalidParameter);
    EXPECT_THROW(parse_clock("weibull:1"), InvalidParameter);
}
