#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <tuple>
#include <variant>
#include <vector>

#include "config.hpp"
#include "io.hpp"
#include "pipeline.hpp"
#include "sim.hpp"
#include "solver.hpp"
#include "spectral.hpp"

namespace lowrank_levy {

// ---------------------------------------------------------------- config

struct FixedLambda {
    double value = 0.0;
};
/// lambda = scale / n.
struct ScaledLambda {
    double scale = 1e3;
};
struct LambdaGrid {
    std::vector<double> values;
};
using LambdaRule = std::variant<FixedLambda, ScaledLambda, LambdaGrid>;

inline std::vector<double> lambda_values(const LambdaRule& rule, Eigen::Index n) {
    return std::visit(
        [n](const auto& r) -> std::vector<double> {
            using T = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<T, FixedLambda>) return {r.value};
            else if constexpr (std::is_same_v<T, ScaledLambda>) return {r.scale / static_cast<double>(n)};
            else return r.values;
        },
        rule);
}

/// Laplace inverse estimated from m observed clock increments, series order J.
struct EmpiricalLaplaceConfig {
    Eigen::Index m = 100;
    int order = 20;
    double radius = EmpiricalLaplaceInverse::default_radius;
};

/// Inversion guard max(floor, scale / sqrt(n)) unless fixed.
struct GuardRule {
    double floor = 0.05;
    double scale = 2.0;
    std::optional<double> fixed;

    double operator()(Eigen::Index n) const {
        if (fixed) return *fixed;
        return std::max(floor, scale / std::sqrt(static_cast<double>(n)));
    }
};

struct ExperimentConfig {
    ModelConfig model;
    std::vector<Eigen::Index> n_grid;
    LambdaRule lambda_rule = FixedLambda{0.0};
    CutoffRule cutoff{};
    int replicates = 20;
    std::uint64_t master_seed = 1;
    SchemeOptions scheme{};
    bool intercept = false;
    SolverConfig solver{};
    std::optional<EmpiricalLaplaceConfig> empirical_laplace;
    GuardRule guard{};
    std::filesystem::path output_dir;
    /// 0 selects the hardware concurrency.
    int threads = 0;
    /// Nonzero shuffles the order in which replicates are executed.
    std::uint64_t execution_order_seed = 0;

    void validate() const {
        if (n_grid.empty()) throw InvalidParameter("n_grid must not be empty");
        for (auto n : n_grid)
            if (n < 1) throw InvalidParameter("sample sizes must be positive");
        if (replicates < 1) throw InvalidParameter("replicates must be at least 1");
        if (lambda_values(lambda_rule, n_grid.front()).empty()) throw InvalidParameter("lambda grid is empty");
    }
};

struct RunRecord {
    Eigen::Index n = 0;
    int replicate = 0;
    std::uint64_t seed = 0;
    double lambda = 0.0;
    double cutoff = 0.0;
    double rel_error = std::nan("");
    int rank = -1;
    std::optional<double> alpha_hat;
    double wall_time = 0.0;
    std::string status = "ok";
};

inline bool record_less(const RunRecord& a, const RunRecord& b) {
    return std::tie(a.n, a.replicate, a.lambda) < std::tie(b.n, b.replicate, b.lambda);
}

inline std::uint64_t replicate_seed(std::uint64_t master, Eigen::Index n, int replicate, std::uint64_t tag) {
    return substream_seed(master, static_cast<std::uint64_t>(replicate), tag * 0x100000001b3ULL + static_cast<std::uint64_t>(n));
}

// ---------------------------------------------------------------- execution

/// Simulate, estimate for every lambda of the rule, project and score one
/// replicate. Failures are recorded in the status column.
inline std::vector<RunRecord> run_replicate(const ExperimentConfig& cfg, const ModelSpec& model, Eigen::Index n,
                                            int replicate) {
    const auto seed = replicate_seed(cfg.master_seed, n, replicate, stream_tag::samples);
    const double cutoff = cfg.cutoff(n);
    const auto lambdas = lambda_values(cfg.lambda_rule, n);
    std::vector<RunRecord> out;
    out.reserve(lambdas.size());
    for (double lambda : lambdas) {
        RunRecord r;
        r.n = n;
        r.replicate = replicate;
        r.seed = seed;
        r.lambda = lambda;
        r.cutoff = cutoff;
        out.push_back(r);
    }

    const auto start = std::chrono::steady_clock::now();
    std::optional<SpectralFit> fit;
    try {
        const SampleSet sample = sample_increments(model, n, seed);
        auto scheme = make_scheme(cfg.scheme, model.dim(), cutoff,
                                  replicate_seed(cfg.master_seed, n, replicate, stream_tag::frequencies));
        if (cfg.empirical_laplace) {
            auto rng = make_engine(replicate_seed(cfg.master_seed, n, replicate, stream_tag::clock_sample));
            const Vector clock = sample_clock(model.clock(), cfg.empirical_laplace->m, rng);
            const EmpiricalLaplaceInverse inv(clock, cfg.empirical_laplace->order, cfg.empirical_laplace->radius);
            fit = spectral_fit(sample, inv, std::move(scheme), cfg.intercept, cfg.guard(n));
        } else {
            fit = spectral_fit(sample, LaplaceFamily(model.clock()), std::move(scheme), cfg.intercept, cfg.guard(n));
        }
    } catch (const std::exception& e) {
        for (auto& r : out) r.status = std::string("spectral_failure: ") + e.what();
        return out;
    }
    const double setup = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    for (auto& r : out) {
        const auto t0 = std::chrono::steady_clock::now();
        SolverConfig sc = cfg.solver;
        sc.lambda = r.lambda;
        sc.intercept = cfg.intercept ? InterceptMode::NonnegativeInterval : InterceptMode::None;
        try {
            const auto report = solve(fit->design, sc, model.sigma());
            r.rel_error = *report.rel_error;
            r.rank = report.rank;
            r.alpha_hat = report.alpha_hat;
        } catch (const SolverFailure& e) {
            r.status = std::string("solver_failure: ") + e.what();
        } catch (const std::exception& e) {
            r.status = std::string("error: ") + e.what();
        }
        r.wall_time = setup + std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    return out;
}

inline void write_runs_csv(const std::filesystem::path& path, const std::vector<RunRecord>& records) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out << "n,replicate,seed,lambda,U,rel_error,rank,alpha_hat,status\n";
    for (const auto& r : records) {
        std::string status = r.status;
        std::replace(status.begin(), status.end(), ',', ';');
        out << r.n << "," << r.replicate << "," << r.seed << "," << fmt_double(r.lambda) << ","
            << fmt_double(r.cutoff) << "," << (std::isnan(r.rel_error) ? "" : fmt_double(r.rel_error)) << ","
            << r.rank << "," << (r.alpha_hat ? fmt_double(*r.alpha_hat) : "") << "," << status << "\n";
    }
}

inline void write_timings_csv(const std::filesystem::path& path, const std::vector<RunRecord>& records) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out << "n,replicate,lambda,wall_time\n";
    for (const auto& r : records)
        out << r.n << "," << r.replicate << "," << fmt_double(r.lambda) << "," << r.wall_time << "\n";
}

inline std::vector<RunRecord> read_runs_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw InvalidParameter("runs file is empty: " + path.string());
    const auto header = split_csv_line(line);
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
    for (const char* need : {"n", "replicate", "seed", "lambda", "U", "rel_error", "rank", "alpha_hat", "status"})
        if (!col.count(need)) throw InvalidParameter(std::string("runs file lacks column ") + need);
    std::vector<RunRecord> records;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const auto c = split_csv_line(line);
        if (c.size() != header.size()) throw InvalidParameter("ragged row in runs file");
        RunRecord r;
        r.n = std::stoll(c[col["n"]]);
        r.replicate = std::stoi(c[col["replicate"]]);
        r.seed = std::stoull(c[col["seed"]]);
        r.lambda = parse_double(c[col["lambda"]]);
        r.cutoff = parse_double(c[col["U"]]);
        if (!c[col["rel_error"]].empty()) r.rel_error = parse_double(c[col["rel_error"]]);
        r.rank = std::stoi(c[col["rank"]]);
        if (!c[col["alpha_hat"]].empty()) r.alpha_hat = parse_double(c[col["alpha_hat"]]);
        r.status = c[col["status"]];
        records.push_back(std::move(r));
    }
    return records;
}

inline Json experiment_to_json(const ExperimentConfig& cfg, const ModelSpec& model) {
    Json j;
    j["model"] = model_to_json(cfg.model);
    j["model_digest"] = hex_digest(model.digest());
    j["n_grid"] = cfg.n_grid;
    std::visit(
        [&](const auto& r) {
            using T = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<T, FixedLambda>) j["lambda_rule"] = {{"fixed", r.value}};
            else if constexpr (std::is_same_v<T, ScaledLambda>) j["lambda_rule"] = {{"scaled", r.scale}};
            else j["lambda_rule"] = {{"grid", r.values}};
        },
        cfg.lambda_rule);
    if (cfg.cutoff.fixed) j["cutoff_rule"] = {{"fixed", *cfg.cutoff.fixed}};
    else j["cutoff_rule"] = {{"rule_of_thumb", {cfg.cutoff.scale, cfg.cutoff.power}}};
    j["replicates"] = cfg.replicates;
    j["master_seed"] = cfg.master_seed;
    j["scheme"] = cfg.scheme.mode == SchemeMode::MonteCarloCube ? "mc" : "annulus";
    j["freq_count"] = cfg.scheme.count;
    j["annulus_radial_nodes"] = cfg.scheme.annulus.radial_nodes;
    j["annulus_directions"] = cfg.scheme.annulus.directions;
    j["intercept"] = cfg.intercept;
    j["max_iter"] = cfg.solver.max_iter;
    j["grad_tol"] = cfg.solver.grad_tol;
    j["rank_tol"] = cfg.solver.rank_tol;
    if (cfg.guard.fixed) j["guard"] = {{"fixed", *cfg.guard.fixed}};
    else j["guard"] = {{"floor", cfg.guard.floor}, {"scale", cfg.guard.scale}};
    j["psd_mode"] = cfg.solver.psd_mode == PsdMode::PSDCone ? "psd" : "unconstrained";
    if (cfg.empirical_laplace)
        j["empirical_laplace"] = {{"m", cfg.empirical_laplace->m},
                                  {"order", cfg.empirical_laplace->order},
                                  {"radius", cfg.empirical_laplace->radius}};
    return j;
}

/// Runs every (n, replicate) pair in a work pool. Writes runs.csv,
/// timings.csv and config_echo.json when output_dir is set. Records are
/// returned sorted by (n, replicate, lambda).
inline std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const ModelSpec model = build_model(cfg.model, cfg.master_seed);

    std::vector<std::pair<Eigen::Index, int>> tasks;
    for (auto n : cfg.n_grid)
        for (int r = 0; r < cfg.replicates; ++r) tasks.emplace_back(n, r);
    if (cfg.execution_order_seed != 0) {
        auto rng = make_engine(cfg.execution_order_seed);
        std::shuffle(tasks.begin(), tasks.end(), rng);
    }

    std::vector<std::vector<RunRecord>> results(tasks.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++)
            results[i] = run_replicate(cfg, model, tasks[i].first, tasks[i].second);
    };
    const int threads = std::max(1, cfg.threads > 0 ? cfg.threads : static_cast<int>(std::thread::hardware_concurrency()));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    }

    std::vector<RunRecord> records;
    for (auto& r : results) records.insert(records.end(), r.begin(), r.end());
    std::sort(records.begin(), records.end(), record_less);

    if (!cfg.output_dir.empty()) {
        std::filesystem::create_directories(cfg.output_dir);
        write_runs_csv(cfg.output_dir / "runs.csv", records);
        write_timings_csv(cfg.output_dir / "timings.csv", records);
        std::ofstream echo(cfg.output_dir / "config_echo.json");
        echo << experiment_to_json(cfg, model).dump(2) << "\n";
    }
    return records;
}

// ---------------------------------------------------------------- figures

/// Writes boxplot.csv (n, lambda, rel_error) and ranks.csv (lambda, rank,
/// count) from successful records. Nothing is written for an empty input.
inline void figures_export(const std::vector<RunRecord>& records, const std::filesystem::path& out_dir) {
    std::vector<RunRecord> ok;
    for (const auto& r : records)
        if (r.status == "ok") ok.push_back(r);
    if (ok.empty()) throw InvalidParameter("no successful run records to export");
    std::sort(ok.begin(), ok.end(), record_less);

    std::filesystem::create_directories(out_dir);
    {
        std::ofstream box(out_dir / "boxplot.csv");
        box << "n,lambda,rel_error\n";
        for (const auto& r : ok) box << r.n << "," << fmt_double(r.lambda) << "," << fmt_double(r.rel_error) << "\n";
    }
    std::map<std::pair<double, int>, int> counts;
    for (const auto& r : ok) ++counts[{r.lambda, r.rank}];
    std::ofstream ranks(out_dir / "ranks.csv");
    ranks << "lambda,rank,count\n";
    for (const auto& [key, count] : counts) ranks << fmt_double(key.first) << "," << key.second << "," << count << "\n";
}

inline void figures_export(const std::filesystem::path& runs_csv, const std::filesystem::path& out_dir) {
    if (!std::filesystem::exists(runs_csv)) throw InvalidParameter("runs file not found: " + runs_csv.string());
    figures_export(read_runs_csv(runs_csv), out_dir);
}

// ---------------------------------------------------------------- config parsing

inline ExperimentConfig experiment_from_json(const Json& j) {
    ExperimentConfig cfg;
    cfg.model = model_from_json(j.at("model"));
    cfg.n_grid = j.at("n_grid").get<std::vector<Eigen::Index>>();
    if (j.contains("lambda_rule")) {
        const auto& r = j.at("lambda_rule");
        if (r.contains("fixed")) cfg.lambda_rule = FixedLambda{r.at("fixed").get<double>()};
        else if (r.contains("scaled")) cfg.lambda_rule = ScaledLambda{r.at("scaled").get<double>()};
        else if (r.contains("grid")) cfg.lambda_rule = LambdaGrid{r.at("grid").get<std::vector<double>>()};
        else throw InvalidParameter("lambda_rule needs one of fixed, scaled, grid");
    }
    if (j.contains("cutoff_rule")) {
        const auto& r = j.at("cutoff_rule");
        if (r.contains("fixed")) cfg.cutoff.fixed = r.at("fixed").get<double>();
        else if (r.contains("rule_of_thumb")) {
            const auto p = r.at("rule_of_thumb").get<std::vector<double>>();
            if (p.size() != 2) throw InvalidParameter("rule_of_thumb takes [scale, power]");
            cfg.cutoff.scale = p[0];
            cfg.cutoff.power = p[1];
        }
    }
    cfg.replicates = j.value("replicates", 20);
    cfg.master_seed = j.value("master_seed", std::uint64_t{1});
    const std::string scheme = j.value("scheme", "mc");
    if (scheme == "mc") cfg.scheme.mode = SchemeMode::MonteCarloCube;
    else if (scheme == "annulus") cfg.scheme.mode = SchemeMode::AnnulusQuadrature;
    else throw InvalidParameter("scheme must be mc or annulus");
    cfg.scheme.count = j.value("freq_count", Eigen::Index{70});
    cfg.scheme.annulus.radial_nodes = j.value("annulus_radial_nodes", 4);
    cfg.scheme.annulus.directions = j.value("annulus_directions", Eigen::Index{256});
    cfg.intercept = j.value("intercept", false);
    cfg.solver.max_iter = j.value("max_iter", cfg.solver.max_iter);
    cfg.solver.grad_tol = j.value("grad_tol", cfg.solver.grad_tol);
    cfg.solver.rank_tol = j.value("rank_tol", cfg.solver.rank_tol);
    if (j.contains("guard")) {
        const auto& g = j.at("guard");
        if (g.is_number()) cfg.guard.fixed = g.get<double>();
        else if (g.contains("fixed")) cfg.guard.fixed = g.at("fixed").get<double>();
        else {
            cfg.guard.floor = g.value("floor", cfg.guard.floor);
            cfg.guard.scale = g.value("scale", cfg.guard.scale);
        }
    }
    const std::string psd = j.value("psd_mode", "unconstrained");
    if (psd == "psd") cfg.solver.psd_mode = PsdMode::PSDCone;
    else if (psd != "unconstrained") throw InvalidParameter("psd_mode must be unconstrained or psd");
    cfg.execution_order_seed = j.value("execution_order_seed", std::uint64_t{0});
    if (j.contains("empirical_laplace")) {
        const auto& e = j.at("empirical_laplace");
        cfg.empirical_laplace = EmpiricalLaplaceConfig{e.value("m", Eigen::Index{100}), e.value("order", 20),
                                                       e.value("radius", EmpiricalLaplaceInverse::default_radius)};
    }
    cfg.output_dir = j.value("output_dir", std::string{});
    cfg.threads = j.value("threads", 0);
    cfg.validate();
    return cfg;
}

}  // namespace lowrank_levy
