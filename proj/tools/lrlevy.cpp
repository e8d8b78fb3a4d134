#include <CLI11.hpp>
#include <lowrank_levy/lowrank_levy.hpp>

#include <iostream>
#include <map>

using namespace lowrank_levy;
namespace fs = std::filesystem;

namespace {

double median_of(std::vector<double> v) {
    if (v.empty()) return std::nan("");
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

SampleSet load_samples(const fs::path& path) {
    if (path.extension() == ".bin") return read_samples_binary(path);
    return read_samples_csv(path);
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
    fs::path config, out;
};

int run_simulate(const SimulateArgs& a) {
    const Json j = read_json_file(a.config);
    const ModelConfig mc = model_from_json(j.at("model"));
    const std::uint64_t master = j.value("master_seed", std::uint64_t{1});
    Eigen::Index n = 0;
    if (j.contains("n")) n = j.at("n").get<Eigen::Index>();
    else if (j.contains("n_grid") && !j.at("n_grid").empty()) n = j.at("n_grid").at(0).get<Eigen::Index>();
    else throw InvalidParameter("simulate config needs n or a nonempty n_grid");
    const ModelSpec model = build_model(mc, master);
    const std::uint64_t seed = j.value("seed", replicate_seed(master, n, 0, stream_tag::samples));
    const SampleSet s = sample_increments(model, n, seed);

    fs::create_directories(a.out);
    write_samples_csv(a.out / "samples.csv", s);
    write_samples_binary(a.out / "samples.bin", s);
    write_matrix_csv(a.out / "sigma.csv", model.sigma());
    Json echo;
    echo["model"] = model_to_json(mc);
    echo["sigma"] = matrix_to_json(model.sigma());
    echo["model_digest"] = hex_digest(model.digest());
    echo["n"] = n;
    echo["seed"] = seed;
    std::ofstream(a.out / "model.json") << echo.dump(2) << "\n";
    std::cout << "wrote " << n << " increments of dimension " << model.dim() << " to " << a.out.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------- estimate

struct EstimateArgs {
    fs::path data, out, truth;
    std::string clock;
    double lambda = 0.0;
    double cutoff = 0.0;
    bool intercept = false;
    bool psd = false;
    std::vector<double> empirical;
    std::string scheme = "mc";
    Eigen::Index freq_count = 70;
    std::uint64_t seed = 1;
    std::optional<double> guard;
};

template <LaplaceInverter Inverter>
int estimate_with(const EstimateArgs& a, const SampleSet& sample, const Inverter& inverter,
                  const EmpiricalLaplaceInverse* empirical) {
    SchemeOptions opt;
    if (a.scheme == "annulus") opt.mode = SchemeMode::AnnulusQuadrature;
    else if (a.scheme != "mc") throw InvalidParameter("--scheme must be mc or annulus");
    opt.count = a.freq_count;
    const auto fit = spectral_fit(sample, inverter, make_scheme(opt, sample.dim(), a.cutoff, a.seed), a.intercept,
                                  a.guard);

    SolverConfig cfg;
    cfg.lambda = a.lambda;
    if (a.intercept) cfg.intercept = InterceptMode::NonnegativeInterval;
    if (a.psd) cfg.psd_mode = PsdMode::PSDCone;
    const auto report = a.truth.empty() ? solve(fit.design, cfg) : solve(fit.design, cfg, read_matrix_csv(a.truth));

    std::cout << summary(report);
    if (!a.out.empty()) {
        fs::create_directories(a.out);
        std::ofstream r(a.out / "report.csv");
        write_report_csv(r, report, sample.size(), a.seed);
        write_matrix_csv(a.out / "sigma_hat.csv", report.sigma_hat);
        write_matrix_csv(a.out / "sigma_psd.csv", report.sigma_psd);
        std::ofstream e(a.out / "exponent.csv");
        write_exponent_csv(e, fit.exponent);
        std::ofstream t(a.out / "trace.csv");
        write_trace_csv(t, report);
        if (empirical) {
            std::ofstream l(a.out / "laplace_inverse.csv");
            write_laplace_inverse_csv(l, *empirical);
        }
    }
    return 0;
}

int run_estimate(const EstimateArgs& a) {
    const SampleSet sample = load_samples(a.data);
    if (!a.empirical.empty()) {
        if (a.empirical.size() != 2) throw InvalidParameter("--empirical-laplace takes m and J");
        const auto m = static_cast<Eigen::Index>(a.empirical[0]);
        const int order = static_cast<int>(a.empirical[1]);
        if (!sample.clock_increments) throw InvalidParameter("--empirical-laplace needs a t column in the data");
        if (m < 1 || m > sample.size()) throw InvalidParameter("--empirical-laplace m must lie in [1, n]");
        const EmpiricalLaplaceInverse inv(sample.clock_increments->head(m), order);
        return estimate_with(a, sample, inv, &inv);
    }
    if (a.clock.empty()) throw InvalidParameter("--clock is required unless --empirical-laplace is given");
    return estimate_with(a, sample, LaplaceFamily(parse_clock(a.clock)), nullptr);
}

// ---------------------------------------------------------------- experiment

struct ExperimentArgs {
    fs::path config, out;
    bool large = false;
    int threads = 0;
};

int run_experiment_cmd(const ExperimentArgs& a) {
    const Json j = read_json_file(a.config);
    if (j.value("large", false) && !a.large)
        throw InvalidParameter(a.config.string() + " is a large study; pass --large to run it");
    ExperimentConfig cfg = experiment_from_json(j);
    if (!a.out.empty()) cfg.output_dir = a.out;
    if (cfg.output_dir.empty()) cfg.output_dir = fs::path("out") / a.config.stem();
    if (a.threads > 0) cfg.threads = a.threads;

    const auto records = run_experiment(cfg);
    std::map<std::pair<Eigen::Index, double>, std::vector<double>> errors, ranks;
    int failed = 0;
    for (const auto& r : records) {
        if (r.status != "ok") {
            ++failed;
            continue;
        }
        errors[{r.n, r.lambda}].push_back(r.rel_error);
        ranks[{r.n, r.lambda}].push_back(r.rank);
    }
    std::cout << "n,lambda,median_rel_error,median_rank,runs\n";
    for (const auto& [key, e] : errors)
        std::cout << key.first << "," << key.second << "," << median_of(e) << ","
                  << median_of(ranks[key]) << "," << e.size() << "\n";
    if (failed) std::cout << failed << " runs failed; see the status column\n";
    std::cout << "wrote " << (cfg.output_dir / "runs.csv").string() << "\n";
    return 0;
}

// ---------------------------------------------------------------- figures

struct FiguresArgs {
    fs::path runs, out;
};

int run_figures(const FiguresArgs& a) {
    figures_export(a.runs, a.out);
    std::cout << "wrote " << (a.out / "boxplot.csv").string() << " and " << (a.out / "ranks.csv").string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Low-rank covariance estimation for time-changed Levy processes"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* s = app.add_subcommand("simulate", "draw increments from a model config");
    s->add_option("--config", sim.config, "JSON config with a model block and n")->required()->check(CLI::ExistingFile);
    s->add_option("--out", sim.out, "output directory")->required();

    EstimateArgs est;
    auto* e = app.add_subcommand("estimate", "estimate the diffusion matrix from increments");
    e->add_option("--data", est.data, "samples .csv (y1..yd[,t]) or .bin")->required()->check(CLI::ExistingFile);
    e->add_option("--clock", est.clock, "deterministic:D | exponential:MEAN | gamma:SHAPE,RATE | cir:KAPPA,ETA,XI");
    e->add_option("--lambda", est.lambda, "nuclear-norm penalty")->required()->check(CLI::NonNegativeNumber);
    e->add_option("--cutoff", est.cutoff, "spectral cut-off U > 1")->required();
    e->add_flag("--intercept", est.intercept, "estimate the jump-activity intercept");
    e->add_option("--empirical-laplace", est.empirical, "invert the Laplace transform from m clock draws, order J")
        ->expected(2);
    e->add_flag("--psd", est.psd, "constrain the estimate to the PSD cone");
    e->add_option("--scheme", est.scheme, "mc or annulus")->capture_default_str();
    e->add_option("--freq-count", est.freq_count, "Monte Carlo frequency count")->capture_default_str();
    e->add_option("--seed", est.seed, "seed for the frequency draw")->capture_default_str();
    e->add_option("--guard", est.guard, "mask frequencies whose |ecf| falls below this");
    e->add_option("--truth", est.truth, "true sigma as CSV, to report rel_error")->check(CLI::ExistingFile);
    e->add_option("--out", est.out, "write report, matrices, exponent and trace CSVs here");

    ExperimentArgs exp;
    auto* x = app.add_subcommand("experiment", "run a simulation study");
    x->add_option("--config", exp.config, "study config")->required()->check(CLI::ExistingFile);
    x->add_flag("--large", exp.large, "allow the d=100 study");
    x->add_option("--out", exp.out, "override the output directory");
    x->add_option("--threads", exp.threads, "worker threads (default: hardware concurrency)");

    FiguresArgs fig;
    auto* f = app.add_subcommand("figures", "export tidy CSVs for plotting");
    f->add_option("--runs", fig.runs, "runs.csv from an experiment")->required();
    f->add_option("--out", fig.out, "output directory")->required();

    CLI11_PARSE(app, argc, argv);
    try {
        if (s->parsed()) return run_simulate(sim);
        if (e->parsed()) return run_estimate(est);
        if (x->parsed()) return run_experiment_cmd(exp);
        if (f->parsed()) return run_figures(fig);
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 2;
    }
    return 0;
}
