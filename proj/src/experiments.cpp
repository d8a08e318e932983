#include "runn/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>

namespace runn {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
constexpr double pi = std::numbers::pi;

constexpr const char* kVersion = "0.1.0";
constexpr int kSolutionGrid = 2001;

struct CsvFile {
    std::FILE* f = nullptr;

    CsvFile(const fs::path& path, const char* header) {
        f = std::fopen(path.c_str(), "wb");
        if (f == nullptr) throw NumericError("cannot open " + path.string());
        std::fputs(header, f);
        std::fputs("\n", f);
    }
    ~CsvFile() {
        if (f) std::fclose(f);
    }
    CsvFile(const CsvFile&) = delete;
    CsvFile& operator=(const CsvFile&) = delete;
};

NetworkSpec shallow_fourier_tanh() {
    NetworkSpec s;
    s.width = 30;
    s.depth = 1;
    s.fourier = true;
    s.activation = Activation::tanh_fn;
    s.cutoff = Cutoff::one_minus_x_squared;
    return s;
}

NetworkSpec deep_fourier_tanh() {
    NetworkSpec s = shallow_fourier_tanh();
    s.depth = 2;
    return s;
}

NetworkSpec ultraweak_initial_spec() {
    NetworkSpec s;
    s.width = 30;
    s.depth = 1;
    s.fourier = false;
    s.activation = Activation::relu_cubed;
    s.cutoff = Cutoff::one_minus_x_squared;
    return s;
}

NetworkSpec ultraweak_correction_spec() {
    NetworkSpec s;
    s.width = 30;
    s.depth = 2;
    s.fourier = true;
    s.activation = Activation::relu_cubed;
    s.cutoff = Cutoff::one_minus_x_squared;
    return s;
}

TrainConfig base_train(int n_points, int epochs, double lr, double lambda) {
    TrainConfig t;
    t.n_points = n_points;
    t.epochs = epochs;
    t.learning_rate = lr;
    t.lambda = lambda;
    t.rule = RuleTag::p3;
    return t;
}

}  // namespace

const std::vector<std::string>& experiment_tags() {
    static const std::vector<std::string> tags = {"weak_smooth_adam",      "weak_smooth_lsadam", "weak_highfreq",
                                                  "ultraweak_dirac_prime", "linlab_sweep",       "quadrature_variance"};
    return tags;
}

ProblemSpec weak_sine_problem(double m) {
    ProblemSpec p;
    p.formulation = Formulation::weak;
    p.source = [m](double x) { return m * m * pi * pi * std::sin(m * pi * x); };
    ExactSolution exact;
    exact.u = [m](double x) { return std::sin(m * pi * x); };
    exact.du = [m](double x) { return m * pi * std::cos(m * pi * x); };
    exact.continuous = true;
    p.exact = exact;
    return p;
}

ProblemSpec ultraweak_dirac_problem() {
    ProblemSpec p;
    p.formulation = Formulation::ultraweak;
    p.dirac_prime = true;
    ExactSolution exact;
    exact.u = [](double x) { return 0.5 * (x + 1.0) - (x > 0.0 ? 1.0 : (x < 0.0 ? 0.0 : 0.5)); };
    exact.du = nullptr;
    exact.continuous = false;
    p.exact = exact;
    return p;
}

std::vector<PhasePlan> default_schedule(const std::string& experiment, double lambda) {
    std::vector<PhasePlan> plans;
    if (experiment == "weak_smooth_adam") {
        plans = {{shallow_fourier_tanh(), base_train(9000, 1000, 9e-3, lambda)},
                 {shallow_fourier_tanh(), base_train(9000, 2000, 1e-4, lambda)},
                 {shallow_fourier_tanh(), base_train(9000, 3000, 1e-5, lambda)}};
        for (auto& p : plans) p.train.pure_adam = true;
    } else if (experiment == "weak_smooth_lsadam") {
        plans = {{shallow_fourier_tanh(), base_train(9000, 1000, 1e-2, lambda)},
                 {shallow_fourier_tanh(), base_train(9000, 1000, 1e-3, lambda)},
                 {shallow_fourier_tanh(), base_train(9000, 1000, 1e-3, lambda)}};
    } else if (experiment == "weak_highfreq") {
        plans = {{deep_fourier_tanh(), base_train(9000, 300, 1e-3, lambda)},
                 {deep_fourier_tanh(), base_train(9000, 1000, 1e-3, lambda)},
                 {deep_fourier_tanh(), base_train(9000, 1000, 1e-3, lambda)}};
    } else if (experiment == "ultraweak_dirac_prime") {
        plans = {{ultraweak_initial_spec(), base_train(3000, 100, 8e-5, lambda)},
                 {ultraweak_correction_spec(), base_train(4500, 2500, 8e-5, lambda)},
                 {ultraweak_correction_spec(), base_train(6000, 2500, 8e-5, lambda)}};
    } else {
        throw ConfigError("default_schedule: experiment '" + experiment + "' has no phase schedule");
    }
    return plans;
}

ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig cfg;
    cfg.experiment = j.at("experiment").get<std::string>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("alpha")) cfg.alpha = j.at("alpha").get<double>();
    if (j.contains("lambda")) cfg.lambda = j.at("lambda").get<double>();
    if (j.contains("overrides")) {
        for (const auto& jo : j.at("overrides")) {
            PhaseOverride o;
            if (jo.contains("epochs")) o.epochs = jo.at("epochs").get<int>();
            if (jo.contains("learning_rate")) o.learning_rate = jo.at("learning_rate").get<double>();
            if (jo.contains("n_points")) o.n_points = jo.at("n_points").get<int>();
            cfg.overrides.push_back(o);
        }
    }
    return cfg;
}

json config_to_json(const ExperimentConfig& cfg) {
    json j;
    j["experiment"] = cfg.experiment;
    j["seed"] = cfg.seed;
    j["output_dir"] = cfg.output_dir;
    j["alpha"] = cfg.alpha;
    j["lambda"] = cfg.lambda;
    json overrides = json::array();
    for (const auto& o : cfg.overrides) {
        json jo;
        if (o.epochs) jo["epochs"] = *o.epochs;
        if (o.learning_rate) jo["learning_rate"] = *o.learning_rate;
        if (o.n_points) jo["n_points"] = *o.n_points;
        overrides.push_back(jo);
    }
    j["overrides"] = overrides;
    return j;
}

namespace {

void apply_overrides(std::vector<PhasePlan>& plans, const std::vector<PhaseOverride>& overrides) {
    if (overrides.size() > plans.size()) throw ConfigError("run_experiment: more overrides than phases");
    for (std::size_t i = 0; i < overrides.size(); ++i) {
        if (overrides[i].epochs) plans[i].train.epochs = *overrides[i].epochs;
        if (overrides[i].learning_rate) plans[i].train.learning_rate = *overrides[i].learning_rate;
        if (overrides[i].n_points) plans[i].train.n_points = *overrides[i].n_points;
    }
}

json resolved_manifest(const ExperimentConfig& cfg, const std::vector<PhasePlan>* plans) {
    json m;
    m["version"] = kVersion;
    m["config"] = config_to_json(cfg);
    m["spectral_grid"] = kDefaultSpectralGridSize;
    m["solution_grid"] = kSolutionGrid;
    if (plans != nullptr) {
        json jp = json::array();
        for (const auto& p : *plans) {
            jp.push_back({{"epochs", p.train.epochs},
                          {"learning_rate", p.train.learning_rate},
                          {"n_points", p.train.n_points},
                          {"rule", to_string(p.train.rule)},
                          {"pure_adam", p.train.pure_adam},
                          {"width", p.net.width},
                          {"depth", p.net.depth},
                          {"fourier", p.net.fourier}});
        }
        m["phases"] = jp;
    }
    return m;
}

void write_manifest(const fs::path& dir, const json& manifest) {
    std::ofstream f(dir / "manifest.json");
    f << manifest.dump(2) << "\n";
}

void write_solution_csv(const fs::path& dir, const UzawaState& state, const ProblemSpec& problem) {
    CsvFile csv(dir / "solution.csv", "x,u,u_exact,pointwise_error");
    Eigen::VectorXd x(kSolutionGrid);
    const double h = problem.domain.length() / (kSolutionGrid - 1);
    for (int i = 0; i < kSolutionGrid; ++i) x[i] = problem.domain.a + i * h;
    const Eigen::VectorXd u = evaluate_solution(state, x);
    for (int i = 0; i < kSolutionGrid; ++i) {
        const double exact = problem.exact ? problem.exact->u(x[i]) : std::numeric_limits<double>::quiet_NaN();
        std::fprintf(csv.f, "%.17g,%.17g,%.17g,%.17g\n", x[i], u[i], exact, u[i] - exact);
    }
}

int run_neural_experiment(const ExperimentConfig& cfg, const fs::path& dir) {
    const ProblemSpec problem = cfg.experiment == "ultraweak_dirac_prime" ? ultraweak_dirac_problem()
                                : cfg.experiment == "weak_highfreq"       ? weak_sine_problem(40.0)
                                                                          : weak_sine_problem(1.0);
    std::vector<PhasePlan> plans = default_schedule(cfg.experiment, cfg.lambda);
    apply_overrides(plans, cfg.overrides);
    write_manifest(dir, resolved_manifest(cfg, &plans));

    CsvFile convergence(dir / "convergence.csv", "phase,epoch,loss,relative_error");
    RunCallbacks callbacks;
    callbacks.on_epoch = [&](int phase, int epoch, double loss, double rel) {
        std::fprintf(convergence.f, "%d,%d,%.17g,%.17g\n", phase, epoch, loss, rel);
    };
    callbacks.on_spectrum = [&](int phase, const SpectrumCurve& curve, const InitPlan&) {
        write_spectrum_csv(curve, (dir / ("spectrum_" + std::to_string(phase) + ".csv")).string());
    };

    const UzawaState state = run_approach1(problem, plans, cfg.alpha, cfg.seed, callbacks);
    write_solution_csv(dir, state, problem);
    save_state(state, (dir / "state").string());
    return state.failed ? 1 : 0;
}

int run_linlab_sweep(const ExperimentConfig& cfg, const fs::path& dir) {
    write_manifest(dir, resolved_manifest(cfg, nullptr));
    const linlab::LinearProblem problem = linlab::random_problem(12, cfg.seed);
    const double rho_star = linlab::optimal_rho(problem).rho_star;
    const double eps_max = linlab::tolerance_bound(problem, rho_star, 1);

    CsvFile csv(dir / "linlab_sweep.csv", "epsilon,rho,measured_rate,bound_rate,converged");
    const double mults[] = {0.0, 0.25, 0.5, 0.75, 0.9, 1.1};
    const int iters = 200;
    Eigen::VectorXd u0 = Eigen::VectorXd::Zero(problem.B.rows());
    for (double mult : mults) {
        linlab::PerturbationModel perturb;
        perturb.epsilon = mult * eps_max;
        perturb.mode = linlab::PerturbationModel::Mode::worst_case;
        const linlab::InexactRun run =
            linlab::run_inexact_uzawa(problem, rho_star, perturb, 1, iters, rng::derive(cfg.seed, 0x35ccULL), u0);
        const double first = run.error_norms.front();
        const double last = run.error_norms.back();
        const int steps = static_cast<int>(run.error_norms.size()) - 1;
        const double measured = steps > 0 && first > 0.0 && last > 0.0
                                    ? std::pow(last / first, 1.0 / steps)
                                    : 0.0;
        const bool converged = last < 1e-8 * first;
        std::fprintf(csv.f, "%.17g,%.17g,%.17g,%.17g,%d\n", perturb.epsilon, rho_star, measured, run.bound_factor,
                     converged ? 1 : 0);
    }
    return 0;
}

int run_quadrature_variance(const ExperimentConfig& cfg, const fs::path& dir) {
    const std::vector<int> k_list = {4, 8, 16, 32, 64};
    const int reps = 2000;
    const auto smooth = [](double x) { return std::exp(x); };
    const auto kinked = [](double x) { return std::abs(x); };

    CsvFile csv(dir / "variance.csv", "rule,integrand,K,N_K,variance");
    json slopes;
    const std::vector<std::pair<std::string, std::function<double(double)>>> integrands = {{"exp", smooth},
                                                                                           {"abs", kinked}};
    for (const auto& [name, fn] : integrands) {
        for (RuleTag rule : {RuleTag::p3, RuleTag::vanilla}) {
            const VarianceProbeResult probe = variance_probe(fn, rule, k_list, reps, rng::derive(cfg.seed, 0x9a1dULL));
            for (const auto& row : probe.rows)
                std::fprintf(csv.f, "%s,%s,%d,%d,%.17g\n", to_string(rule), name.c_str(), row.K, row.n_points,
                             row.variance);
            if (probe.loglog_slope)
                slopes[std::string(to_string(rule)) + "_" + name] = *probe.loglog_slope;
        }
    }
    json manifest = resolved_manifest(cfg, nullptr);
    manifest["loglog_slopes"] = slopes;
    write_manifest(dir, manifest);
    return 0;
}

}  // namespace

int run_experiment(const ExperimentConfig& cfg) {
    const auto& tags = experiment_tags();
    if (std::find(tags.begin(), tags.end(), cfg.experiment) == tags.end())
        throw ConfigError("run_experiment: unknown experiment '" + cfg.experiment + "'");
    if (!(cfg.alpha > 0.0 && cfg.alpha < 0.5)) throw ConfigError("run_experiment: alpha must lie in (0, 0.5)");

    const fs::path dir(cfg.output_dir);
    fs::create_directories(dir);

    if (cfg.experiment == "linlab_sweep") return run_linlab_sweep(cfg, dir);
    if (cfg.experiment == "quadrature_variance") return run_quadrature_variance(cfg, dir);
    return run_neural_experiment(cfg, dir);
}

ReferenceResult reference_check(const ProblemSpec& problem, int cells) {
    problem.validate();
    if (cells < 4) throw ConfigError("reference_check: need a denser grid");
    const double a = problem.domain.a;
    const double h = problem.domain.length() / cells;

    ReferenceResult result;
    result.x.resize(cells + 1);
    for (int i = 0; i <= cells; ++i) result.x[i] = a + i * h;

    if (problem.dirac_prime) {
        if (!problem.exact) throw ConfigError("reference_check: ultra-weak reference needs the analytic solution");
        result.u = result.x.unaryExpr([&](double x) { return problem.exact->u(x); });
        result.l2_error_vs_exact = 0.0;
        return result;
    }

    // -u'' = f with homogeneous Dirichlet data: standard second-order
    // centered differences, Thomas solve of the (2,-1)/h^2 tridiagonal.
    const int n = cells - 1;
    Eigen::VectorXd diag = Eigen::VectorXd::Constant(n, 2.0 / (h * h));
    Eigen::VectorXd off = Eigen::VectorXd::Constant(n - 1, -1.0 / (h * h));
    Eigen::VectorXd rhs(n);
    for (int i = 0; i < n; ++i) rhs[i] = problem.source(result.x[i + 1]);

    for (int i = 1; i < n; ++i) {
        const double w = off[i - 1] / diag[i - 1];
        diag[i] -= w * off[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    Eigen::VectorXd u_int(n);
    u_int[n - 1] = rhs[n - 1] / diag[n - 1];
    for (int i = n - 2; i >= 0; --i) u_int[i] = (rhs[i] - off[i] * u_int[i + 1]) / diag[i];

    result.u = Eigen::VectorXd::Zero(cells + 1);
    result.u.segment(1, n) = u_int;

    if (problem.exact) {
        double num = 0.0;
        for (int i = 0; i <= cells; ++i) {
            const double d = result.u[i] - problem.exact->u(result.x[i]);
            const double w = (i == 0 || i == cells) ? 0.5 * h : h;
            num += w * d * d;
        }
        result.l2_error_vs_exact = std::sqrt(num);
    }
    return result;
}

}  // namespace runn
