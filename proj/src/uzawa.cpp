#include "runn/uzawa.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

namespace runn {

const char* to_string(ComponentRole role) {
    switch (role) {
        case ComponentRole::initial_u0: return "initial_u0";
        case ComponentRole::weak_residual: return "weak_residual";
        case ComponentRole::strong_correction: return "strong_correction";
        case ComponentRole::ultraweak_test: return "ultraweak_test";
    }
    return "unknown";
}

namespace {

std::shared_ptr<const Field> component_field(const Component& comp, Formulation formulation) {
    if (formulation == Formulation::ultraweak)
        return std::make_shared<NegSecondDerivativeField>(comp.params, comp.spec);
    return std::make_shared<NetworkField>(comp.params, comp.spec);
}

ComponentRole correction_role(Formulation f) {
    switch (f) {
        case Formulation::weak: return ComponentRole::weak_residual;
        case Formulation::strong: return ComponentRole::strong_correction;
        case Formulation::ultraweak: return ComponentRole::ultraweak_test;
    }
    return ComponentRole::weak_residual;
}

constexpr int kEpochErrorGrid = 2001;

}  // namespace

SumField state_field(const UzawaState& state) {
    SumField sum;
    for (const auto& comp : state.components) sum.add(component_field(comp, state.formulation), comp.rho_scale);
    return sum;
}

Eigen::VectorXd evaluate_solution(const UzawaState& state, const Eigen::VectorXd& points) {
    return state_field(state).values(points);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> evaluate_solution_with_derivative(const UzawaState& state,
                                                                              const Eigen::VectorXd& points) {
    if (state.formulation == Formulation::ultraweak)
        throw ContractError("evaluate_solution_with_derivative: the ultra-weak solution lives in L2 only");
    const SumField sum = state_field(state);
    Eigen::VectorXd v, d1, d2;
    sum.eval(points, 1, v, d1, d2);
    return {v, d1};
}

double relative_error_of_field(const Field& u, const ExactSolution& exact, ErrorNorm norm, const Interval& domain,
                               int grid_size) {
    if (!exact.u) throw ContractError("relative_error_of_field: exact solution missing");
    if (norm == ErrorNorm::h1_semi && !exact.du)
        throw ContractError("relative_error_of_field: exact derivative unavailable");

    // half-cell offset keeps the jump location off the grid
    const QuadratureSample grid =
        exact.continuous ? trapezoid_rule(domain, grid_size) : midpoint_rule(domain, grid_size);

    Eigen::VectorXd v, d1, d2;
    Eigen::ArrayXd diff, ref;
    if (norm == ErrorNorm::l2) {
        u.eval(grid.nodes, 0, v, d1, d2);
        ref = grid.nodes.unaryExpr([&](double x) { return exact.u(x); }).array();
        diff = v.array() - ref;
    } else {
        u.eval(grid.nodes, 1, v, d1, d2);
        ref = grid.nodes.unaryExpr([&](double x) { return exact.du(x); }).array();
        diff = d1.array() - ref;
    }
    const double num = (grid.weights.array() * diff.square()).sum();
    const double den = (grid.weights.array() * ref.square()).sum();
    if (!(den > 0.0)) throw NumericError("relative_error_of_field: exact solution has zero norm");
    return std::sqrt(num / den);
}

double error_report(const UzawaState& state, const ExactSolution& exact, ErrorNorm norm, int grid_size) {
    if (state.formulation == Formulation::ultraweak && norm == ErrorNorm::h1_semi)
        throw ContractError("error_report: H1 seminorm is unsupported for the ultra-weak formulation");
    const SumField sum = state_field(state);
    return relative_error_of_field(sum, exact, norm, state.domain, grid_size);
}

ErrorNorm default_error_norm(Formulation f) {
    return f == Formulation::weak ? ErrorNorm::h1_semi : ErrorNorm::l2;
}

namespace {

void check_schedule_spec(const ProblemSpec& problem, int phase, const NetworkSpec& spec) {
    if (problem.formulation != Formulation::ultraweak) return;
    if (phase == 0) {
        if (spec.fourier || spec.activation != Activation::relu_cubed)
            throw ConfigError("run_approach1: the ultra-weak initial phase needs relu^3 without a Fourier layer");
    } else {
        if (!spec.fourier || spec.activation != Activation::relu_cubed)
            throw ConfigError("run_approach1: ultra-weak corrections need a Fourier layer with relu^3");
    }
}

}  // namespace

UzawaState run_approach1(const ProblemSpec& problem, const std::vector<PhasePlan>& schedule, double alpha,
                         std::uint64_t seed, const RunCallbacks& callbacks) {
    problem.validate();
    if (schedule.empty()) throw ConfigError("run_approach1: empty schedule");

    UzawaState state;
    state.formulation = problem.formulation;
    state.domain = problem.domain;

    const Eigen::VectorXd grid = uniform_grid(problem.domain, kDefaultSpectralGridSize);
    Eigen::VectorXd source_grid;
    if (problem.dirac_prime) {
        const ZeroField zero;
        source_grid = strong_residual_grid(problem, zero, grid);  // the dipole proxy itself
    } else {
        source_grid = grid.unaryExpr([&](double x) { return problem.source(x); });
    }

    for (int phase = 0; phase < static_cast<int>(schedule.size()); ++phase) {
        const PhasePlan& plan = schedule[phase];
        check_schedule_spec(problem, phase, plan.net);

        PhaseArtifacts artifacts;
        artifacts.source.assign(source_grid.data(), source_grid.data() + source_grid.size());
        const SumField current = state_field(state);
        if (phase >= 1) {
            const Eigen::VectorXd resid = strong_residual_grid(problem, current, grid);
            artifacts.strong_residual = std::vector<double>(resid.data(), resid.data() + resid.size());
        }
        if (phase >= 2) {
            const auto prior = component_field(state.components.back(), state.formulation);
            const Eigen::VectorXd prior_vals = prior->values(grid);
            std::vector<double> vals(prior_vals.data(), prior_vals.data() + prior_vals.size());
            if (problem.formulation == Formulation::ultraweak)
                artifacts.prior_correction_proxy = std::move(vals);
            else
                artifacts.prior_weak_residual = std::move(vals);
        }

        SpectrumCurve curve;
        const InitPlan init = init_plan_for_phase({problem.formulation, phase}, artifacts, alpha, problem.domain, &curve);
        if (callbacks.on_spectrum) callbacks.on_spectrum(phase, curve, init);

        NetworkParams net = build_network(plan.net, init, rng::derive(seed, 0xb17dULL, static_cast<std::uint64_t>(phase)));

        EpochObserver observer;
        if (callbacks.on_epoch) {
            observer = [&, phase](int epoch, const NetworkParams& params, double loss) {
                double rel = std::numeric_limits<double>::quiet_NaN();
                if (problem.exact) {
                    SumField trial = state_field(state);
                    trial.add(component_field(Component{plan.net, params, 1.0, ComponentRole::initial_u0},
                                              problem.formulation));
                    rel = relative_error_of_field(trial, *problem.exact, default_error_norm(problem.formulation),
                                                  problem.domain, kEpochErrorGrid);
                }
                callbacks.on_epoch(phase, epoch, loss, rel);
            };
        }

        const PhaseResult trained = train_phase(problem, phase, std::move(net), plan.net, current, plan.train,
                                                rng::derive(seed, 0x7261ULL, static_cast<std::uint64_t>(phase)),
                                                observer);

        Component comp;
        comp.spec = plan.net;
        comp.params = trained.params;
        comp.rho_scale = 1.0;
        comp.role = phase == 0 ? ComponentRole::initial_u0 : correction_role(problem.formulation);
        state.components.push_back(std::move(comp));

        PhaseRecord record;
        record.phase = phase;
        record.omega_min = init.omega_min;
        record.omega_max = init.omega_max;
        record.s_used = init.s_used;
        record.source_tag = init.source_tag;
        record.epochs = static_cast<int>(trained.history.size());
        record.final_dense_loss = trained.final_dense_loss;
        record.diverged = trained.diverged;
        record.relative_error = std::numeric_limits<double>::quiet_NaN();
        if (problem.exact)
            record.relative_error = error_report(state, *problem.exact, default_error_norm(problem.formulation));
        state.history.push_back(record);

        if (trained.diverged) {
            state.failed = true;
            break;
        }
    }
    return state;
}

PhaseResult run_deep_ritz_baseline(const ProblemSpec& problem, const NetworkSpec& spec, const TrainConfig& cfg,
                                   std::uint64_t seed, const EpochObserver& observer) {
    problem.validate();
    if (problem.formulation != Formulation::weak)
        throw ConfigError("run_deep_ritz_baseline: the Ritz baseline is a weak-formulation method");

    const Eigen::VectorXd grid = uniform_grid(problem.domain, kDefaultSpectralGridSize);
    PhaseArtifacts artifacts;
    artifacts.source.resize(grid.size());
    for (Eigen::Index i = 0; i < grid.size(); ++i) artifacts.source[i] = problem.source(grid[i]);
    const InitPlan init = init_plan_for_phase({problem.formulation, 0}, artifacts, 0.05, problem.domain);

    NetworkParams net = build_network(spec, init, rng::derive(seed, 0xd127ULL));
    const ZeroField zero;
    return train_phase(problem, 0, std::move(net), spec, zero, cfg, rng::derive(seed, 0x7261ULL), observer);
}

namespace {

using nlohmann::json;

json spec_to_json(const NetworkSpec& s) {
    return json{{"input_dim", s.input_dim}, {"width", s.width},   {"depth", s.depth},
                {"fourier", s.fourier},     {"activation", s.activation == Activation::tanh_fn ? "tanh" : "relu_cubed"},
                {"cutoff", s.cutoff == Cutoff::one_minus_x_squared ? "one_minus_x_squared" : "none"}};
}

NetworkSpec spec_from_json(const json& j) {
    NetworkSpec s;
    s.input_dim = j.at("input_dim").get<int>();
    s.width = j.at("width").get<int>();
    s.depth = j.at("depth").get<int>();
    s.fourier = j.at("fourier").get<bool>();
    s.activation = j.at("activation").get<std::string>() == "tanh" ? Activation::tanh_fn : Activation::relu_cubed;
    s.cutoff = j.at("cutoff").get<std::string>() == "none" ? Cutoff::none : Cutoff::one_minus_x_squared;
    return s;
}

// Flat layout: kappa, w_spatial, b_spatial, per hidden layer W (row major)
// then b, finally w_out.
std::vector<double> component_numbers(const Component& c) {
    std::vector<double> out;
    const auto push = [&](const Eigen::VectorXd& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
    };
    push(c.params.kappa);
    push(c.params.w_spatial);
    push(c.params.b_spatial);
    for (std::size_t h = 0; h < c.params.hidden_w.size(); ++h) {
        const auto& w = c.params.hidden_w[h];
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index cc = 0; cc < w.cols(); ++cc) out.push_back(w(r, cc));
        push(c.params.hidden_b[h]);
    }
    push(c.params.w_out);
    return out;
}

void component_from_numbers(Component& c, const std::vector<double>& nums) {
    const int n = c.spec.width;
    std::size_t at = 0;
    const auto take = [&](Eigen::VectorXd& v, int count) {
        v.resize(count);
        for (int i = 0; i < count; ++i) v[i] = nums.at(at++);
    };
    take(c.params.kappa, n);
    take(c.params.w_spatial, n);
    take(c.params.b_spatial, n);
    c.params.hidden_w.resize(c.spec.depth - 1);
    c.params.hidden_b.resize(c.spec.depth - 1);
    for (int h = 0; h + 1 < c.spec.depth; ++h) {
        c.params.hidden_w[h].resize(n, n);
        for (int r = 0; r < n; ++r)
            for (int cc = 0; cc < n; ++cc) c.params.hidden_w[h](r, cc) = nums.at(at++);
        take(c.params.hidden_b[h], n);
    }
    take(c.params.w_out, n);
    if (at != nums.size()) throw NumericError("load_state: component array length mismatch");
}

}  // namespace

void save_state(const UzawaState& state, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);

    json manifest;
    manifest["formulation"] = to_string(state.formulation);
    manifest["domain"] = {state.domain.a, state.domain.b};
    manifest["failed"] = state.failed;
    manifest["layout"] = "kappa, w_spatial, b_spatial, (W row-major, b) per hidden layer, w_out";
    json comps = json::array();
    for (std::size_t i = 0; i < state.components.size(); ++i) {
        const auto& c = state.components[i];
        json jc;
        jc["file"] = "component_" + std::to_string(i) + ".txt";
        jc["spec"] = spec_to_json(c.spec);
        jc["rho_scale"] = c.rho_scale;
        jc["role"] = to_string(c.role);
        comps.push_back(jc);

        const std::vector<double> nums = component_numbers(c);
        std::FILE* f = std::fopen((fs::path(dir) / jc["file"].get<std::string>()).c_str(), "wb");
        if (f == nullptr) throw NumericError("save_state: cannot open component file");
        for (double x : nums) std::fprintf(f, "%.17g\n", x);
        std::fclose(f);
    }
    manifest["components"] = comps;

    std::ofstream mf(fs::path(dir) / "manifest.json");
    mf << manifest.dump(2) << "\n";

    std::FILE* h = std::fopen((fs::path(dir) / "history.csv").c_str(), "wb");
    if (h == nullptr) throw NumericError("save_state: cannot open history.csv");
    std::fputs("phase,relative_error,omega_min,omega_max,s_used,source_tag,epochs,final_dense_loss,diverged\n", h);
    for (const auto& r : state.history)
        std::fprintf(h, "%d,%.17g,%.17g,%.17g,%d,%s,%d,%.17g,%d\n", r.phase, r.relative_error, r.omega_min,
                     r.omega_max, r.s_used, to_string(r.source_tag), r.epochs, r.final_dense_loss,
                     r.diverged ? 1 : 0);
    std::fclose(h);
}

UzawaState load_state(const std::string& dir) {
    namespace fs = std::filesystem;
    std::ifstream mf(fs::path(dir) / "manifest.json");
    if (!mf) throw NumericError("load_state: missing manifest.json");
    json manifest = json::parse(mf);

    UzawaState state;
    const std::string form = manifest.at("formulation").get<std::string>();
    state.formulation = form == "weak"        ? Formulation::weak
                        : form == "strong"    ? Formulation::strong
                                              : Formulation::ultraweak;
    state.domain.a = manifest.at("domain")[0].get<double>();
    state.domain.b = manifest.at("domain")[1].get<double>();
    state.failed = manifest.at("failed").get<bool>();

    for (const auto& jc : manifest.at("components")) {
        Component c;
        c.spec = spec_from_json(jc.at("spec"));
        c.rho_scale = jc.at("rho_scale").get<double>();
        const std::string role = jc.at("role").get<std::string>();
        c.role = role == "initial_u0"        ? ComponentRole::initial_u0
                 : role == "weak_residual"   ? ComponentRole::weak_residual
                 : role == "strong_correction" ? ComponentRole::strong_correction
                                               : ComponentRole::ultraweak_test;
        std::ifstream cf(fs::path(dir) / jc.at("file").get<std::string>());
        if (!cf) throw NumericError("load_state: missing component file");
        std::vector<double> nums;
        double x = 0.0;
        while (cf >> x) nums.push_back(x);
        component_from_numbers(c, nums);
        state.components.push_back(std::move(c));
    }
    return state;
}

double gradient_variance(const ProblemSpec& problem, const Field& u_prev, const NetworkParams& net,
                         const NetworkSpec& spec, RuleTag rule, int n_points, int reps, std::uint64_t seed,
                         bool with_w_out) {
    if (reps < 2) throw ConfigError("gradient_variance: need at least two resamples");
    Eigen::VectorXd sum, sumsq;
    for (int r = 0; r < reps; ++r) {
        const std::uint64_t s = rng::derive(seed, 0x6772ULL, static_cast<std::uint64_t>(r));
        const QuadratureSample sample = rule == RuleTag::p3
                                            ? p3_sample(Partition{problem.domain, n_points / 3}, s)
                                            : vanilla_sample(problem.domain, n_points, s);
        const Eigen::VectorXd g = hidden_loss_gradient(problem, u_prev, net, spec, sample, with_w_out).flatten();
        if (sum.size() == 0) {
            sum = Eigen::VectorXd::Zero(g.size());
            sumsq = Eigen::VectorXd::Zero(g.size());
        }
        sum += g;
        sumsq += g.array().square().matrix();
    }
    const Eigen::ArrayXd mean = sum.array() / reps;
    const Eigen::ArrayXd var = (sumsq.array() / reps - mean.square()) * (static_cast<double>(reps) / (reps - 1));
    return var.max(0.0).sum();
}

}  // namespace runn
