#pragma once

#include <Eigen/Core>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "runn/trainer.hpp"

namespace runn {

enum class ComponentRole { initial_u0, weak_residual, strong_correction, ultraweak_test };

const char* to_string(ComponentRole role);

/// One frozen piece of the accumulated solution. Under the ultra-weak
/// formulation a component is a test network r and contributes -(r)'' to
/// the solution; otherwise it contributes its own values.
struct Component {
    NetworkSpec spec;
    NetworkParams params;
    double rho_scale = 1.0;
    ComponentRole role = ComponentRole::initial_u0;
};

struct PhaseRecord {
    int phase = 0;
    double relative_error = 0.0;  ///< dense-grid error after the phase (NaN without an exact solution)
    double omega_min = 0.0;
    double omega_max = 0.0;
    int s_used = 0;
    SourceTag source_tag = SourceTag::source_term;
    int epochs = 0;
    double final_dense_loss = 0.0;
    bool diverged = false;
};

/// Accumulated Uzawa solution: initial ansatz plus trained corrections with
/// unit step scale (the graph-inner-product setting makes rho* = 1).
struct UzawaState {
    Formulation formulation = Formulation::weak;
    Interval domain{-1.0, 1.0};
    std::vector<Component> components;
    std::vector<PhaseRecord> history;
    bool failed = false;
};

/// Training plan for one phase of the outer loop.
struct PhasePlan {
    NetworkSpec net;
    TrainConfig train;
};

enum class ErrorNorm { l2, h1_semi };

/// The state as an evaluation handle (component-sum rule).
SumField state_field(const UzawaState& state);

/// Component-sum evaluation. Derivatives are refused under the ultra-weak
/// formulation; the solution only lives in L2 there.
Eigen::VectorXd evaluate_solution(const UzawaState& state, const Eigen::VectorXd& points);
std::pair<Eigen::VectorXd, Eigen::VectorXd> evaluate_solution_with_derivative(const UzawaState& state,
                                                                              const Eigen::VectorXd& points);

/// Relative dense-grid error of a field against an exact solution. Uses
/// trapezoid quadrature; discontinuous exact solutions are sampled on a
/// half-cell-offset grid that avoids the jump location.
double relative_error_of_field(const Field& u, const ExactSolution& exact, ErrorNorm norm, const Interval& domain,
                               int grid_size);

/// error_report over the accumulated state; h1_semi is refused for the
/// ultra-weak formulation.
double error_report(const UzawaState& state, const ExactSolution& exact, ErrorNorm norm, int grid_size = 10000);

/// Norm used for a formulation's error reports.
ErrorNorm default_error_norm(Formulation f);

/// Per-phase observation hooks for experiment artifact writers.
struct RunCallbacks {
    std::function<void(int phase, const SpectrumCurve& curve, const InitPlan& plan)> on_spectrum;
    std::function<void(int phase, int epoch, double loss, double relative_error)> on_epoch;
};

/// Approach-1 driver: train the initial ansatz from the source spectrum,
/// then train corrections against the frozen state, appending each as a
/// component. Phase k >= 1 plans its frequency band from the prescribed
/// prior signal. On training divergence the partial state is returned with
/// the failure flag set.
UzawaState run_approach1(const ProblemSpec& problem, const std::vector<PhasePlan>& schedule, double alpha,
                         std::uint64_t seed, const RunCallbacks& callbacks = {});

/// Single-phase Ritz minimization of 0.5 b(u,u) - l(u) (the weak initial
/// phase on its own).
PhaseResult run_deep_ritz_baseline(const ProblemSpec& problem, const NetworkSpec& spec, const TrainConfig& cfg,
                                   std::uint64_t seed, const EpochObserver& observer = nullptr);

/// Serialize the state to a directory: manifest.json, one flat text array
/// per component, history.csv.
void save_state(const UzawaState& state, const std::string& dir);
UzawaState load_state(const std::string& dir);

/// Total variance (trace of the covariance) of the stochastic loss
/// gradient across independent resamples at fixed parameters. with_w_out
/// widens the measured gradient to include the output weights.
double gradient_variance(const ProblemSpec& problem, const Field& u_prev, const NetworkParams& net,
                         const NetworkSpec& spec, RuleTag rule, int n_points, int reps, std::uint64_t seed,
                         bool with_w_out = false);

}  // namespace runn
