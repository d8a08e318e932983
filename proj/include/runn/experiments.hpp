#pragma once

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

#include "runn/linlab.hpp"
#include "runn/uzawa.hpp"

namespace runn {

/// Per-phase hyperparameter overrides on top of an experiment's defaults.
struct PhaseOverride {
    std::optional<int> epochs;
    std::optional<double> learning_rate;
    std::optional<int> n_points;
};

struct ExperimentConfig {
    std::string experiment;
    std::uint64_t seed = 1;
    std::string output_dir = "out";
    double alpha = 0.05;
    double lambda = 1e-8;
    std::vector<PhaseOverride> overrides;
};

/// Known experiment tags.
const std::vector<std::string>& experiment_tags();

/// Model problems of the experiment roster.
ProblemSpec weak_sine_problem(double frequency_multiplier = 1.0);  ///< u* = sin(m pi x)
ProblemSpec ultraweak_dirac_problem();                             ///< u* = (x+1)/2 - H(x)

/// Default phase schedules (collocation points, epochs, learning rates).
std::vector<PhasePlan> default_schedule(const std::string& experiment, double lambda);

/// Parse/serialize a config; unknown experiment tags raise ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

/// Run one experiment, writing convergence.csv, spectrum_<k>.csv,
/// solution.csv and manifest.json (plus sweep CSVs for the lab
/// experiments) into the output directory. Returns 0 on success, 1 when
/// training diverged (partial artifacts are kept).
int run_experiment(const ExperimentConfig& cfg);

struct ReferenceResult {
    Eigen::VectorXd x;
    Eigen::VectorXd u;
    double l2_error_vs_exact = 0.0;
};

/// Independent second-order finite-difference solution of -u'' = f on a
/// dense grid (tridiagonal solve); the ultra-weak problem returns the
/// analytic solution directly.
ReferenceResult reference_check(const ProblemSpec& problem, int cells = 100000);

}  // namespace runn
