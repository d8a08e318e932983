#pragma once

#include <Eigen/Core>
#include <vector>

#include "runn/common.hpp"

namespace runn::linlab {

/// Finite-dimensional stand-in for the trial-to-test operator with its
/// operator norms (Euclidean inner products on both sides, so B' = B^T).
struct LinearProblem {
    Eigen::MatrixXd B;
    Eigen::VectorXd f;
    Eigen::VectorXd u_star;
    double norm_B = 0.0;      ///< largest singular value
    double inv_norm_B = 0.0;  ///< ||B^-1|| = 1 / smallest singular value
};

/// Assemble the problem from an invertible matrix and right-hand side;
/// computes u_star and the singular-value norms.
LinearProblem make_problem(const Eigen::MatrixXd& B, const Eigen::VectorXd& f);

/// Random well-conditioned ensemble member: B = Q1 diag(sigma) Q2^T with
/// sigma in [0.4, 2.0], condition number well under the cap of 50.
LinearProblem random_problem(int m, std::uint64_t seed);

struct RhoChoice {
    double rho_star = 0.0;
    double rate = 0.0;
};

/// Optimal step and contraction rate:
/// rho* = 2 / (||B||^2 + ||B^-1||^-2),
/// rate = (||B||^2 - ||B^-1||^-2) / (||B||^2 + ||B^-1||^-2).
RhoChoice optimal_rho(const LinearProblem& problem);

/// ||I - rho B^T B|| = max over singular values of |1 - rho sigma^2|.
double contraction_norm(const LinearProblem& problem, double rho);

/// Exact iteration u <- u + rho B^T (f - B u); returns ||e^k|| for
/// k = 0..iters.
std::vector<double> run_exact_uzawa(const LinearProblem& problem, double rho, int iters,
                                    const Eigen::VectorXd& u0);

/// Largest admissible relative tolerance from the convergence theorems:
/// approach 1: eps^2 + 2 eps < c  ->  eps_max = sqrt(1+c) - 1
/// approach 2: eps^3 + 3 eps^2 + 3 eps < c  ->  eps_max = cbrt(1+c) - 1
/// with c = (1 - ||I - rho B^T B||) / (rho ||B||^2).
double tolerance_bound(const LinearProblem& problem, double rho, int approach);

struct PerturbationModel {
    double epsilon = 0.0;
    enum class Mode { worst_case, random_sphere } mode = Mode::random_sphere;
};

struct InexactRun {
    std::vector<double> error_norms;   ///< ||e^k||, k = 0..iters
    std::vector<double> step_factors;  ///< ||e^{k+1}|| / ||e^k|| per step
    double bound_factor = 0.0;         ///< one-step factor the proofs guarantee
};

/// Inexact iteration: each residual and correction is perturbed at the
/// prescribed relative magnitude (approach 2 additionally perturbs the
/// updated iterate by eps * ||rho delta||). worst_case greedily aligns the
/// perturbations with the error-amplification direction.
InexactRun run_inexact_uzawa(const LinearProblem& problem, double rho, const PerturbationModel& perturb,
                             int approach, int iters, std::uint64_t seed, const Eigen::VectorXd& u0);

}  // namespace runn::linlab
