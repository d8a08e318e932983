#pragma once

#include <Eigen/Core>
#include <functional>
#include <vector>

#include "runn/formulations.hpp"

namespace runn {

struct TrainConfig {
    int epochs = 1;
    double learning_rate = 1e-3;
    int n_points = 9000;  ///< N_K collocation points per epoch
    double lambda = 1e-8;  ///< Tikhonov parameter for the scaled LS solve
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    bool resample_each_epoch = true;
    RuleTag rule = RuleTag::p3;
    bool pure_adam = false;  ///< baseline mode: no LS step, w_out joins the Adam set
    int dense_report_points = 10000;

    void validate() const;
};

/// First/second moment accumulators over the flattened trainable set.
struct AdamState {
    Eigen::VectorXd m, v;
    long t = 0;
};

/// Diagonally scaled, Tikhonov-regularized solve of the quadratic form:
/// s_j = sqrt(max(H_jj, floor)), solve (S^-1 H S^-1 + lambda I) wt = S^-1 f,
/// return S^-1 wt.
Eigen::VectorXd ls_step(const QuadraticForm& qf, double lambda);

/// Standard bias-corrected Adam update on a flat parameter vector.
void adam_step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad, AdamState& state, double lr, double beta1,
               double beta2, double eps);

struct EpochRecord {
    int epoch = 0;
    double loss = 0.0;  ///< discretized loss after both sub-steps
};

struct PhaseResult {
    NetworkParams params;
    std::vector<EpochRecord> history;
    double final_dense_loss = 0.0;  ///< loss on a dense deterministic grid
    bool diverged = false;
};

using EpochObserver = std::function<void(int epoch, const NetworkParams& params, double loss)>;

/// One training phase: per epoch resample the quadrature, assemble (H, f),
/// update w_out by least squares, then take one Adam step on the hidden
/// parameters with the loss gradient at the fresh w_out. The same sample
/// serves both sub-steps of an epoch.
PhaseResult train_phase(const ProblemSpec& problem, int phase_k, NetworkParams net, const NetworkSpec& spec,
                        const Field& u_prev, const TrainConfig& cfg, std::uint64_t seed,
                        const EpochObserver& observer = nullptr);

/// Gradient of the discretized phase loss with respect to the hidden
/// parameters at fixed w_out (the trainer's Adam input; also the probe used
/// by the variance diagnostics).
ParamGrad hidden_loss_gradient(const ProblemSpec& problem, const Field& u_prev, const NetworkParams& net,
                               const NetworkSpec& spec, const QuadratureSample& sample, bool with_w_out = false);

}  // namespace runn
