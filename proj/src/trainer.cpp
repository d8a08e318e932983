#include "runn/trainer.hpp"

#include <Eigen/Cholesky>

#include <cmath>

namespace runn {

void TrainConfig::validate() const {
    if (epochs < 0) throw ConfigError("TrainConfig: negative epoch count");
    if (!(learning_rate > 0.0)) throw ConfigError("TrainConfig: learning rate must be positive");
    if (n_points < 1) throw ConfigError("TrainConfig: need collocation points");
    if (rule == RuleTag::p3 && n_points % 3 != 0) throw ConfigError("TrainConfig: N_K must be divisible by 3 for p3");
    if (lambda < 0.0) throw ConfigError("TrainConfig: negative Tikhonov parameter");
    if (!(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0))
        throw ConfigError("TrainConfig: Adam betas must lie in (0,1)");
    if (!(adam_eps > 0.0)) throw ConfigError("TrainConfig: adam_eps must be positive");
}

Eigen::VectorXd ls_step(const QuadraticForm& qf, double lambda) {
    const Eigen::Index n = qf.H.rows();
    if (qf.H.cols() != n || qf.f.size() != n) throw ContractError("ls_step: quadratic form shape mismatch");
    if (!qf.H.allFinite() || !qf.f.allFinite()) throw NumericError("ls_step: non-finite quadratic form");

    const double max_diag = n > 0 ? qf.H.diagonal().maxCoeff() : 0.0;
    const double floor = std::max(1e-12 * max_diag, 1e-30);
    Eigen::VectorXd s(n);
    for (Eigen::Index j = 0; j < n; ++j) s[j] = std::sqrt(std::max(qf.H(j, j), floor));

    Eigen::MatrixXd scaled = qf.H.array().colwise() / s.array();
    scaled = scaled.array().rowwise() / s.transpose().array();
    scaled.diagonal().array() += lambda;
    const Eigen::VectorXd rhs = qf.f.array() / s.array();

    Eigen::LDLT<Eigen::MatrixXd> ldlt(scaled);
    Eigen::VectorXd wt = ldlt.solve(rhs);
    const double resid = (scaled * wt - rhs).norm();
    const double scale = std::max(rhs.norm(), 1e-300);
    if (!wt.allFinite() || resid > 1e-6 * scale)
        throw NumericError("ls_step: scaled system is singular (possible only at lambda = 0)");
    return (wt.array() / s.array()).matrix();
}

void adam_step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad, AdamState& state, double lr, double beta1,
               double beta2, double eps) {
    if (!grad.allFinite()) throw NumericError("adam_step: non-finite gradient");
    if (state.m.size() == 0) {
        state.m = Eigen::VectorXd::Zero(grad.size());
        state.v = Eigen::VectorXd::Zero(grad.size());
        state.t = 0;
    }
    if (state.m.size() != grad.size() || theta.size() != grad.size())
        throw ContractError("adam_step: state does not match the gradient bundle");
    state.t += 1;
    state.m = beta1 * state.m + (1.0 - beta1) * grad;
    state.v = beta2 * state.v + (1.0 - beta2) * grad.array().square().matrix();
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
    const Eigen::ArrayXd m_hat = state.m.array() / bc1;
    const Eigen::ArrayXd v_hat = state.v.array() / bc2;
    theta.array() -= lr * m_hat / (v_hat.sqrt() + eps);
}

namespace {

QuadratureSample draw_sample(const ProblemSpec& problem, const TrainConfig& cfg, std::uint64_t seed, int epoch) {
    const std::uint64_t s = rng::derive(seed, 0xe90cULL, static_cast<std::uint64_t>(cfg.resample_each_epoch ? epoch : 0));
    if (cfg.rule == RuleTag::p3) return p3_sample(Partition{problem.domain, cfg.n_points / 3}, s);
    return vanilla_sample(problem.domain, cfg.n_points, s);
}

// Gradient of the discretized loss at the batch's current outputs. The
// ultra-weak duality term contributes one analytic node at the midpoint
// with unit cotangent on r'.
ParamGrad gradient_from_batch(const ProblemSpec& problem, const Field& u_prev, const NetworkParams& net,
                              const NetworkSpec& spec, const EvalBatch& batch, const Eigen::VectorXd& weights,
                              bool with_w_out) {
    Eigen::VectorXd a, b, c;
    loss_integrand_cotangents(problem, u_prev, batch, weights, a, b, c);
    Eigen::VectorXd points = batch.points;
    if (problem.formulation == Formulation::ultraweak) {
        const Eigen::Index np = points.size();
        points.conservativeResize(np + 1);
        a.conservativeResize(np + 1);
        b.conservativeResize(np + 1);
        c.conservativeResize(np + 1);
        points[np] = problem.domain.midpoint();
        a[np] = 0.0;
        b[np] = 1.0;
        c[np] = 0.0;
    }
    return weighted_output_gradient(net, spec, points, a, b, c, with_w_out);
}

}  // namespace

ParamGrad hidden_loss_gradient(const ProblemSpec& problem, const Field& u_prev, const NetworkParams& net,
                               const NetworkSpec& spec, const QuadratureSample& sample, bool with_w_out) {
    const int order = problem.formulation == Formulation::weak ? 1 : 2;
    const EvalBatch batch = eval(net, spec, sample.nodes, order);
    return gradient_from_batch(problem, u_prev, net, spec, batch, sample.weights, with_w_out);
}

PhaseResult train_phase(const ProblemSpec& problem, int phase_k, NetworkParams net, const NetworkSpec& spec,
                        const Field& u_prev, const TrainConfig& cfg, std::uint64_t seed,
                        const EpochObserver& observer) {
    problem.validate();
    cfg.validate();
    spec.validate();

    PhaseResult result;
    result.params = std::move(net);
    AdamState adam;
    const int n_hidden = hidden_parameter_count(spec);

    QuadratureSample sample;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (cfg.resample_each_epoch || epoch == 0) sample = draw_sample(problem, cfg, seed, epoch);

        const int order = problem.formulation == Formulation::weak ? 1 : 2;
        EvalBatch batch = eval(result.params, spec, sample.nodes, order);

        if (!cfg.pure_adam) {
            EvalBatch at_zero;
            const EvalBatch* at_zero_ptr = nullptr;
            if (problem.formulation == Formulation::ultraweak) {
                Eigen::VectorXd zero(1);
                zero[0] = problem.domain.midpoint();
                at_zero = eval(result.params, spec, zero, 1);
                at_zero_ptr = &at_zero;
            }
            const QuadraticForm qf =
                assemble_quadratic(problem, phase_k, u_prev, batch, sample.weights, at_zero_ptr);
            result.params.w_out = ls_step(qf, cfg.lambda);
            // refresh outputs at the new linear weights; phi is unchanged
            batch.out = batch.phi * result.params.w_out;
            if (order >= 1) batch.dout = batch.dphi * result.params.w_out;
            if (order >= 2) batch.d2out = batch.d2phi * result.params.w_out;
        }

        ParamGrad grad;
        try {
            grad = gradient_from_batch(problem, u_prev, result.params, spec, batch, sample.weights, cfg.pure_adam);
        } catch (const NumericError&) {
            result.diverged = true;
            break;
        }
        if (!grad.all_finite()) {
            result.diverged = true;
            break;
        }

        Eigen::VectorXd theta = flatten_hidden(result.params);
        if (cfg.pure_adam) {
            theta.conservativeResize(n_hidden + spec.width);
            theta.tail(spec.width) = result.params.w_out;
        }
        try {
            adam_step(theta, grad.flatten(), adam, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps);
        } catch (const NumericError&) {
            result.diverged = true;
            break;
        }
        assign_hidden(result.params, theta.head(n_hidden));
        if (cfg.pure_adam) result.params.w_out = theta.tail(spec.width);

        const double loss = loss_value(problem, phase_k, u_prev, result.params, spec, sample);
        result.history.push_back({epoch, loss});
        if (!std::isfinite(loss)) {
            result.diverged = true;
            break;
        }
        if (observer) observer(epoch, result.params, loss);
    }

    const QuadratureSample dense = trapezoid_rule(problem.domain, cfg.dense_report_points);
    result.final_dense_loss = loss_value(problem, phase_k, u_prev, result.params, spec, dense);
    return result;
}

}  // namespace runn
