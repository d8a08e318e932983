#pragma once

#include <Eigen/Core>
#include <vector>

#include "runn/common.hpp"
#include "runn/spectral.hpp"

namespace runn {

enum class Activation { tanh_fn, relu_cubed };
enum class Cutoff { none, one_minus_x_squared };

/// Static shape of one ansatz. depth L = 1 means the first (Fourier or
/// affine) layer feeds the output combination directly.
struct NetworkSpec {
    int input_dim = 1;
    int width = 30;
    int depth = 1;
    bool fourier = true;
    Activation activation = Activation::tanh_fn;
    Cutoff cutoff = Cutoff::one_minus_x_squared;

    void validate() const;
};

/// All trainable state of one ansatz. kappa is fixed at initialization and
/// not part of the trainable set; w_out is handled by the least-squares
/// step, everything else belongs to the hidden set.
struct NetworkParams {
    Eigen::VectorXd kappa;      ///< n positive frequency scalars
    Eigen::VectorXd w_spatial;  ///< n input weights (1D input)
    Eigen::VectorXd b_spatial;  ///< n input biases
    std::vector<Eigen::MatrixXd> hidden_w;  ///< layers 2..L, each n x n
    std::vector<Eigen::VectorXd> hidden_b;  ///< layers 2..L, each n
    Eigen::VectorXd w_out;      ///< n output weights
};

/// Generator values and network outputs over a batch of points. Matrices
/// beyond the requested derivative order stay empty.
struct EvalBatch {
    Eigen::VectorXd points;
    Eigen::MatrixXd phi, dphi, d2phi;   // points x n
    Eigen::VectorXd out, dout, d2out;   // per-point u, u', u''
};

/// Addresses one hidden parameter for sensitivity queries.
struct ParamRef {
    enum class Kind { w_spatial, b_spatial, hidden_weight, hidden_bias, output_weight };
    Kind kind = Kind::w_spatial;
    int unit = 0;   ///< unit j for the first-layer parameters
    int layer = 0;  ///< hidden layer index, 0 = layer l=2
    int row = 0;
    int col = 0;
};

/// Derivatives of (phi, dphi, d2phi) with respect to one parameter.
struct SensitivityBatch {
    Eigen::MatrixXd phi, dphi, d2phi;  // points x n
};

/// Gradient (or any cotangent) laid out like the trainable parameters.
/// w_out stays empty unless the caller asked for it.
struct ParamGrad {
    Eigen::VectorXd w_spatial, b_spatial;
    std::vector<Eigen::MatrixXd> hidden_w;
    std::vector<Eigen::VectorXd> hidden_b;
    Eigen::VectorXd w_out;

    static ParamGrad zeros_like(const NetworkParams& params, bool with_w_out);
    Eigen::VectorXd flatten() const;
    bool all_finite() const;
};

/// Number of hidden (Adam-trained) parameters.
int hidden_parameter_count(const NetworkSpec& spec);

/// Build a network from an initialization plan: log-uniform kappa over the
/// plan's band (Fourier nets), w ~ U(-1,1), b ~ U(-pi,pi), hidden layers
/// Glorot-uniform for tanh and He-uniform for relu^3, w_out zero.
NetworkParams build_network(const NetworkSpec& spec, const InitPlan& init, std::uint64_t seed);

/// Evaluate generators and network output with exact derivatives up to
/// `order` (0, 1 or 2). Derivatives go through the full composition,
/// including the cutoff product rule.
EvalBatch eval(const NetworkParams& params, const NetworkSpec& spec, const Eigen::VectorXd& points, int order);

/// Exact forward-mode derivative of the generator triple with respect to a
/// single hidden parameter. Selecting an output weight is a contract error;
/// the LS step owns those.
SensitivityBatch param_sensitivities(const NetworkParams& params, const NetworkSpec& spec,
                                     const Eigen::VectorXd& points, const ParamRef& wrt);

/// Reverse-mode gradient of G = sum_i [a_i u(x_i) + b_i u'(x_i) + c_i u''(x_i)]
/// with respect to the hidden parameters (and w_out when requested). The
/// cotangent vectors a, b, c carry any quadrature weights.
ParamGrad weighted_output_gradient(const NetworkParams& params, const NetworkSpec& spec,
                                   const Eigen::VectorXd& points, const Eigen::VectorXd& a,
                                   const Eigen::VectorXd& b, const Eigen::VectorXd& c, bool with_w_out = false);

/// Hidden parameters as one flat vector (layout matches ParamGrad::flatten).
Eigen::VectorXd flatten_hidden(const NetworkParams& params);

/// Inverse of flatten_hidden.
void assign_hidden(NetworkParams& params, const Eigen::VectorXd& flat);

}  // namespace runn
