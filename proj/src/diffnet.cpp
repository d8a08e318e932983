#include "runn/diffnet.hpp"

#include <cmath>
#include <numbers>

namespace runn {

namespace {

using Eigen::ArrayXd;
using Eigen::ArrayXXd;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Elementwise activation derivatives up to third order.
void act_derivs(Activation act, const ArrayXXd& y, ArrayXXd& v, ArrayXXd& d1, ArrayXXd& d2, ArrayXXd& d3) {
    if (act == Activation::tanh_fn) {
        const ArrayXXd t = y.tanh();
        v = t;
        d1 = 1.0 - t.square();
        d2 = -2.0 * t * d1;
        d3 = -2.0 * d1 * (1.0 - 3.0 * t.square());
    } else {
        const ArrayXXd m = y.max(0.0);
        v = m.cube();
        d1 = 3.0 * m.square();
        d2 = 6.0 * m;
        d3 = 6.0 * (y > 0.0).cast<double>();
    }
}

void sin_derivs(const ArrayXXd& a, ArrayXXd& v, ArrayXXd& d1, ArrayXXd& d2, ArrayXXd& d3) {
    v = a.sin();
    d1 = a.cos();
    d2 = -v;
    d3 = -d1;
}

struct Forward {
    ArrayXd xi, dxi, d2xi;                 // cutoff and its derivatives, per point
    ArrayXXd a;                            // first-layer pre-activation
    ArrayXd slope;                         // s_j = kappa_j * w_j (per unit)
    std::vector<ArrayXXd> z, dz, d2z;      // post-activation per layer (0 = first)
    std::vector<ArrayXXd> y, dy, d2y;      // hidden pre-activations (index h -> layer h+2)
};

void check_shapes(const NetworkParams& p, const NetworkSpec& spec) {
    const int n = spec.width;
    const int hidden = spec.depth - 1;
    if (p.kappa.size() != n || p.w_spatial.size() != n || p.b_spatial.size() != n || p.w_out.size() != n ||
        static_cast<int>(p.hidden_w.size()) != hidden || static_cast<int>(p.hidden_b.size()) != hidden)
        throw ContractError("network parameters do not match the spec dimensions");
    for (int h = 0; h < hidden; ++h)
        if (p.hidden_w[h].rows() != n || p.hidden_w[h].cols() != n || p.hidden_b[h].size() != n)
            throw ContractError("hidden layer dimensions do not match the spec width");
}

void cutoff_arrays(Cutoff cutoff, const VectorXd& x, ArrayXd& xi, ArrayXd& dxi, ArrayXd& d2xi) {
    if (cutoff == Cutoff::one_minus_x_squared) {
        xi = 1.0 - x.array().square();
        dxi = -2.0 * x.array();
        d2xi = ArrayXd::Constant(x.size(), -2.0);
    } else {
        xi = ArrayXd::Ones(x.size());
        dxi = ArrayXd::Zero(x.size());
        d2xi = ArrayXd::Zero(x.size());
    }
}

Forward run_forward(const NetworkParams& p, const NetworkSpec& spec, const VectorXd& x) {
    Forward fw;
    cutoff_arrays(spec.cutoff, x, fw.xi, fw.dxi, fw.d2xi);

    const ArrayXd kw = p.kappa.array() * p.w_spatial.array();
    const ArrayXd kb = p.kappa.array() * p.b_spatial.array();
    fw.slope = kw;
    MatrixXd a = x * kw.matrix().transpose();
    a.rowwise() += kb.matrix().transpose();
    fw.a = a.array();

    ArrayXXd g, g1, g2, g3;
    if (spec.fourier)
        sin_derivs(fw.a, g, g1, g2, g3);
    else
        act_derivs(spec.activation, fw.a, g, g1, g2, g3);

    const int layers = spec.depth;
    fw.z.resize(layers);
    fw.dz.resize(layers);
    fw.d2z.resize(layers);
    fw.z[0] = g;
    fw.dz[0] = g1.rowwise() * kw.transpose();
    fw.d2z[0] = g2.rowwise() * kw.square().transpose();

    fw.y.resize(layers - 1);
    fw.dy.resize(layers - 1);
    fw.d2y.resize(layers - 1);
    for (int h = 0; h + 1 < layers; ++h) {
        const MatrixXd& w = p.hidden_w[h];
        MatrixXd y = fw.z[h].matrix() * w.transpose();
        y.rowwise() += p.hidden_b[h].transpose();
        fw.y[h] = y.array();
        fw.dy[h] = (fw.dz[h].matrix() * w.transpose()).array();
        fw.d2y[h] = (fw.d2z[h].matrix() * w.transpose()).array();

        ArrayXXd s0, s1, s2, s3;
        act_derivs(spec.activation, fw.y[h], s0, s1, s2, s3);
        fw.z[h + 1] = s0;
        fw.dz[h + 1] = s1 * fw.dy[h];
        fw.d2z[h + 1] = s2 * fw.dy[h].square() + s1 * fw.d2y[h];
    }
    return fw;
}

}  // namespace

void NetworkSpec::validate() const {
    if (input_dim != 1) throw ConfigError("NetworkSpec: only 1D inputs are supported");
    if (width < 1) throw ConfigError("NetworkSpec: width must be positive");
    if (depth < 1) throw ConfigError("NetworkSpec: depth must be positive");
}

int hidden_parameter_count(const NetworkSpec& spec) {
    const int n = spec.width;
    return 2 * n + (spec.depth - 1) * (n * n + n);
}

NetworkParams build_network(const NetworkSpec& spec, const InitPlan& init, std::uint64_t seed) {
    spec.validate();
    const int n = spec.width;
    NetworkParams p;
    if (spec.fourier) {
        if (!(init.omega_min > 0.0) || !(init.omega_max >= init.omega_min))
            throw ConfigError("build_network: invalid frequency band");
        p.kappa = sample_frequencies(init.omega_min, init.omega_max, n, rng::derive(seed, 0x6b61ULL));
    } else {
        p.kappa = Eigen::VectorXd::Ones(n);
    }

    rng::Stream spatial(rng::derive(seed, 0x77ULL));
    p.w_spatial.resize(n);
    p.b_spatial.resize(n);
    constexpr double pi = std::numbers::pi;
    for (int j = 0; j < n; ++j) p.w_spatial[j] = spatial.uniform(-1.0, 1.0);
    for (int j = 0; j < n; ++j) p.b_spatial[j] = spatial.uniform(-pi, pi);

    const double limit = spec.activation == Activation::relu_cubed
                             ? std::sqrt(6.0 / n)            // He uniform
                             : std::sqrt(6.0 / (n + n));     // Glorot uniform
    p.hidden_w.resize(spec.depth - 1);
    p.hidden_b.resize(spec.depth - 1);
    for (int h = 0; h + 1 < spec.depth; ++h) {
        rng::Stream layer(rng::derive(seed, 0x4c61ULL, static_cast<std::uint64_t>(h)));
        p.hidden_w[h].resize(n, n);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c) p.hidden_w[h](r, c) = layer.uniform(-limit, limit);
        p.hidden_b[h] = Eigen::VectorXd::Zero(n);
    }
    p.w_out = Eigen::VectorXd::Zero(n);
    return p;
}

EvalBatch eval(const NetworkParams& params, const NetworkSpec& spec, const Eigen::VectorXd& points, int order) {
    if (order < 0 || order > 2) throw ContractError("eval: unsupported derivative order");
    spec.validate();
    check_shapes(params, spec);

    const Forward fw = run_forward(params, spec, points);
    const ArrayXXd& zl = fw.z[spec.depth - 1];
    const ArrayXXd& dzl = fw.dz[spec.depth - 1];
    const ArrayXXd& d2zl = fw.d2z[spec.depth - 1];

    EvalBatch batch;
    batch.points = points;
    batch.phi = (zl.colwise() * fw.xi).matrix();
    batch.out = batch.phi * params.w_out;
    if (order >= 1) {
        batch.dphi = (dzl.colwise() * fw.xi + zl.colwise() * fw.dxi).matrix();
        batch.dout = batch.dphi * params.w_out;
    }
    if (order >= 2) {
        batch.d2phi = (d2zl.colwise() * fw.xi + 2.0 * (dzl.colwise() * fw.dxi) + zl.colwise() * fw.d2xi).matrix();
        batch.d2out = batch.d2phi * params.w_out;
    }
    return batch;
}

ParamGrad ParamGrad::zeros_like(const NetworkParams& params, bool with_w_out) {
    ParamGrad g;
    g.w_spatial = Eigen::VectorXd::Zero(params.w_spatial.size());
    g.b_spatial = Eigen::VectorXd::Zero(params.b_spatial.size());
    g.hidden_w.reserve(params.hidden_w.size());
    g.hidden_b.reserve(params.hidden_b.size());
    for (const auto& w : params.hidden_w) g.hidden_w.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
    for (const auto& b : params.hidden_b) g.hidden_b.push_back(Eigen::VectorXd::Zero(b.size()));
    if (with_w_out) g.w_out = Eigen::VectorXd::Zero(params.w_out.size());
    return g;
}

Eigen::VectorXd ParamGrad::flatten() const {
    Eigen::Index total = w_spatial.size() + b_spatial.size() + w_out.size();
    for (const auto& w : hidden_w) total += w.size();
    for (const auto& b : hidden_b) total += b.size();
    Eigen::VectorXd flat(total);
    Eigen::Index at = 0;
    flat.segment(at, w_spatial.size()) = w_spatial;
    at += w_spatial.size();
    flat.segment(at, b_spatial.size()) = b_spatial;
    at += b_spatial.size();
    for (std::size_t h = 0; h < hidden_w.size(); ++h) {
        for (Eigen::Index r = 0; r < hidden_w[h].rows(); ++r)
            for (Eigen::Index c = 0; c < hidden_w[h].cols(); ++c) flat[at++] = hidden_w[h](r, c);
        flat.segment(at, hidden_b[h].size()) = hidden_b[h];
        at += hidden_b[h].size();
    }
    if (w_out.size() > 0) {
        flat.segment(at, w_out.size()) = w_out;
        at += w_out.size();
    }
    return flat;
}

bool ParamGrad::all_finite() const {
    if (!w_spatial.allFinite() || !b_spatial.allFinite()) return false;
    for (const auto& w : hidden_w)
        if (!w.allFinite()) return false;
    for (const auto& b : hidden_b)
        if (!b.allFinite()) return false;
    if (w_out.size() > 0 && !w_out.allFinite()) return false;
    return true;
}

Eigen::VectorXd flatten_hidden(const NetworkParams& params) {
    ParamGrad view;
    view.w_spatial = params.w_spatial;
    view.b_spatial = params.b_spatial;
    view.hidden_w = params.hidden_w;
    view.hidden_b = params.hidden_b;
    return view.flatten();
}

void assign_hidden(NetworkParams& params, const Eigen::VectorXd& flat) {
    Eigen::Index at = 0;
    params.w_spatial = flat.segment(at, params.w_spatial.size());
    at += params.w_spatial.size();
    params.b_spatial = flat.segment(at, params.b_spatial.size());
    at += params.b_spatial.size();
    for (std::size_t h = 0; h < params.hidden_w.size(); ++h) {
        for (Eigen::Index r = 0; r < params.hidden_w[h].rows(); ++r)
            for (Eigen::Index c = 0; c < params.hidden_w[h].cols(); ++c) params.hidden_w[h](r, c) = flat[at++];
        params.hidden_b[h] = flat.segment(at, params.hidden_b[h].size());
        at += params.hidden_b[h].size();
    }
    if (at != flat.size()) throw ContractError("assign_hidden: flat vector length mismatch");
}

SensitivityBatch param_sensitivities(const NetworkParams& params, const NetworkSpec& spec,
                                     const Eigen::VectorXd& points, const ParamRef& wrt) {
    spec.validate();
    check_shapes(params, spec);
    if (wrt.kind == ParamRef::Kind::output_weight)
        throw ContractError("param_sensitivities: output weights are owned by the LS step");

    const int n = spec.width;
    const Eigen::Index np = points.size();
    const Forward fw = run_forward(params, spec, points);

    ArrayXXd tz = ArrayXXd::Zero(np, n), tdz = ArrayXXd::Zero(np, n), td2z = ArrayXXd::Zero(np, n);

    if (wrt.kind == ParamRef::Kind::w_spatial || wrt.kind == ParamRef::Kind::b_spatial) {
        const int j = wrt.unit;
        if (j < 0 || j >= n) throw ContractError("param_sensitivities: unit index out of range");
        const double kappa = params.kappa[j];
        const double s = fw.slope[j];
        ArrayXd ta(np);
        double ts = 0.0;
        if (wrt.kind == ParamRef::Kind::w_spatial) {
            ta = kappa * points.array();
            ts = kappa;
        } else {
            ta = ArrayXd::Constant(np, kappa);
        }
        ArrayXXd g, g1, g2, g3;
        if (spec.fourier)
            sin_derivs(fw.a, g, g1, g2, g3);
        else
            act_derivs(spec.activation, fw.a, g, g1, g2, g3);
        tz.col(j) = g1.col(j) * ta;
        tdz.col(j) = g2.col(j) * ta * s + g1.col(j) * ts;
        td2z.col(j) = g3.col(j) * ta * s * s + g2.col(j) * (2.0 * s * ts);
    } else {
        const int h = wrt.layer;
        if (h < 0 || h >= spec.depth - 1) throw ContractError("param_sensitivities: hidden layer out of range");
        if (wrt.row < 0 || wrt.row >= n || wrt.col < 0 || wrt.col >= n)
            throw ContractError("param_sensitivities: hidden index out of range");
    }

    for (int h = 0; h + 1 < spec.depth; ++h) {
        const MatrixXd& w = params.hidden_w[h];
        ArrayXXd ty = (tz.matrix() * w.transpose()).array();
        ArrayXXd tdy = (tdz.matrix() * w.transpose()).array();
        ArrayXXd td2y = (td2z.matrix() * w.transpose()).array();
        if (wrt.kind == ParamRef::Kind::hidden_weight && wrt.layer == h) {
            ty.col(wrt.row) += fw.z[h].col(wrt.col);
            tdy.col(wrt.row) += fw.dz[h].col(wrt.col);
            td2y.col(wrt.row) += fw.d2z[h].col(wrt.col);
        }
        if (wrt.kind == ParamRef::Kind::hidden_bias && wrt.layer == h) ty.col(wrt.row) += 1.0;

        ArrayXXd s0, s1, s2, s3;
        act_derivs(spec.activation, fw.y[h], s0, s1, s2, s3);
        const ArrayXXd& dy = fw.dy[h];
        const ArrayXXd& d2y = fw.d2y[h];
        tz = s1 * ty;
        tdz = s2 * ty * dy + s1 * tdy;
        td2z = s3 * ty * dy.square() + s2 * (2.0 * dy * tdy) + s2 * ty * d2y + s1 * td2y;
    }

    SensitivityBatch out;
    out.phi = (tz.colwise() * fw.xi).matrix();
    out.dphi = (tdz.colwise() * fw.xi + tz.colwise() * fw.dxi).matrix();
    out.d2phi = (td2z.colwise() * fw.xi + 2.0 * (tdz.colwise() * fw.dxi) + tz.colwise() * fw.d2xi).matrix();
    return out;
}

ParamGrad weighted_output_gradient(const NetworkParams& params, const NetworkSpec& spec,
                                   const Eigen::VectorXd& points, const Eigen::VectorXd& a,
                                   const Eigen::VectorXd& b, const Eigen::VectorXd& c, bool with_w_out) {
    spec.validate();
    check_shapes(params, spec);
    if (a.size() != points.size() || b.size() != points.size() || c.size() != points.size())
        throw ContractError("weighted_output_gradient: cotangent lengths do not match points");

    const Forward fw = run_forward(params, spec, points);
    ParamGrad grad = ParamGrad::zeros_like(params, with_w_out);

    // Cotangents on (z_L, z_L', z_L'') from the cutoff product rule.
    const ArrayXd t1 = a.array() * fw.xi + b.array() * fw.dxi + c.array() * fw.d2xi;
    const ArrayXd t2 = b.array() * fw.xi + 2.0 * (c.array() * fw.dxi);
    const ArrayXd t3 = c.array() * fw.xi;
    ArrayXXd gz = (t1.matrix() * params.w_out.transpose()).array();
    ArrayXXd gdz = (t2.matrix() * params.w_out.transpose()).array();
    ArrayXXd gd2z = (t3.matrix() * params.w_out.transpose()).array();

    if (with_w_out) {
        const int last = spec.depth - 1;
        const ArrayXXd& zl = fw.z[last];
        const ArrayXXd& dzl = fw.dz[last];
        const ArrayXXd& d2zl = fw.d2z[last];
        const MatrixXd phi = (zl.colwise() * fw.xi).matrix();
        const MatrixXd dphi = (dzl.colwise() * fw.xi + zl.colwise() * fw.dxi).matrix();
        const MatrixXd d2phi =
            (d2zl.colwise() * fw.xi + 2.0 * (dzl.colwise() * fw.dxi) + zl.colwise() * fw.d2xi).matrix();
        grad.w_out = phi.transpose() * a + dphi.transpose() * b + d2phi.transpose() * c;
    }

    for (int h = spec.depth - 2; h >= 0; --h) {
        ArrayXXd s0, s1, s2, s3;
        act_derivs(spec.activation, fw.y[h], s0, s1, s2, s3);
        const ArrayXXd& dy = fw.dy[h];
        const ArrayXXd& d2y = fw.d2y[h];
        const ArrayXXd pm = gz * s1 + gdz * s2 * dy + gd2z * (s3 * dy.square() + s2 * d2y);
        const ArrayXXd pm1 = gdz * s1 + gd2z * s2 * (2.0 * dy);
        const ArrayXXd pm2 = gd2z * s1;

        grad.hidden_w[h] = pm.matrix().transpose() * fw.z[h].matrix() + pm1.matrix().transpose() * fw.dz[h].matrix() +
                           pm2.matrix().transpose() * fw.d2z[h].matrix();
        grad.hidden_b[h] = pm.matrix().colwise().sum().transpose();

        const MatrixXd& w = params.hidden_w[h];
        gz = (pm.matrix() * w).array();
        gdz = (pm1.matrix() * w).array();
        gd2z = (pm2.matrix() * w).array();
    }

    ArrayXXd g, g1, g2, g3;
    if (spec.fourier)
        sin_derivs(fw.a, g, g1, g2, g3);
    else
        act_derivs(spec.activation, fw.a, g, g1, g2, g3);

    const ArrayXd s = fw.slope;
    // dG/da and the direct slope contribution, unit by unit.
    const ArrayXXd ga = gz * g1 + (gdz * g2).rowwise() * s.transpose() + (gd2z * g3).rowwise() * s.square().transpose();
    const ArrayXd gs =
        (gdz * g1).colwise().sum().transpose() + 2.0 * ((gd2z * g2).colwise().sum().transpose() * s);
    const ArrayXd ga_sum = ga.colwise().sum().transpose();
    const ArrayXd ga_xsum = (ga.colwise() * points.array()).colwise().sum().transpose();

    grad.w_spatial = (params.kappa.array() * (ga_xsum + gs)).matrix();
    grad.b_spatial = (params.kappa.array() * ga_sum).matrix();
    return grad;
}

}  // namespace runn
