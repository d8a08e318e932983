#include "runn/formulations.hpp"

#include <cmath>

namespace runn {

void ZeroField::eval(const Eigen::VectorXd& pts, int order, Eigen::VectorXd& v, Eigen::VectorXd& d1,
                     Eigen::VectorXd& d2) const {
    v = Eigen::VectorXd::Zero(pts.size());
    if (order >= 1) d1 = Eigen::VectorXd::Zero(pts.size());
    if (order >= 2) d2 = Eigen::VectorXd::Zero(pts.size());
}

void AnalyticField::eval(const Eigen::VectorXd& pts, int order, Eigen::VectorXd& v, Eigen::VectorXd& d1,
                         Eigen::VectorXd& d2) const {
    if (order > max_order()) throw ContractError("AnalyticField: derivative not available");
    v = pts.unaryExpr([&](double x) { return u_(x); });
    if (order >= 1) d1 = pts.unaryExpr([&](double x) { return du_(x); });
    if (order >= 2) d2 = pts.unaryExpr([&](double x) { return d2u_(x); });
}

void NetworkField::eval(const Eigen::VectorXd& pts, int order, Eigen::VectorXd& v, Eigen::VectorXd& d1,
                        Eigen::VectorXd& d2) const {
    const EvalBatch batch = runn::eval(params_, spec_, pts, order);
    v = batch.out;
    if (order >= 1) d1 = batch.dout;
    if (order >= 2) d2 = batch.d2out;
}

void NegSecondDerivativeField::eval(const Eigen::VectorXd& pts, int order, Eigen::VectorXd& v, Eigen::VectorXd& d1,
                                    Eigen::VectorXd& d2) const {
    if (order > 0) throw ContractError("NegSecondDerivativeField: only values are defined");
    const EvalBatch batch = runn::eval(params_, spec_, pts, 2);
    v = -batch.d2out;
    (void)d1;
    (void)d2;
}

void SumField::add(std::shared_ptr<const Field> part, double scale) {
    parts_.emplace_back(std::move(part), scale);
}

int SumField::max_order() const {
    int order = 2;
    for (const auto& [part, scale] : parts_) order = std::min(order, part->max_order());
    return order;
}

void SumField::eval(const Eigen::VectorXd& pts, int order, Eigen::VectorXd& v, Eigen::VectorXd& d1,
                    Eigen::VectorXd& d2) const {
    v = Eigen::VectorXd::Zero(pts.size());
    if (order >= 1) d1 = Eigen::VectorXd::Zero(pts.size());
    if (order >= 2) d2 = Eigen::VectorXd::Zero(pts.size());
    Eigen::VectorXd pv, pd1, pd2;
    for (const auto& [part, scale] : parts_) {
        part->eval(pts, order, pv, pd1, pd2);
        v += scale * pv;
        if (order >= 1) d1 += scale * pd1;
        if (order >= 2) d2 += scale * pd2;
    }
}

void ProblemSpec::validate() const {
    if (dirac_prime && formulation != Formulation::ultraweak)
        throw ConfigError("ProblemSpec: the dirac_prime source requires the ultra-weak formulation");
    if (formulation == Formulation::ultraweak && !dirac_prime)
        throw ConfigError("ProblemSpec: the ultra-weak formulation is driven by the dirac_prime source");
    if (!dirac_prime && !source) throw ConfigError("ProblemSpec: analytic source is required");
}

namespace {

int required_order(Formulation f) { return f == Formulation::weak ? 1 : 2; }

void check_generator_order(const ProblemSpec& problem, const EvalBatch& generators) {
    const int order = required_order(problem.formulation);
    if (generators.dphi.size() == 0 || (order >= 2 && generators.d2phi.size() == 0))
        throw ContractError("assemble_quadratic: generators lack the derivative order of the formulation");
}

Eigen::MatrixXd weighted_gram(const Eigen::MatrixXd& g, const Eigen::VectorXd& weights) {
    const Eigen::MatrixXd weighted = g.array().colwise() * weights.array();
    Eigen::MatrixXd h = g.transpose() * weighted;
    h = 0.5 * (h + h.transpose()).eval();  // exact symmetry
    return h;
}

}  // namespace

QuadraticForm assemble_quadratic(const ProblemSpec& problem, int phase_k, const Field& u_prev,
                                 const EvalBatch& generators, const Eigen::VectorXd& weights,
                                 const EvalBatch* generators_at_zero) {
    problem.validate();
    if (phase_k < 0) throw ContractError("assemble_quadratic: negative phase index");
    if (weights.size() != generators.points.size())
        throw ContractError("assemble_quadratic: weights do not align with generator points");
    check_generator_order(problem, generators);

    const Eigen::VectorXd& x = generators.points;
    QuadraticForm qf;
    qf.q = 0.0;

    Eigen::VectorXd uv, ud1, ud2;
    switch (problem.formulation) {
        case Formulation::weak: {
            qf.H = weighted_gram(generators.dphi, weights);
            u_prev.eval(x, 1, uv, ud1, ud2);
            const Eigen::VectorXd fvals = x.unaryExpr([&](double t) { return problem.source(t); });
            qf.f = generators.phi.transpose() * (weights.array() * fvals.array()).matrix() -
                   generators.dphi.transpose() * (weights.array() * ud1.array()).matrix();
            break;
        }
        case Formulation::ultraweak: {
            if (generators_at_zero == nullptr || generators_at_zero->dphi.size() == 0)
                throw ContractError("assemble_quadratic: ultra-weak assembly needs generators evaluated at 0");
            qf.H = weighted_gram(generators.d2phi, weights);
            u_prev.eval(x, 0, uv, ud1, ud2);
            qf.f = generators.d2phi.transpose() * (weights.array() * uv.array()).matrix() -
                   generators_at_zero->dphi.row(0).transpose();
            break;
        }
        case Formulation::strong: {
            qf.H = weighted_gram(generators.d2phi, weights);
            u_prev.eval(x, 2, uv, ud1, ud2);
            const Eigen::VectorXd fvals = x.unaryExpr([&](double t) { return problem.source(t); });
            const Eigen::VectorXd resid = fvals + ud2;  // f + (u^k)''
            qf.f = generators.d2phi.transpose() * (-(weights.array() * resid.array())).matrix();
            break;
        }
    }
    if (!qf.H.allFinite() || !qf.f.allFinite()) throw NumericError("assemble_quadratic: non-finite assembly");
    return qf;
}

double loss_value(const ProblemSpec& problem, int phase_k, const Field& u_prev, const NetworkParams& candidate,
                  const NetworkSpec& candidate_spec, const QuadratureSample& sample) {
    problem.validate();
    if (phase_k < 0) throw ContractError("loss_value: negative phase index");
    const int order = required_order(problem.formulation);
    const EvalBatch batch = eval(candidate, candidate_spec, sample.nodes, order);
    const Eigen::VectorXd& x = sample.nodes;
    const Eigen::VectorXd& w = sample.weights;

    Eigen::VectorXd uv, ud1, ud2;
    double loss = 0.0;
    switch (problem.formulation) {
        case Formulation::weak: {
            u_prev.eval(x, 1, uv, ud1, ud2);
            const Eigen::ArrayXd f = x.unaryExpr([&](double t) { return problem.source(t); }).array();
            const Eigen::ArrayXd integrand =
                0.5 * batch.dout.array().square() + ud1.array() * batch.dout.array() - f * batch.out.array();
            loss = (w.array() * integrand).sum();
            break;
        }
        case Formulation::ultraweak: {
            u_prev.eval(x, 0, uv, ud1, ud2);
            const Eigen::ArrayXd integrand = 0.5 * batch.d2out.array().square() - uv.array() * batch.d2out.array();
            loss = (w.array() * integrand).sum();
            loss -= duality_pairing_delta_prime(NetworkField(candidate, candidate_spec));  // + r'(0)
            break;
        }
        case Formulation::strong: {
            u_prev.eval(x, 2, uv, ud1, ud2);
            const Eigen::ArrayXd f = x.unaryExpr([&](double t) { return problem.source(t); }).array();
            const Eigen::ArrayXd resid = f + ud2.array();
            const Eigen::ArrayXd integrand = 0.5 * batch.d2out.array().square() + batch.d2out.array() * resid;
            loss = (w.array() * integrand).sum();
            break;
        }
    }
    return loss;
}

double duality_pairing_delta_prime(const Field& candidate) {
    Eigen::VectorXd pts(1), v, d1, d2;
    pts[0] = 0.0;
    candidate.eval(pts, 1, v, d1, d2);
    return -d1[0];
}

void loss_integrand_cotangents(const ProblemSpec& problem, const Field& u_prev, const EvalBatch& candidate,
                               const Eigen::VectorXd& weights, Eigen::VectorXd& a, Eigen::VectorXd& b,
                               Eigen::VectorXd& c) {
    const Eigen::VectorXd& x = candidate.points;
    const Eigen::Index np = x.size();
    a = Eigen::VectorXd::Zero(np);
    b = Eigen::VectorXd::Zero(np);
    c = Eigen::VectorXd::Zero(np);
    Eigen::VectorXd uv, ud1, ud2;
    switch (problem.formulation) {
        case Formulation::weak: {
            u_prev.eval(x, 1, uv, ud1, ud2);
            const Eigen::ArrayXd f = x.unaryExpr([&](double t) { return problem.source(t); }).array();
            a = (-(weights.array() * f)).matrix();
            b = (weights.array() * (candidate.dout.array() + ud1.array())).matrix();
            break;
        }
        case Formulation::ultraweak: {
            u_prev.eval(x, 0, uv, ud1, ud2);
            c = (weights.array() * (candidate.d2out.array() - uv.array())).matrix();
            break;
        }
        case Formulation::strong: {
            u_prev.eval(x, 2, uv, ud1, ud2);
            const Eigen::ArrayXd f = x.unaryExpr([&](double t) { return problem.source(t); }).array();
            c = (weights.array() * (candidate.d2out.array() + f + ud2.array())).matrix();
            break;
        }
    }
}

Eigen::VectorXd strong_residual_grid(const ProblemSpec& problem, const Field& u_state, const Eigen::VectorXd& grid) {
    problem.validate();
    const Eigen::Index m = grid.size();
    if (m < 3) throw ContractError("strong_residual_grid: grid too small");

    Eigen::VectorXd u2(m);
    if (u_state.max_order() >= 2) {
        Eigen::VectorXd v, d1;
        u_state.eval(grid, 2, v, d1, u2);
    } else {
        // second differences of the sampled state; ends copy their neighbor
        const Eigen::VectorXd v = u_state.values(grid);
        const double h = grid[1] - grid[0];
        for (Eigen::Index i = 1; i + 1 < m; ++i) u2[i] = (v[i - 1] - 2.0 * v[i] + v[i + 1]) / (h * h);
        u2[0] = u2[1];
        u2[m - 1] = u2[m - 2];
    }

    Eigen::VectorXd f(m);
    if (problem.dirac_prime) {
        if (m % 2 != 0) throw ContractError("strong_residual_grid: dipole proxy needs an even grid");
        f.setZero();
        const double h = grid[1] - grid[0];
        // unit-strength dipole straddling the domain midpoint
        f[m / 2 - 1] = 1.0 / (h * h);
        f[m / 2] = -1.0 / (h * h);
    } else {
        f = grid.unaryExpr([&](double t) { return problem.source(t); });
    }
    return f + u2;
}

}  // namespace runn
