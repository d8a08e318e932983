#include "runn/linlab.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>

namespace runn::linlab {

LinearProblem make_problem(const Eigen::MatrixXd& B, const Eigen::VectorXd& f) {
    if (B.rows() != B.cols() || B.rows() != f.size()) throw ConfigError("make_problem: B must be square and match f");
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(B);
    const double sigma_max = svd.singularValues()(0);
    const double sigma_min = svd.singularValues()(svd.singularValues().size() - 1);
    if (!(sigma_min > 0.0) || !std::isfinite(sigma_max / sigma_min))
        throw NumericError("make_problem: B is singular");
    LinearProblem p;
    p.B = B;
    p.f = f;
    p.norm_B = sigma_max;
    p.inv_norm_B = 1.0 / sigma_min;
    p.u_star = B.colPivHouseholderQr().solve(f);
    if ((B * p.u_star - f).norm() > 1e-10 * std::max(1.0, f.norm()))
        throw NumericError("make_problem: solve for u_star failed");
    return p;
}

LinearProblem random_problem(int m, std::uint64_t seed) {
    if (m < 1) throw ConfigError("random_problem: need a positive dimension");
    rng::Stream stream(rng::derive(seed, 0x11abULL));
    const auto random_orthogonal = [&]() {
        Eigen::MatrixXd g(m, m);
        for (int r = 0; r < m; ++r)
            for (int c = 0; c < m; ++c) g(r, c) = stream.normal();
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
        return Eigen::MatrixXd(qr.householderQ());
    };
    const Eigen::MatrixXd q1 = random_orthogonal();
    const Eigen::MatrixXd q2 = random_orthogonal();
    Eigen::VectorXd sigma(m);
    for (int i = 0; i < m; ++i) sigma[i] = stream.uniform(0.4, 2.0);
    Eigen::VectorXd f(m);
    for (int i = 0; i < m; ++i) f[i] = stream.uniform(-1.0, 1.0);
    return make_problem(q1 * sigma.asDiagonal() * q2.transpose(), f);
}

RhoChoice optimal_rho(const LinearProblem& problem) {
    const double hi = problem.norm_B * problem.norm_B;
    const double lo = 1.0 / (problem.inv_norm_B * problem.inv_norm_B);
    RhoChoice r;
    r.rho_star = 2.0 / (hi + lo);
    r.rate = (hi - lo) / (hi + lo);
    return r;
}

double contraction_norm(const LinearProblem& problem, double rho) {
    const double hi = problem.norm_B * problem.norm_B;
    const double lo = 1.0 / (problem.inv_norm_B * problem.inv_norm_B);
    return std::max(std::abs(1.0 - rho * hi), std::abs(1.0 - rho * lo));
}

std::vector<double> run_exact_uzawa(const LinearProblem& problem, double rho, int iters,
                                    const Eigen::VectorXd& u0) {
    if (iters < 1) throw ConfigError("run_exact_uzawa: need at least one iteration");
    Eigen::VectorXd u = u0;
    std::vector<double> errors;
    errors.reserve(iters + 1);
    errors.push_back((problem.u_star - u).norm());
    for (int k = 0; k < iters; ++k) {
        const Eigen::VectorXd r = problem.f - problem.B * u;
        u += rho * (problem.B.transpose() * r);
        errors.push_back((problem.u_star - u).norm());
    }
    return errors;
}

double tolerance_bound(const LinearProblem& problem, double rho, int approach) {
    if (approach != 1 && approach != 2) throw ConfigError("tolerance_bound: approach must be 1 or 2");
    const double hi = problem.norm_B * problem.norm_B;
    if (!(rho > 0.0) || !(rho < 2.0 / hi)) throw ConfigError("tolerance_bound: rho outside the contraction regime");
    const double c = (1.0 - contraction_norm(problem, rho)) / (rho * hi);
    return approach == 1 ? std::sqrt(1.0 + c) - 1.0 : std::cbrt(1.0 + c) - 1.0;
}

namespace {

Eigen::VectorXd random_unit(rng::Stream& stream, Eigen::Index m) {
    Eigen::VectorXd d(m);
    double norm = 0.0;
    do {
        for (Eigen::Index i = 0; i < m; ++i) d[i] = stream.normal();
        norm = d.norm();
    } while (!(norm > 0.0));
    return d / norm;
}

Eigen::VectorXd unit_or(const Eigen::VectorXd& v, const Eigen::VectorXd& fallback) {
    const double n = v.norm();
    return n > 0.0 ? Eigen::VectorXd(v / n) : fallback;
}

}  // namespace

InexactRun run_inexact_uzawa(const LinearProblem& problem, double rho, const PerturbationModel& perturb,
                             int approach, int iters, std::uint64_t seed, const Eigen::VectorXd& u0) {
    if (approach != 1 && approach != 2) throw ConfigError("run_inexact_uzawa: approach must be 1 or 2");
    if (iters < 1) throw ConfigError("run_inexact_uzawa: need at least one iteration");
    if (perturb.epsilon < 0.0) throw ConfigError("run_inexact_uzawa: negative perturbation magnitude");

    const double eps = perturb.epsilon;
    const Eigen::Index m = problem.B.rows();
    rng::Stream stream(rng::derive(seed, 0x1e8aULL));

    InexactRun run;
    run.bound_factor = contraction_norm(problem, rho) +
                       rho * problem.norm_B * problem.norm_B *
                           (approach == 1 ? eps * eps + 2.0 * eps : eps * eps * eps + 3.0 * eps * eps + 3.0 * eps);

    Eigen::VectorXd u = u0;
    run.error_norms.push_back((problem.u_star - u).norm());
    for (int k = 0; k < iters; ++k) {
        const Eigen::VectorXd e = u - problem.u_star;
        if (e.norm() == 0.0) break;

        const Eigen::VectorXd r = problem.f - problem.B * u;
        // greedy worst case: stack every perturbation onto the direction the
        // exact step already points in
        const Eigen::VectorXd base = e - rho * (problem.B.transpose() * (problem.B * e));
        Eigen::VectorXd d_r, d_delta;
        if (perturb.mode == PerturbationModel::Mode::worst_case) {
            const Eigen::VectorXd base_unit = unit_or(base, random_unit(stream, m));
            d_r = unit_or(problem.B * base_unit, random_unit(stream, m));
            const Eigen::VectorXd mid = base + rho * eps * r.norm() * (problem.B.transpose() * d_r);
            d_delta = unit_or(mid, base_unit);
        } else {
            d_r = random_unit(stream, m);
            d_delta = random_unit(stream, m);
        }

        const Eigen::VectorXd r_eps = r + eps * r.norm() * d_r;
        const Eigen::VectorXd delta_target = problem.B.transpose() * r_eps;
        const Eigen::VectorXd delta_eps = delta_target + eps * delta_target.norm() * d_delta;

        Eigen::VectorXd u_next = u + rho * delta_eps;
        if (approach == 2) {
            Eigen::VectorXd d_u;
            if (perturb.mode == PerturbationModel::Mode::worst_case)
                d_u = unit_or(u_next - problem.u_star, random_unit(stream, m));
            else
                d_u = random_unit(stream, m);
            u_next += eps * (rho * delta_eps).norm() * d_u;
        }
        u = u_next;

        const double err = (problem.u_star - u).norm();
        run.step_factors.push_back(err / run.error_norms.back());
        run.error_norms.push_back(err);
    }
    return run;
}

}  // namespace runn::linlab
