#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>

#include "runn/linlab.hpp"

using namespace runn;
using namespace runn::linlab;

namespace {

LinearProblem diag_problem(std::initializer_list<double> diag) {
    const int m = static_cast<int>(diag.size());
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(m, m);
    int i = 0;
    for (double d : diag) b(i, i) = d, ++i;
    Eigen::VectorXd f = Eigen::VectorXd::Ones(m);
    return make_problem(b, f);
}

}  // namespace

TEST_CASE("optimal rho closed forms") {
    auto eye = diag_problem({1.0, 1.0, 1.0});
    auto r = optimal_rho(eye);
    CHECK(r.rho_star == doctest::Approx(1.0));
    CHECK(r.rate == doctest::Approx(0.0));

    auto two = diag_problem({1.0, 2.0});
    auto r2 = optimal_rho(two);
    CHECK(r2.rho_star == doctest::Approx(0.4));
    CHECK(r2.rate == doctest::Approx(0.6));
}

TEST_CASE("contraction norm matches the eigensolver oracle") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto problem = random_problem(20, seed);
        const auto choice = optimal_rho(problem);
        Eigen::MatrixXd iter =
            Eigen::MatrixXd::Identity(20, 20) - choice.rho_star * problem.B.transpose() * problem.B;
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(iter);
        CHECK(contraction_norm(problem, choice.rho_star) ==
              doctest::Approx(svd.singularValues()(0)).epsilon(1e-12));
        CHECK(choice.rate == doctest::Approx(svd.singularValues()(0)).epsilon(1e-12));
    }
}

TEST_CASE("exact uzawa single step at the identity") {
    auto eye = diag_problem({1.0, 1.0});
    Eigen::VectorXd u0(2);
    u0 << 5.0, -3.0;
    auto errors = run_exact_uzawa(eye, 1.0, 3, u0);
    CHECK(errors[0] > 0.0);
    CHECK(errors[1] < 1e-14);
}

TEST_CASE("exact uzawa hand iteration") {
    auto two = diag_problem({1.0, 2.0});
    const Eigen::VectorXd u0 = two.u_star - Eigen::VectorXd::Ones(2);  // e0 = (1, 1)
    auto errors = run_exact_uzawa(two, 0.4, 1, u0);
    // e1 = ((1 - 0.4) * 1, (1 - 1.6) * 1) = (0.6, -0.6)
    CHECK(errors[1] == doctest::Approx(std::sqrt(0.72)).epsilon(1e-12));
}

TEST_CASE("exact error sequence equals the matrix-power oracle") {
    auto problem = random_problem(8, 5);
    const auto choice = optimal_rho(problem);
    Eigen::VectorXd u0 = Eigen::VectorXd::Zero(8);
    auto errors = run_exact_uzawa(problem, choice.rho_star, 12, u0);

    const Eigen::MatrixXd iter =
        Eigen::MatrixXd::Identity(8, 8) - choice.rho_star * problem.B.transpose() * problem.B;
    Eigen::VectorXd e = problem.u_star - u0;
    for (int k = 0; k <= 12; ++k) {
        CHECK(errors[k] == doctest::Approx(e.norm()).epsilon(1e-10));
        e = iter * e;
    }
}

TEST_CASE("overshooting rho grows the top mode") {
    auto problem = random_problem(6, 9);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(problem.B, Eigen::ComputeFullV);
    const double rho = 2.0 / (problem.norm_B * problem.norm_B) + 0.1;
    const Eigen::VectorXd u0 = problem.u_star - svd.matrixV().col(0);  // e0 along the top right-singular vector
    auto errors = run_exact_uzawa(problem, rho, 6, u0);
    CHECK(errors[6] > errors[0]);
}

TEST_CASE("tolerance bounds solve their defining equations") {
    auto eye = diag_problem({1.0, 1.0});
    CHECK(tolerance_bound(eye, 1.0, 1) == doctest::Approx(std::sqrt(2.0) - 1.0).epsilon(1e-12));

    for (std::uint64_t seed = 2; seed <= 8; ++seed) {
        auto problem = random_problem(9, seed);
        const double rho = optimal_rho(problem).rho_star;
        const double c =
            (1.0 - contraction_norm(problem, rho)) / (rho * problem.norm_B * problem.norm_B);
        const double e1 = tolerance_bound(problem, rho, 1);
        const double e2 = tolerance_bound(problem, rho, 2);
        CHECK(e1 * e1 + 2.0 * e1 == doctest::Approx(c).epsilon(1e-12));
        CHECK(e2 * e2 * e2 + 3.0 * e2 * e2 + 3.0 * e2 == doctest::Approx(c).epsilon(1e-12));
        CHECK(e2 < e1);  // the projected update pays for its extra perturbation
    }

    // c -> 0+ as rho approaches the regime boundary
    auto problem = random_problem(5, 3);
    const double near = 2.0 / (problem.norm_B * problem.norm_B) * (1.0 - 1e-9);
    CHECK(tolerance_bound(problem, near, 1) < 1e-8);
    CHECK(tolerance_bound(problem, near, 2) < 1e-8);
    CHECK_THROWS_AS(tolerance_bound(problem, 2.0 / (problem.norm_B * problem.norm_B) + 0.01, 1), ConfigError);
}

TEST_CASE("zero perturbation reproduces the exact run") {
    auto problem = random_problem(7, 12);
    const double rho = optimal_rho(problem).rho_star;
    Eigen::VectorXd u0 = Eigen::VectorXd::Zero(7);
    auto exact = run_exact_uzawa(problem, rho, 15, u0);
    PerturbationModel none;
    none.epsilon = 0.0;
    none.mode = PerturbationModel::Mode::worst_case;
    auto inexact = run_inexact_uzawa(problem, rho, none, 1, 15, 3, u0);
    REQUIRE(inexact.error_norms.size() == exact.size());
    for (std::size_t k = 0; k < exact.size(); ++k)
        CHECK(inexact.error_norms[k] == doctest::Approx(exact[k]).epsilon(1e-12));
}

TEST_CASE("half-tolerance worst case still contracts under the proof factor") {
    auto two = diag_problem({1.0, 2.0});
    const double rho = 0.4;
    PerturbationModel p;
    p.epsilon = 0.5 * tolerance_bound(two, rho, 1);
    p.mode = PerturbationModel::Mode::worst_case;
    Eigen::VectorXd u0 = Eigen::VectorXd::Zero(2);
    auto run = run_inexact_uzawa(two, rho, p, 1, 200, 7, u0);
    CHECK(run.error_norms.back() < 1e-8 * run.error_norms.front());
    for (double factor : run.step_factors) CHECK(factor <= run.bound_factor + 1e-10);
}

TEST_CASE("theorem certification across a random ensemble") {
    for (int approach : {1, 2}) {
        for (std::uint64_t pseed = 1; pseed <= 50; ++pseed) {
            auto problem = random_problem(6, pseed);
            const double rho = optimal_rho(problem).rho_star;
            PerturbationModel p;
            p.epsilon = 0.9 * tolerance_bound(problem, rho, approach);
            p.mode = pseed % 2 == 0 ? PerturbationModel::Mode::worst_case : PerturbationModel::Mode::random_sphere;
            Eigen::VectorXd u0 = Eigen::VectorXd::Zero(6);
            auto run = run_inexact_uzawa(problem, rho, p, approach, 200, pseed * 3 + 1, u0);
            CHECK(run.error_norms.back() < 1e-8 * run.error_norms.front());
            for (double factor : run.step_factors) CHECK(factor <= run.bound_factor + 1e-10);
        }
    }
}

TEST_CASE("proposition-1 norm chains along a convergent run") {
    auto problem = random_problem(10, 21);
    const double rho = optimal_rho(problem).rho_star;
    Eigen::VectorXd u = Eigen::VectorXd::Zero(10);
    for (int k = 0; k < 60; ++k) {
        const Eigen::VectorXd e = problem.u_star - u;
        const Eigen::VectorXd r = problem.f - problem.B * u;
        const Eigen::VectorXd delta = problem.B.transpose() * r;
        CHECK(r.norm() <= problem.norm_B * e.norm() + 1e-12);
        CHECK(delta.norm() <= problem.norm_B * problem.norm_B * e.norm() + 1e-12);
        CHECK(e.norm() <= problem.inv_norm_B * problem.inv_norm_B * delta.norm() + 1e-12);
        u += rho * delta;
    }
}

TEST_CASE("rho-optimality over a grid") {
    auto problem = random_problem(8, 30);
    const auto choice = optimal_rho(problem);
    const double limit = 2.0 / (problem.norm_B * problem.norm_B);
    const int cells = 101;

    rng::Stream gen(5);
    Eigen::VectorXd e0(8);
    for (int i = 0; i < 8; ++i) e0[i] = gen.normal();
    const Eigen::VectorXd u0 = problem.u_star - e0;

    double best_rho = 0.0, best_rate = 1e300;
    for (int i = 1; i < cells; ++i) {
        const double rho = limit * i / cells;
        auto errors = run_exact_uzawa(problem, rho, 400, u0);
        const double rate = std::pow(errors[400] / errors[200], 1.0 / 200.0);
        if (rate < best_rate) {
            best_rate = rate;
            best_rho = rho;
        }
    }
    CHECK(std::abs(best_rho - choice.rho_star) <= limit / cells + 1e-12);
    CHECK(best_rate == doctest::Approx(choice.rate).epsilon(1e-2));
}

TEST_CASE("adversarial perturbations beyond the bound can break contraction") {
    auto problem = random_problem(6, 44);
    const double rho = optimal_rho(problem).rho_star;
    const double eps_max = tolerance_bound(problem, rho, 1);

    PerturbationModel p;
    p.epsilon = 3.0 * eps_max;  // proof factor now exceeds one
    p.mode = PerturbationModel::Mode::worst_case;
    Eigen::VectorXd u0 = Eigen::VectorXd::Zero(6);
    auto run = run_inexact_uzawa(problem, rho, p, 1, 60, 9, u0);
    CHECK(run.bound_factor > 1.0);

    double worst = 0.0;
    for (double factor : run.step_factors) worst = std::max(worst, factor);
    CHECK(worst > 1.0);  // non-contractive steps observed
    MESSAGE("sharpness: worst observed factor ", worst, " against bound ", run.bound_factor,
            " (attained fraction ", worst / run.bound_factor, ")");
}

TEST_CASE("problem construction errors") {
    Eigen::MatrixXd singular = Eigen::MatrixXd::Zero(2, 2);
    singular(0, 0) = 1.0;
    CHECK_THROWS_AS(make_problem(singular, Eigen::VectorXd::Ones(2)), NumericError);
    CHECK_THROWS_AS(make_problem(Eigen::MatrixXd::Identity(2, 3), Eigen::VectorXd::Ones(2)), ConfigError);

    // ensemble conditioning stays under the cap
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        auto problem = random_problem(12, seed);
        CHECK(problem.norm_B * problem.inv_norm_B < 50.0);
        CHECK((problem.B * problem.u_star - problem.f).norm() < 1e-10);
    }
}
