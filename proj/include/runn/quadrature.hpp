#pragma once

#include <Eigen/Core>
#include <functional>
#include <optional>
#include <vector>

#include "runn/common.hpp"

namespace runn {

/// Uniform partition of an interval into K equal subintervals.
struct Partition {
    Interval domain;
    int K = 1;

    double width() const { return domain.length() / K; }
};

enum class RuleTag { vanilla, p3 };

inline const char* to_string(RuleTag r) { return r == RuleTag::vanilla ? "vanilla" : "p3"; }

/// One stochastic integration draw: nodes with signed weights summing to
/// the domain measure.
struct QuadratureSample {
    Eigen::VectorXd nodes;
    Eigen::VectorXd weights;
    RuleTag rule = RuleTag::vanilla;
    std::optional<Partition> partition;
    std::uint64_t seed = 0;
};

/// N i.i.d. uniform nodes, equal weights |domain|/N.
QuadratureSample vanilla_sample(const Interval& domain, int n_points, std::uint64_t seed);

/// Stratified three-node rule, exact on cubics for every draw. Per element
/// of width h centered at c: draw u ~ U(0,1), x1 = u^(1/3), nodes
/// {c - (h/2)x1, c, c + (h/2)x1} with weights
/// {(h/2)/(3x1^2), (h/2)(2 - 2/(3x1^2)), (h/2)/(3x1^2)}.
/// The middle weight goes negative when x1 < 1/sqrt(3); weights are signed.
QuadratureSample p3_sample(const Partition& partition, std::uint64_t seed);

/// Weighted sum of integrand values aligned with the sample nodes.
double estimate(const QuadratureSample& sample, const Eigen::VectorXd& integrand_values);

struct VarianceRow {
    int K = 0;
    int n_points = 0;
    double variance = 0.0;
};

struct VarianceProbeResult {
    RuleTag rule = RuleTag::p3;
    std::vector<VarianceRow> rows;
    /// Least-squares slope of log(variance) vs log(n_points); absent when
    /// some variance is zero (degenerate integrand).
    std::optional<double> loglog_slope;
};

/// Empirical estimator variance across `reps` independent draws for each K.
/// For the vanilla rule each K uses 3K nodes so both rules share a budget.
VarianceProbeResult variance_probe(const std::function<double(double)>& integrand, RuleTag rule,
                                   const std::vector<int>& k_list, int reps, std::uint64_t seed,
                                   const Interval& domain = Interval{});

/// Deterministic composite trapezoid rule (diagnostics and dense reporting).
QuadratureSample trapezoid_rule(const Interval& domain, int n_points);

/// Deterministic midpoint rule on a half-cell-offset grid; never places a
/// node on the domain midpoint, which matters for integrands with a jump
/// there.
QuadratureSample midpoint_rule(const Interval& domain, int n_points);

}  // namespace runn
