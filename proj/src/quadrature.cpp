#include "runn/quadrature.hpp"

#include <cmath>

namespace runn {

QuadratureSample vanilla_sample(const Interval& domain, int n_points, std::uint64_t seed) {
    if (n_points < 1) throw ConfigError("vanilla_sample: need at least one point");
    QuadratureSample s;
    s.rule = RuleTag::vanilla;
    s.seed = seed;
    s.nodes.resize(n_points);
    s.weights.setConstant(n_points, domain.length() / n_points);
    rng::Stream stream(rng::derive(seed, 0x7a171c1aULL));
    for (int i = 0; i < n_points; ++i) s.nodes[i] = stream.uniform(domain.a, domain.b);
    return s;
}

QuadratureSample p3_sample(const Partition& partition, std::uint64_t seed) {
    if (partition.K < 1) throw ConfigError("p3_sample: partition needs K >= 1");
    const double h = partition.width();
    QuadratureSample s;
    s.rule = RuleTag::p3;
    s.partition = partition;
    s.seed = seed;
    s.nodes.resize(3 * partition.K);
    s.weights.resize(3 * partition.K);
    for (int i = 0; i < partition.K; ++i) {
        // Independent per-element stream so elements can be drawn in any order.
        rng::Stream stream(rng::derive(seed, 0x9d3u, static_cast<std::uint64_t>(i)));
        double u = stream.uniform01();
        while (u == 0.0) u = stream.uniform01();  // probability-zero guard
        const double x1 = std::cbrt(u);
        const double c = partition.domain.a + (i + 0.5) * h;
        const double side = 0.5 * h / (3.0 * x1 * x1);
        s.nodes[3 * i] = c - 0.5 * h * x1;
        s.nodes[3 * i + 1] = c;
        s.nodes[3 * i + 2] = c + 0.5 * h * x1;
        s.weights[3 * i] = side;
        s.weights[3 * i + 1] = 0.5 * h * (2.0 - 2.0 / (3.0 * x1 * x1));
        s.weights[3 * i + 2] = side;
    }
    return s;
}

double estimate(const QuadratureSample& sample, const Eigen::VectorXd& integrand_values) {
    if (integrand_values.size() != sample.nodes.size())
        throw ContractError("estimate: integrand values do not align with sample nodes");
    return sample.weights.dot(integrand_values);
}

VarianceProbeResult variance_probe(const std::function<double(double)>& integrand, RuleTag rule,
                                   const std::vector<int>& k_list, int reps, std::uint64_t seed,
                                   const Interval& domain) {
    if (reps < 100) throw ConfigError("variance_probe: need at least 100 repetitions");
    VarianceProbeResult result;
    result.rule = rule;
    bool degenerate = false;
    for (int K : k_list) {
        const int n_points = 3 * K;
        double mean = 0.0;
        std::vector<double> draws(reps);
        for (int r = 0; r < reps; ++r) {
            const std::uint64_t draw_seed = rng::derive(seed, static_cast<std::uint64_t>(K), static_cast<std::uint64_t>(r));
            QuadratureSample s = (rule == RuleTag::p3) ? p3_sample(Partition{domain, K}, draw_seed)
                                                       : vanilla_sample(domain, n_points, draw_seed);
            Eigen::VectorXd values = s.nodes.unaryExpr([&](double x) { return integrand(x); });
            draws[r] = estimate(s, values);
            mean += draws[r];
        }
        mean /= reps;
        double var = 0.0;
        for (double d : draws) var += (d - mean) * (d - mean);
        var /= (reps - 1);
        if (var <= 0.0) degenerate = true;
        result.rows.push_back({K, n_points, var});
    }
    if (!degenerate && result.rows.size() >= 2) {
        // least squares fit of log(var) on log(n_points)
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        const double n = static_cast<double>(result.rows.size());
        for (const auto& row : result.rows) {
            const double x = std::log(static_cast<double>(row.n_points));
            const double y = std::log(row.variance);
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        result.loglog_slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    }
    return result;
}

QuadratureSample trapezoid_rule(const Interval& domain, int n_points) {
    if (n_points < 2) throw ConfigError("trapezoid_rule: need at least two points");
    QuadratureSample s;
    s.rule = RuleTag::vanilla;
    s.seed = 0;
    const double h = domain.length() / (n_points - 1);
    s.nodes.resize(n_points);
    s.weights.setConstant(n_points, h);
    for (int i = 0; i < n_points; ++i) s.nodes[i] = domain.a + i * h;
    s.weights[0] = 0.5 * h;
    s.weights[n_points - 1] = 0.5 * h;
    return s;
}

QuadratureSample midpoint_rule(const Interval& domain, int n_points) {
    if (n_points < 1) throw ConfigError("midpoint_rule: need at least one point");
    QuadratureSample s;
    s.rule = RuleTag::vanilla;
    s.seed = 0;
    const double h = domain.length() / n_points;
    s.nodes.resize(n_points);
    s.weights.setConstant(n_points, h);
    for (int i = 0; i < n_points; ++i) s.nodes[i] = domain.a + (i + 0.5) * h;
    return s;
}

}  // namespace runn
