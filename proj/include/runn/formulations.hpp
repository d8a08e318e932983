#pragma once

#include <Eigen/Core>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "runn/common.hpp"
#include "runn/diffnet.hpp"
#include "runn/quadrature.hpp"

namespace runn {

/// Evaluation handle for anything that behaves like a function on the
/// domain: a network, an analytic insert, or an accumulated solution.
class Field {
public:
    virtual ~Field() = default;

    /// Highest spatial derivative this field can produce exactly.
    virtual int max_order() const = 0;

    /// Fill v (and d1, d2 up to `order`) at the given points.
    virtual void eval(const Eigen::VectorXd& pts, int order, Eigen::VectorXd& v, Eigen::VectorXd& d1,
                      Eigen::VectorXd& d2) const = 0;

    Eigen::VectorXd values(const Eigen::VectorXd& pts) const {
        Eigen::VectorXd v, d1, d2;
        eval(pts, 0, v, d1, d2);
        return v;
    }
};

class ZeroField final : public Field {
public:
    int max_order() const override { return 2; }
    void eval(const Eigen::VectorXd& pts, int order, Eigen::VectorXd& v, Eigen::VectorXd& d1,
              Eigen::VectorXd& d2) const override;
};

/// Field given by closed-form callables; derivatives may be absent.
class AnalyticField final : public Field {
public:
    using Fn = std::function<double(double)>;
    AnalyticField(Fn u, Fn du = nullptr, Fn d2u = nullptr) : u_(std::move(u)), du_(std::move(du)), d2u_(std::move(d2u)) {}

    int max_order() const override { return d2u_ ? 2 : (du_ ? 1 : 0); }
    void eval(const Eigen::VectorXd& pts, int order, Eigen::VectorXd& v, Eigen::VectorXd& d1,
              Eigen::VectorXd& d2) const override;

private:
    Fn u_, du_, d2u_;
};

/// A trained (or in-training) network as a field.
class NetworkField final : public Field {
public:
    NetworkField(NetworkParams params, NetworkSpec spec) : params_(std::move(params)), spec_(spec) {}

    int max_order() const override { return 2; }
    void eval(const Eigen::VectorXd& pts, int order, Eigen::VectorXd& v, Eigen::VectorXd& d1,
              Eigen::VectorXd& d2) const override;

    const NetworkParams& params() const { return params_; }
    const NetworkSpec& spec() const { return spec_; }

private:
    NetworkParams params_;
    NetworkSpec spec_;
};

/// value(x) = -(net)''(x): the effective trial-space correction carried by
/// an ultra-weak test network. Only values are available; that is all the
/// L2 setting grants.
class NegSecondDerivativeField final : public Field {
public:
    NegSecondDerivativeField(NetworkParams params, NetworkSpec spec)
        : params_(std::move(params)), spec_(spec) {}

    int max_order() const override { return 0; }
    void eval(const Eigen::VectorXd& pts, int order, Eigen::VectorXd& v, Eigen::VectorXd& d1,
              Eigen::VectorXd& d2) const override;

    const NetworkParams& params() const { return params_; }
    const NetworkSpec& spec() const { return spec_; }

private:
    NetworkParams params_;
    NetworkSpec spec_;
};

/// Weighted sum of parts; the accumulated Uzawa solution.
class SumField final : public Field {
public:
    void add(std::shared_ptr<const Field> part, double scale = 1.0);
    int max_order() const override;
    void eval(const Eigen::VectorXd& pts, int order, Eigen::VectorXd& v, Eigen::VectorXd& d1,
              Eigen::VectorXd& d2) const override;
    std::size_t size() const { return parts_.size(); }

private:
    std::vector<std::pair<std::shared_ptr<const Field>, double>> parts_;
};

/// Exact solution descriptor for error reporting.
struct ExactSolution {
    std::function<double(double)> u;
    std::function<double(double)> du;  ///< null when the solution has no derivative in the trial space
    bool continuous = true;
};

/// Model problem -u'' = f on an interval with homogeneous Dirichlet data.
struct ProblemSpec {
    Interval domain{-1.0, 1.0};
    Formulation formulation = Formulation::weak;
    bool dirac_prime = false;                 ///< source is the Dirac-delta derivative at the midpoint
    std::function<double(double)> source;     ///< analytic f, unused under dirac_prime
    std::optional<ExactSolution> exact;

    void validate() const;
};

/// Quadratic expansion of a loss in the output weights:
/// loss(w) = 0.5 w'Hw - f'w + q.
struct QuadraticForm {
    Eigen::MatrixXd H;
    Eigen::VectorXd f;
    double q = 0.0;
};

/// Assemble (H, f, q) for the phase-k correction loss over one quadrature
/// draw. Generators must carry derivatives up to the formulation's order
/// (weak: 1, strong/ultra-weak: 2). For the ultra-weak duality term the
/// generators evaluated at x = 0 are required; it enters f exactly once,
/// outside the quadrature sum.
QuadraticForm assemble_quadratic(const ProblemSpec& problem, int phase_k, const Field& u_prev,
                                 const EvalBatch& generators, const Eigen::VectorXd& weights,
                                 const EvalBatch* generators_at_zero = nullptr);

/// Discretized loss of a candidate network on a sample, computed directly
/// from the integrand (not via the quadratic form).
double loss_value(const ProblemSpec& problem, int phase_k, const Field& u_prev, const NetworkParams& candidate,
                  const NetworkSpec& candidate_spec, const QuadratureSample& sample);

/// <delta', v> = -v'(0), evaluated analytically.
double duality_pairing_delta_prime(const Field& candidate);

/// Per-node partial derivatives of the discretized loss integrand with
/// respect to (r, r', r''), quadrature weights folded in. The ultra-weak
/// duality term is not included here; it is a single analytic node at 0
/// with cotangent 1 on r'.
void loss_integrand_cotangents(const ProblemSpec& problem, const Field& u_prev, const EvalBatch& candidate,
                               const Eigen::VectorXd& weights, Eigen::VectorXd& a, Eigen::VectorXd& b,
                               Eigen::VectorXd& c);

/// Strong residual f + u'' sampled on a grid (for -u'' = f). Under the
/// dirac_prime source the distributional part is represented by a
/// unit-strength centered-difference dipole (two adjacent spikes of
/// +-1/h^2) and u'' falls back to grid finite differences when the state
/// cannot produce second derivatives analytically.
Eigen::VectorXd strong_residual_grid(const ProblemSpec& problem, const Field& u_state, const Eigen::VectorXd& grid);

}  // namespace runn
