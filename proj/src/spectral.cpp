#include "runn/spectral.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <cstdio>
#include <numbers>

namespace runn {

Eigen::VectorXd uniform_grid(const Interval& domain, int m) {
    if (m < 1) throw ConfigError("uniform_grid: need at least one point");
    Eigen::VectorXd grid(m);
    const double h = domain.length() / m;
    for (int i = 0; i < m; ++i) grid[i] = domain.a + (i + 0.5) * h;
    return grid;
}

SpectrumCurve ncpsd(const std::vector<double>& values, int s, const Interval& domain) {
    const int m = static_cast<int>(values.size());
    if (m < 16 || m % 2 != 0) throw ContractError("ncpsd: need an even grid with at least 16 samples");

    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> coeffs;
    std::vector<double> signal(values);
    fft.fwd(coeffs, signal);

    const int half = m / 2;
    SpectrumCurve curve;
    curve.s = s;
    curve.sample_count = m;
    curve.omegas.resize(half + 1);
    curve.power.resize(half + 1);
    const double base = 2.0 * std::numbers::pi / domain.length();
    double total = 0.0;
    for (int k = 0; k <= half; ++k) {
        const double omega = base * k;
        double p = std::norm(coeffs[k]);
        if (k > 0 && k < half) p *= 2.0;  // fold the conjugate half
        p *= std::pow(1.0 + omega * omega, s);
        curve.omegas[k] = omega;
        curve.power[k] = p;
        total += p;
    }
    if (!(total > 0.0) || !std::isfinite(total))
        throw NumericError("ncpsd: degenerate spectrum, total weighted power is zero or non-finite");

    curve.ncpsd.resize(half + 1);
    double acc = 0.0;
    for (int k = 0; k <= half; ++k) {
        acc += curve.power[k];
        curve.ncpsd[k] = acc / total;
    }
    curve.ncpsd[half] = 1.0;  // pin the terminal value against roundoff
    return curve;
}

std::pair<double, double> select_bandwidth(const SpectrumCurve& curve, double alpha) {
    if (!(alpha > 0.0 && alpha < 0.5)) throw ConfigError("select_bandwidth: alpha must lie in (0, 0.5)");
    const auto quantile = [&](double level) {
        for (int k = 0; k < curve.ncpsd.size(); ++k)
            if (curve.ncpsd[k] >= level) return curve.omegas[k];
        return curve.omegas[curve.omegas.size() - 1];
    };
    double lo = quantile(alpha);
    double hi = quantile(1.0 - alpha);
    if (lo == 0.0) lo = curve.omegas.size() > 1 ? curve.omegas[1] : hi;
    if (hi < lo) hi = lo;  // can only happen after the zero clamp
    return {lo, hi};
}

Eigen::VectorXd sample_frequencies(double omega_min, double omega_max, int n, std::uint64_t seed) {
    if (!(omega_min > 0.0) || !(omega_max >= omega_min))
        throw ConfigError("sample_frequencies: need 0 < omega_min <= omega_max");
    if (n < 0) throw ConfigError("sample_frequencies: negative count");
    Eigen::VectorXd kappa(n);
    rng::Stream stream(rng::derive(seed, 0xf5e9ULL, 0x109ULL));
    const double lo = std::log(omega_min);
    const double hi = std::log(omega_max);
    for (int i = 0; i < n; ++i) kappa[i] = std::exp(stream.uniform(lo, hi));
    return kappa;
}

std::pair<SourceTag, int> phase_strategy(const PhaseDescriptor& phase) {
    switch (phase.formulation) {
        case Formulation::weak:
            if (phase.phase_index == 0) return {SourceTag::source_term, -1};
            if (phase.phase_index == 1) return {SourceTag::strong_residual, -1};
            return {SourceTag::prior_weak_residual, 1};
        case Formulation::ultraweak:
            if (phase.phase_index == 0) return {SourceTag::source_term, -2};
            if (phase.phase_index == 1) return {SourceTag::strong_residual, -2};
            return {SourceTag::prior_correction_proxy, 0};
        case Formulation::strong:
            // No dedicated strategy is prescribed for the strong mode; the
            // residual lives in L2, so analyze it (or the source) unweighted.
            if (phase.phase_index == 0) return {SourceTag::source_term, 0};
            return {SourceTag::strong_residual, 0};
    }
    throw ConfigError("phase_strategy: unknown formulation");
}

InitPlan init_plan_for_phase(const PhaseDescriptor& phase, const PhaseArtifacts& artifacts, double alpha,
                             const Interval& domain, SpectrumCurve* curve_out) {
    const auto [tag, s] = phase_strategy(phase);
    const std::vector<double>* signal = nullptr;
    switch (tag) {
        case SourceTag::source_term: signal = &artifacts.source; break;
        case SourceTag::strong_residual:
            signal = artifacts.strong_residual ? &*artifacts.strong_residual : nullptr;
            break;
        case SourceTag::prior_weak_residual:
            signal = artifacts.prior_weak_residual ? &*artifacts.prior_weak_residual : nullptr;
            break;
        case SourceTag::prior_correction_proxy:
            signal = artifacts.prior_correction_proxy ? &*artifacts.prior_correction_proxy : nullptr;
            break;
    }
    if (signal == nullptr || signal->empty())
        throw SequencingError(std::string("init_plan_for_phase: missing prior artifact '") + to_string(tag) +
                              "' for phase " + std::to_string(phase.phase_index));
    const SpectrumCurve curve = ncpsd(*signal, s, domain);
    if (curve_out != nullptr) *curve_out = curve;
    const auto [lo, hi] = select_bandwidth(curve, alpha);
    InitPlan plan;
    plan.omega_min = lo;
    plan.omega_max = hi;
    plan.alpha = alpha;
    plan.s_used = s;
    plan.source_tag = tag;
    return plan;
}

void write_spectrum_csv(const SpectrumCurve& curve, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (f == nullptr) throw NumericError("write_spectrum_csv: cannot open " + path);
    std::fputs("omega,power,ncpsd\n", f);
    for (int k = 0; k < curve.omegas.size(); ++k)
        std::fprintf(f, "%.17g,%.17g,%.17g\n", curve.omegas[k], curve.power[k], curve.ncpsd[k]);
    std::fclose(f);
}

}  // namespace runn
