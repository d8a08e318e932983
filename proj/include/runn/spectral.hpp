#pragma once

#include <Eigen/Core>
#include <optional>
#include <vector>

#include "runn/common.hpp"

namespace runn {

/// One-sided, Sobolev-weighted power spectrum of a grid-sampled signal with
/// its normalized cumulative distribution.
struct SpectrumCurve {
    Eigen::VectorXd omegas;  ///< nonnegative angular frequencies, strictly increasing from 0
    Eigen::VectorXd power;   ///< (1 + w^2)^s weighted one-sided power per bin
    Eigen::VectorXd ncpsd;   ///< cumulative power normalized to end at 1
    int s = 0;               ///< regularity index used for the weighting
    int sample_count = 0;    ///< grid size M of the analyzed signal
};

/// Which prior signal an initialization plan analyzed.
enum class SourceTag { source_term, strong_residual, prior_weak_residual, prior_correction_proxy };

inline const char* to_string(SourceTag t) {
    switch (t) {
        case SourceTag::source_term: return "source_term";
        case SourceTag::strong_residual: return "strong_residual";
        case SourceTag::prior_weak_residual: return "prior_weak_residual";
        case SourceTag::prior_correction_proxy: return "prior_correction_proxy";
    }
    return "unknown";
}

/// Frequency-band initialization recipe for one training phase.
struct InitPlan {
    double omega_min = 0.0;
    double omega_max = 0.0;
    double alpha = 0.05;
    int s_used = 0;
    SourceTag source_tag = SourceTag::source_term;
};

/// Identifies one phase of the outer iteration: phase 0 trains the initial
/// ansatz, phase k >= 1 trains the (k-1)-th correction.
struct PhaseDescriptor {
    Formulation formulation = Formulation::weak;
    int phase_index = 0;
};

/// Grid signals available for spectral analysis when planning a phase.
struct PhaseArtifacts {
    std::vector<double> source;
    std::optional<std::vector<double>> strong_residual;
    std::optional<std::vector<double>> prior_weak_residual;
    std::optional<std::vector<double>> prior_correction_proxy;
};

/// Default analysis grid size; resolves content up to omega = 2048*pi on a
/// length-2 domain, far above anything the experiments contain.
inline constexpr int kDefaultSpectralGridSize = 4096;

/// Uniform half-cell-offset grid of M points spanning the domain. Never
/// contains the endpoints or the domain midpoint.
Eigen::VectorXd uniform_grid(const Interval& domain, int m);

/// Sobolev-weighted NCPSD of a uniformly sampled signal. One-sided DFT
/// spectrum, omega_m = 2*pi*m/|domain| for m = 0..M/2, bin powers weighted
/// by (1 + omega^2)^s and cumulatively normalized. The DFT convention
/// cancels in the normalization, so only the weighting is observable.
SpectrumCurve ncpsd(const std::vector<double>& values, int s, const Interval& domain = Interval{});

/// Symmetric tail truncation: smallest omega with ncpsd >= alpha and
/// smallest omega with ncpsd >= 1 - alpha. A zero lower edge is clamped to
/// the first positive bin so log-uniform sampling stays well-defined.
std::pair<double, double> select_bandwidth(const SpectrumCurve& curve, double alpha);

/// i.i.d. frequencies with ln(kappa) ~ U(ln w_min, ln w_max).
Eigen::VectorXd sample_frequencies(double omega_min, double omega_max, int n, std::uint64_t seed);

/// Per-phase strategy table: which signal to analyze and at which
/// regularity index, by formulation and phase.
std::pair<SourceTag, int> phase_strategy(const PhaseDescriptor& phase);

/// Resolve the strategy against available artifacts and compute the band.
/// The analyzed spectrum is written to curve_out when given.
InitPlan init_plan_for_phase(const PhaseDescriptor& phase, const PhaseArtifacts& artifacts, double alpha,
                             const Interval& domain = Interval{}, SpectrumCurve* curve_out = nullptr);

/// CSV export (omega, power, ncpsd) for spectrum reports.
void write_spectrum_csv(const SpectrumCurve& curve, const std::string& path);

}  // namespace runn
