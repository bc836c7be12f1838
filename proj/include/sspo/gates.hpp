#pragma once

#include <span>

namespace sspo {

/// Temperatures and clip widths shared by every objective.
///
/// Invariants (checked by validate()): temperatures > 0, eps_low in (0,1),
/// eps_high > 0 (may be +inf to disable upper clipping), and
/// tau_neg >= tau_pos unless `allow_tau_inversion` is set for ablations.
struct GateConfig {
    double tau_pos = 1.0;
    double tau_neg = 2.0;
    double eps_low = 0.2;
    double eps_high = 0.2;
    bool allow_tau_inversion = false;

    void validate() const;

    friend bool operator==(const GateConfig&, const GateConfig&) = default;
};

/// Validated construction; throws ValidationError.
GateConfig make_gate_config(double tau_pos, double tau_neg, double eps_low, double eps_high,
                            bool allow_tau_inversion = false);

/// tau_pos for A > 0, tau_neg otherwise (A = 0 included).
double temperature(double advantage, const GateConfig& cfg) noexcept;

/// Advantage-aware hard clip: min(rho, 1+eps_high) if A > 0, else max(rho, 1-eps_low).
double clip_gate(double rho, double advantage, const GateConfig& cfg) noexcept;

/// True when clip_gate selects the constant bound, i.e. d clip / d rho = 0.
bool clip_active(double rho, double advantage, const GateConfig& cfg) noexcept;

/// Sigmoid gate sigma(tau (rho - 1)) * 4 / tau.
double soft_gate(double rho, double advantage, const GateConfig& cfg) noexcept;

/// d soft_gate / d rho = 4 g (1 - g), g = sigma(tau (rho - 1)). Peaks at 1 when rho = 1.
double soft_gate_derivative(double rho, double advantage, const GateConfig& cfg) noexcept;

/// Arctan-exp gate exp(arctan(tau (rho - 1)) / tau), bounded in (exp(-pi/2tau), exp(pi/2tau)).
double sspo_gate(double rho, double advantage, const GateConfig& cfg) noexcept;

struct SspoWeight {
    double f_ratio;       ///< f'/f = 1 / (1 + (tau (rho - 1))^2)
    double local_weight;  ///< rho * f'/f
};

SspoWeight sspo_weight(double rho, double advantage, const GateConfig& cfg) noexcept;

/// log of the geometric mean of sspo_gate over a sequence, in closed form:
/// (1 / (|y| tau)) sum_t arctan(tau (rho_t - 1)). Throws InvalidInput on empty input.
double geo_gate_log(std::span<const double> ratios, double advantage, const GateConfig& cfg);

}  // namespace sspo
