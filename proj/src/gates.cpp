#include "sspo/gates.hpp"

#include <cmath>
#include <string>

#include "sspo/errors.hpp"

namespace sspo {

void GateConfig::validate() const {
    if (!(tau_pos > 0.0) || !std::isfinite(tau_pos)) throw ValidationError("gate.tau_pos must be a finite value > 0");
    if (!(tau_neg > 0.0) || !std::isfinite(tau_neg)) throw ValidationError("gate.tau_neg must be a finite value > 0");
    if (!(eps_low > 0.0 && eps_low < 1.0)) throw ValidationError("gate.eps_low must lie in (0, 1)");
    if (!(eps_high > 0.0)) throw ValidationError("gate.eps_high must be > 0");
    if (!allow_tau_inversion && tau_neg < tau_pos)
        throw ValidationError("gate.tau_neg (" + std::to_string(tau_neg) + ") must be >= gate.tau_pos (" +
                              std::to_string(tau_pos) + "); set allow_tau_inversion for ablations");
}

GateConfig make_gate_config(double tau_pos, double tau_neg, double eps_low, double eps_high,
                            bool allow_tau_inversion) {
    GateConfig cfg{tau_pos, tau_neg, eps_low, eps_high, allow_tau_inversion};
    cfg.validate();
    return cfg;
}

double temperature(double advantage, const GateConfig& cfg) noexcept {
    return advantage > 0.0 ? cfg.tau_pos : cfg.tau_neg;
}

double clip_gate(double rho, double advantage, const GateConfig& cfg) noexcept {
    if (advantage > 0.0) return std::fmin(rho, 1.0 + cfg.eps_high);
    return std::fmax(rho, 1.0 - cfg.eps_low);
}

bool clip_active(double rho, double advantage, const GateConfig& cfg) noexcept {
    if (advantage > 0.0) return rho > 1.0 + cfg.eps_high;
    return rho < 1.0 - cfg.eps_low;
}

namespace {

double sigmoid(double x) noexcept {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

double soft_gate(double rho, double advantage, const GateConfig& cfg) noexcept {
    const double tau = temperature(advantage, cfg);
    return sigmoid(tau * (rho - 1.0)) * 4.0 / tau;
}

double soft_gate_derivative(double rho, double advantage, const GateConfig& cfg) noexcept {
    // g (1 - g) written as sigma(x) sigma(-x) keeps precision in the tails
    const double x = temperature(advantage, cfg) * (rho - 1.0);
    return 4.0 * sigmoid(x) * sigmoid(-x);
}

double sspo_gate(double rho, double advantage, const GateConfig& cfg) noexcept {
    const double tau = temperature(advantage, cfg);
    return std::exp(std::atan(tau * (rho - 1.0)) / tau);
}

SspoWeight sspo_weight(double rho, double advantage, const GateConfig& cfg) noexcept {
    const double x = temperature(advantage, cfg) * (rho - 1.0);
    const double f_ratio = 1.0 / (1.0 + x * x);
    return {f_ratio, rho * f_ratio};
}

double geo_gate_log(std::span<const double> ratios, double advantage, const GateConfig& cfg) {
    if (ratios.empty()) throw InvalidInput("geo_gate_log: empty ratio list");
    const double tau = temperature(advantage, cfg);
    double acc = 0.0;
    for (double rho : ratios) acc += std::atan(tau * (rho - 1.0));
    return acc / (static_cast<double>(ratios.size()) * tau);
}

}  // namespace sspo
