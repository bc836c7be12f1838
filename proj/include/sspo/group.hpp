#pragma once

#include <span>
#include <vector>

#include "sspo/policy.hpp"
#include "sspo/trajectory.hpp"

namespace sspo {

inline constexpr double kDefaultAdvantageEps = 1e-8;

/// Group-relative advantages (r_i - mean) / max(std, eps) with the
/// population standard deviation. A group whose std falls below eps is
/// degenerate and gets all-zero advantages. Throws InvalidInput for G < 2.
std::vector<double> normalize_advantages(std::span<const double> rewards, double eps = kDefaultAdvantageEps);

/// Per-token log ratios log pi_theta(y_t) - behavior_logps[t]. Unclamped.
/// Throws NumericError naming the token position on a non-finite value.
std::vector<double> token_log_ratios(const Trajectory& trajectory, const PolicyParams& params);

/// exp of token_log_ratios.
std::vector<double> token_ratios(const Trajectory& trajectory, const PolicyParams& params);

/// Length-normalised sequence ratio (prod rho_t)^(1/|y|), evaluated as exp(mean log rho_t).
double sequence_ratio(std::span<const double> ratios);
double sequence_log_ratio_from_logs(std::span<const double> log_ratios);

/// (1/|y|) sum_t (log rho_t - log s)^2.
double intra_sequence_dispersion(std::span<const double> ratios);
double intra_sequence_dispersion_from_logs(std::span<const double> log_ratios);

}  // namespace sspo
