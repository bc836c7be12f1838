#pragma once

#include <array>
#include <span>
#include <string_view>
#include <vector>

#include "sspo/gates.hpp"
#include "sspo/policy.hpp"
#include "sspo/trajectory.hpp"

namespace sspo {

enum class ObjectiveKind { Grpo, Gspo, Gmpo, Sapo, Sspo };

inline constexpr std::array<ObjectiveKind, 5> kAllObjectives{
    ObjectiveKind::Grpo, ObjectiveKind::Gspo, ObjectiveKind::Gmpo, ObjectiveKind::Sapo, ObjectiveKind::Sspo};

std::string_view to_string(ObjectiveKind kind) noexcept;
/// Lower-case names "grpo", "gspo", "gmpo", "sapo", "sspo". Throws ValidationError listing them.
ObjectiveKind parse_objective(std::string_view name);

/// True for GSPO and SSPO, whose importance weight is a sequence-level quantity.
bool is_sequence_level(ObjectiveKind kind) noexcept;

/// Objective value (to be maximised) and its gradient w.r.t. every logit.
struct SurrogateResult {
    double value = 0.0;
    std::vector<double> gradient;  ///< congruent with PolicyParams::logits()
};

/// One sequence's surrogate term J_i and the per-token weights w_t with
/// grad J_i = sum_t w_t * grad log pi(y_t). Batch scaling is not applied.
struct SequenceTerm {
    double value = 0.0;
    std::vector<double> token_weights;
};

/// Term for a sequence given its token log-ratios and shared advantage.
/// Clipped branches get exactly zero weight.
SequenceTerm sequence_term(ObjectiveKind kind, std::span<const double> log_ratios, double advantage,
                           const GateConfig& cfg);

/// GMPO's geometric aggregate (prod_t clip(rho_t))^(1/|y|), in log space.
double gmpo_log_weight(std::span<const double> log_ratios, double advantage, const GateConfig& cfg);

/// Mean over groups of (1/G) sum_i J_i, with the analytic gradient.
/// Throws InvalidInput on malformed groups and NumericError on non-finite terms.
SurrogateResult evaluate(ObjectiveKind kind, std::span<const TrajectoryGroup> groups, const PolicyParams& params,
                         const GateConfig& cfg);

/// Value only.
double evaluate_value(ObjectiveKind kind, std::span<const TrajectoryGroup> groups, const PolicyParams& params,
                      const GateConfig& cfg);

}  // namespace sspo
