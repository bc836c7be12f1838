#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sspo/gates.hpp"
#include "sspo/objectives.hpp"
#include "sspo/policy.hpp"

namespace sspo {

/// Shape of a random gradcheck instance. Current params are the behavior
/// params plus N(0, drift^2) noise, so ratios straddle the clip bounds.
struct InstanceSpec {
    int vocab_size = 5;
    int context_order = 1;
    int prompt_buckets = 3;
    int buckets_used = 2;  ///< buckets [buckets_used, P) stay untouched
    int num_groups = 2;
    int group_size = 4;
    int max_len = 5;
    double logit_scale = 1.0;
    double drift = 0.3;
};

struct GradCheckInstance {
    PolicyParams params;
    PolicyParams behavior;
    std::vector<TrajectoryGroup> groups;
};

/// Deterministic in (spec, seed).
GradCheckInstance make_instance(const InstanceSpec& spec, std::uint64_t seed);

struct GradCheckReport {
    ObjectiveKind kind = ObjectiveKind::Grpo;
    int coords_checked = 0;
    int untouched_checked = 0;
    int skipped_kink_coords = 0;
    double max_rel_err = 0.0;  ///< over coordinates with max(|analytic|, |fd|) > atol
    double max_abs_err = 0.0;
    bool pass = false;
    std::size_t worst_coord = 0;
    double worst_analytic = 0.0;
    double worst_finite_diff = 0.0;
    std::string failure;  ///< empty on pass

    std::string to_string() const;
};

inline constexpr double kKinkBand = 1e-3;
inline constexpr double kRelativeStep = 1e-5;

/// Symmetric difference quotient of a scalar function.
double central_difference(const std::function<double(double)>& fn, double x, double h);

/// Step used for coordinate j: kRelativeStep * max(1, |theta_j|).
double step_for(double theta);

/// (J(theta + h e_coord) - J(theta - h e_coord)) / (2h), J = evaluate_value.
/// Throws NumericError when either evaluation is non-finite.
double finite_diff_grad(ObjectiveKind kind, std::span<const TrajectoryGroup> groups, const PolicyParams& params,
                        const GateConfig& cfg, std::size_t coord, double h);

/// Rows whose logits feed some token ratio lying within `band` of an active
/// clip bound (or, for GSPO, a sequence ratio near its bound).
std::vector<bool> kink_rows(ObjectiveKind kind, std::span<const TrajectoryGroup> groups, const PolicyParams& params,
                            const GateConfig& cfg, double band = kKinkBand);

/// Rows visited by at least one token of the batch.
std::vector<bool> touched_rows(std::span<const TrajectoryGroup> groups, const PolicyParams& params);

/// Checks every touched coordinate away from kinks, plus a random sample of
/// untouched coordinates whose analytic gradient must be exactly zero.
/// A coordinate passes when rel_err <= rtol or abs_err <= atol.
GradCheckReport check_gradient(ObjectiveKind kind, std::span<const TrajectoryGroup> groups,
                               const PolicyParams& params, const GateConfig& cfg, double rtol, double atol,
                               std::uint64_t seed, int untouched_samples = 32);

/// make_instance + check_gradient with the default gate config.
GradCheckReport run_gradcheck(ObjectiveKind kind, const InstanceSpec& spec, double rtol, double atol,
                              std::uint64_t seed, const GateConfig& cfg = {});

}  // namespace sspo
