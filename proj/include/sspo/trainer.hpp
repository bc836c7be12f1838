#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "sspo/errors.hpp"
#include "sspo/gates.hpp"
#include "sspo/objectives.hpp"
#include "sspo/policy.hpp"
#include "sspo/tasks.hpp"

namespace sspo {

enum class OptimizerKind { Sgd, Adam };

std::string_view to_string(OptimizerKind kind) noexcept;
OptimizerKind parse_optimizer(std::string_view name);

struct TrainConfig {
    TaskSpec task;
    int context_order = 1;
    int prompt_buckets = 7;
    ObjectiveKind objective = ObjectiveKind::Sspo;
    GateConfig gate;
    int group_size = 8;              ///< G
    int prompts_per_rollout = 16;    ///< B
    int epochs_per_rollout = 2;      ///< E
    int minibatches_per_epoch = 2;   ///< M
    OptimizerKind optimizer = OptimizerKind::Adam;
    double learning_rate = 0.05;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    int total_updates = 300;
    std::uint64_t seed = 0;
    double advantage_eps = 1e-8;

    /// Throws ValidationError naming the offending field.
    void validate() const;

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// One row per optimizer step. `update_index` is the rollout cycle the step
/// belongs to, so each cycle contributes E * M consecutive rows.
struct MetricsRow {
    int update_index = 0;
    double mean_reward = 0.0;  ///< over the cycle's full rollout buffer
    double objective_value = 0.0;
    double policy_entropy_mean = 0.0;
    double ratio_mean = 0.0;
    double ratio_max = 0.0;
    double intra_seq_dispersion_mean = 0.0;
    double soft_clipped_fraction = 0.0;
    double grad_norm = 0.0;
};

/// Gradient ascent. Adam keeps its moments across rollout cycles.
class Optimizer {
public:
    Optimizer(const TrainConfig& cfg, std::size_t num_params);
    void step(std::span<double> params, std::span<const double> gradient);

private:
    OptimizerKind kind_;
    double lr_, beta1_, beta2_, eps_;
    long steps_ = 0;
    std::vector<double> m_, v_;
};

/// Deep copy used as the behavior policy pi_old.
PolicyParams snapshot_behavior(const PolicyParams& params);

/// B prompts with G sampled responses each, rewards and normalised advantages
/// filled in. Prompt slot b draws from the substream (seed, update_index, b).
std::vector<TrajectoryGroup> collect_rollouts(const PolicyParams& behavior, const TaskSpec& task, int prompts,
                                              int group_size, std::uint64_t seed, int update_index,
                                              double advantage_eps = 1e-8);

/// Diagnostics of a mini-batch under the current params (before the step).
MetricsRow batch_metrics(ObjectiveKind kind, std::span<const TrajectoryGroup> groups, const PolicyParams& params,
                         const GateConfig& cfg);

struct TrainResult {
    std::vector<MetricsRow> metrics;
    PolicyParams final_params;
};

/// Raised when an update would leave non-finite parameters or |theta| > 1e6.
/// Carries every metrics row logged before the failure.
class TrainingDiverged : public NumericError {
public:
    TrainingDiverged(const std::string& what, std::vector<MetricsRow> rows)
        : NumericError(what), metrics(std::move(rows)) {}
    std::vector<MetricsRow> metrics;
};

using UpdateCallback = std::function<void(int update_index, const PolicyParams& params)>;

/// snapshot -> rollouts -> E epochs of M shuffled mini-batch ascent steps,
/// repeated total_updates times. Starts from uniform (all-zero) logits.
TrainResult train(const TrainConfig& config, const UpdateCallback& on_update = {});

/// Training from explicit initial params.
TrainResult train_from(const TrainConfig& config, PolicyParams initial, const UpdateCallback& on_update = {});

inline constexpr double kDivergenceLimit = 1e6;

std::string_view metrics_csv_header() noexcept;
void write_metrics_csv(std::ostream& os, std::span<const MetricsRow> rows);

}  // namespace sspo
