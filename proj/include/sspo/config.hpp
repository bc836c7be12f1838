#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "sspo/trainer.hpp"

namespace sspo {

/// Experiment file as loaded from JSON, with every default materialised.
///
/// Schema (unknown keys are rejected at every level):
///   task      {kind, vocab_size, prompt_len, max_len, reward_mode, n}
///   policy    {k, prompt_buckets}
///   objective "grpo" | "gspo" | "gmpo" | "sapo" | "sspo"
///   gate      {tau_pos, tau_neg, eps_low, eps_high, allow_tau_inversion}
///   train     {G, B, E, M, optimizer, learning_rate, total_updates, seed,
///              advantage_eps, adam_beta1, adam_beta2, adam_eps, checkpoint_every}
///   output_dir
///
/// `objective` and `task.kind` are required. When the `gate` object is
/// present it must carry the keys its objective reads: tau_pos and tau_neg
/// for sapo/sspo, eps_low and eps_high for grpo/gspo/gmpo. An absent
/// `gate` object takes all defaults. eps_high may be null for +inf.
struct ExperimentConfig {
    TrainConfig train;
    std::string output_dir = "out";
    int checkpoint_every = 0;  ///< 0 writes only the final checkpoint

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Throws ValidationError naming the offending key path.
ExperimentConfig parse_config(const nlohmann::json& doc,
                              std::optional<ObjectiveKind> objective_override = std::nullopt);
ExperimentConfig load_config(const std::filesystem::path& path,
                             std::optional<ObjectiveKind> objective_override = std::nullopt);

/// Fully resolved document; parse_config(to_json(c)) == c.
nlohmann::json to_json(const ExperimentConfig& config);

}  // namespace sspo
