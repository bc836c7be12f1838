#include "sspo/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <string>

#include "sspo/csv.hpp"
#include "sspo/group.hpp"

namespace sspo {

std::string_view to_string(OptimizerKind kind) noexcept { return kind == OptimizerKind::Sgd ? "sgd" : "adam"; }

OptimizerKind parse_optimizer(std::string_view name) {
    if (name == "sgd") return OptimizerKind::Sgd;
    if (name == "adam") return OptimizerKind::Adam;
    throw ValidationError("train.optimizer: unknown optimizer '" + std::string(name) + "' (valid: sgd, adam)");
}

void TrainConfig::validate() const {
    task.validate();
    gate.validate();
    if (context_order < 1) throw ValidationError("policy.k must be >= 1");
    if (prompt_buckets < 1) throw ValidationError("policy.prompt_buckets must be >= 1");
    if (group_size < 2) throw ValidationError("train.G must be >= 2");
    if (prompts_per_rollout < 1) throw ValidationError("train.B must be >= 1");
    if (epochs_per_rollout < 1) throw ValidationError("train.E must be >= 1");
    if (minibatches_per_epoch < 1) throw ValidationError("train.M must be >= 1");
    if (prompts_per_rollout % minibatches_per_epoch != 0)
        throw ValidationError("train.B (" + std::to_string(prompts_per_rollout) + ") must be divisible by train.M (" +
                              std::to_string(minibatches_per_epoch) + ")");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
        throw ValidationError("train.learning_rate must be finite and >= 0");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) throw ValidationError("train.adam_beta1 must lie in [0, 1)");
    if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) throw ValidationError("train.adam_beta2 must lie in [0, 1)");
    if (!(adam_eps > 0.0)) throw ValidationError("train.adam_eps must be > 0");
    if (total_updates < 0) throw ValidationError("train.total_updates must be >= 0");
    if (!(advantage_eps > 0.0)) throw ValidationError("train.advantage_eps must be > 0");
}

Optimizer::Optimizer(const TrainConfig& cfg, std::size_t num_params)
    : kind_(cfg.optimizer), lr_(cfg.learning_rate), beta1_(cfg.adam_beta1), beta2_(cfg.adam_beta2),
      eps_(cfg.adam_eps) {
    if (kind_ == OptimizerKind::Adam) {
        m_.assign(num_params, 0.0);
        v_.assign(num_params, 0.0);
    }
}

void Optimizer::step(std::span<double> params, std::span<const double> gradient) {
    ++steps_;
    if (kind_ == OptimizerKind::Sgd) {
        for (std::size_t j = 0; j < params.size(); ++j) params[j] += lr_ * gradient[j];
        return;
    }
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
    for (std::size_t j = 0; j < params.size(); ++j) {
        m_[j] = beta1_ * m_[j] + (1.0 - beta1_) * gradient[j];
        v_[j] = beta2_ * v_[j] + (1.0 - beta2_) * gradient[j] * gradient[j];
        const double m_hat = m_[j] / bc1;
        const double v_hat = v_[j] / bc2;
        params[j] += lr_ * m_hat / (std::sqrt(v_hat) + eps_);
    }
}

PolicyParams snapshot_behavior(const PolicyParams& params) { return params; }

std::vector<TrajectoryGroup> collect_rollouts(const PolicyParams& behavior, const TaskSpec& task, int prompts,
                                              int group_size, std::uint64_t seed, int update_index,
                                              double advantage_eps) {
    std::vector<TrajectoryGroup> groups(static_cast<std::size_t>(prompts));
    for (int b = 0; b < prompts; ++b) {
        Rng rng(seed, {static_cast<std::uint64_t>(StreamTag::Prompt), static_cast<std::uint64_t>(update_index),
                       static_cast<std::uint64_t>(b)});
        const Prompt prompt = make_prompt(task, behavior.prompt_buckets(), rng);
        TrajectoryGroup& group = groups[static_cast<std::size_t>(b)];
        std::vector<double> rewards;
        rewards.reserve(static_cast<std::size_t>(group_size));
        for (int i = 0; i < group_size; ++i) {
            Trajectory t = sample_response(behavior, prompt.bucket, prompt.tokens, task.max_len, rng);
            t.prompt_id = b;
            t.reward = reward(task, prompt.tokens, t.response_tokens);
            rewards.push_back(t.reward);
            group.trajectories.push_back(std::move(t));
        }
        group.advantages = normalize_advantages(rewards, advantage_eps);
    }
    return groups;
}

MetricsRow batch_metrics(ObjectiveKind kind, std::span<const TrajectoryGroup> groups, const PolicyParams& params,
                         const GateConfig& cfg) {
    MetricsRow row;
    double ratio_sum = 0.0, entropy_sum = 0.0, dispersion_sum = 0.0;
    std::size_t tokens = 0, sequences = 0, gated = 0;
    for (const auto& g : groups) {
        for (std::size_t i = 0; i < g.size(); ++i) {
            const Trajectory& t = g.trajectories[i];
            const double adv = g.advantages[i];
            const auto log_ratios = token_log_ratios(t, params);
            dispersion_sum += intra_sequence_dispersion_from_logs(log_ratios);
            ++sequences;
            const double s = std::exp(sequence_log_ratio_from_logs(log_ratios));
            for (std::size_t k = 0; k < t.length(); ++k) {
                const double rho = std::exp(log_ratios[k]);
                ratio_sum += rho;
                row.ratio_max = std::max(row.ratio_max, rho);
                entropy_sum += entropy(params, state_at(params, t.prompt_bucket, t.response_tokens, k));
                ++tokens;
                bool attenuated = false;
                switch (kind) {
                    case ObjectiveKind::Grpo:
                    case ObjectiveKind::Gmpo: attenuated = clip_active(rho, adv, cfg); break;
                    case ObjectiveKind::Gspo: attenuated = clip_active(s, adv, cfg); break;
                    case ObjectiveKind::Sapo: attenuated = soft_gate_derivative(rho, adv, cfg) < 0.5; break;
                    case ObjectiveKind::Sspo: attenuated = sspo_weight(rho, adv, cfg).f_ratio < 0.5; break;
                }
                gated += attenuated ? 1 : 0;
            }
        }
    }
    if (tokens > 0) {
        row.ratio_mean = ratio_sum / static_cast<double>(tokens);
        row.policy_entropy_mean = entropy_sum / static_cast<double>(tokens);
        row.soft_clipped_fraction = static_cast<double>(gated) / static_cast<double>(tokens);
    }
    if (sequences > 0) row.intra_seq_dispersion_mean = dispersion_sum / static_cast<double>(sequences);
    return row;
}

namespace {

double mean_reward(std::span<const TrajectoryGroup> groups) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& g : groups)
        for (const auto& t : g.trajectories) {
            sum += t.reward;
            ++n;
        }
    return n > 0 ? sum / static_cast<double>(n) : 0.0;
}

void check_params(const PolicyParams& params, int update_index, std::vector<MetricsRow>& rows) {
    for (std::size_t j = 0; j < params.num_params(); ++j) {
        const double x = params.logits()[j];
        if (!std::isfinite(x) || std::abs(x) > kDivergenceLimit)
            throw TrainingDiverged("training diverged at update " + std::to_string(update_index) + ": logit " +
                                       std::to_string(j) + " = " + std::to_string(x),
                                   std::move(rows));
    }
}

}  // namespace

TrainResult train_from(const TrainConfig& config, PolicyParams initial, const UpdateCallback& on_update) {
    config.validate();
    if (initial.vocab_size() != config.task.vocab_size || initial.context_order() != config.context_order ||
        initial.prompt_buckets() != config.prompt_buckets)
        throw ValidationError("initial params do not match task.vocab_size / policy.k / policy.prompt_buckets");

    TrainResult result{{}, std::move(initial)};
    PolicyParams& params = result.final_params;
    Optimizer optimizer(config, params.num_params());
    const int per_batch = config.prompts_per_rollout / config.minibatches_per_epoch;
    std::vector<std::size_t> order(static_cast<std::size_t>(config.prompts_per_rollout));
    std::vector<TrajectoryGroup> minibatch;

    for (int u = 0; u < config.total_updates; ++u) {
        const PolicyParams behavior = snapshot_behavior(params);
        const auto groups = collect_rollouts(behavior, config.task, config.prompts_per_rollout, config.group_size,
                                             config.seed, u, config.advantage_eps);
        const double reward_mean = mean_reward(groups);

        for (int e = 0; e < config.epochs_per_rollout; ++e) {
            std::iota(order.begin(), order.end(), std::size_t{0});
            Rng shuffle_rng(config.seed, {static_cast<std::uint64_t>(StreamTag::Shuffle), static_cast<std::uint64_t>(u),
                                          static_cast<std::uint64_t>(e)});
            shuffle_rng.shuffle(std::span<std::size_t>(order));
            for (int m = 0; m < config.minibatches_per_epoch; ++m) {
                minibatch.clear();
                for (int j = 0; j < per_batch; ++j)
                    minibatch.push_back(groups[order[static_cast<std::size_t>(m * per_batch + j)]]);

                SurrogateResult surrogate;
                MetricsRow row;
                try {
                    surrogate = evaluate(config.objective, minibatch, params, config.gate);
                    row = batch_metrics(config.objective, minibatch, params, config.gate);
                } catch (const NumericError& err) {
                    throw TrainingDiverged(std::string("training diverged at update ") + std::to_string(u) + ": " +
                                               err.what(),
                                           std::move(result.metrics));
                }
                row.update_index = u;
                row.mean_reward = reward_mean;
                row.objective_value = surrogate.value;
                double sq = 0.0;
                for (double g : surrogate.gradient) sq += g * g;
                row.grad_norm = std::sqrt(sq);

                optimizer.step(params.logits(), surrogate.gradient);
                result.metrics.push_back(row);
                check_params(params, u, result.metrics);
            }
        }
        if (on_update) on_update(u, params);
    }
    return result;
}

TrainResult train(const TrainConfig& config, const UpdateCallback& on_update) {
    config.validate();
    return train_from(config, PolicyParams(config.task.vocab_size, config.context_order, config.prompt_buckets),
                      on_update);
}

std::string_view metrics_csv_header() noexcept {
    return "update_index,mean_reward,objective_value,policy_entropy_mean,ratio_mean,ratio_max,"
           "intra_seq_dispersion_mean,soft_clipped_fraction,grad_norm";
}

void write_metrics_csv(std::ostream& os, std::span<const MetricsRow> rows) {
    os << metrics_csv_header() << '\n';
    for (const auto& r : rows) {
        os << r.update_index << ',' << format_real(r.mean_reward) << ',' << format_real(r.objective_value) << ','
           << format_real(r.policy_entropy_mean) << ',' << format_real(r.ratio_mean) << ','
           << format_real(r.ratio_max) << ',' << format_real(r.intra_seq_dispersion_mean) << ','
           << format_real(r.soft_clipped_fraction) << ',' << format_real(r.grad_norm) << '\n';
    }
}

}  // namespace sspo
