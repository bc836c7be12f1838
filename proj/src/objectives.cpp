#include "sspo/objectives.hpp"

#include <cassert>
#include <cmath>
#include <string>

#include "sspo/errors.hpp"
#include "sspo/group.hpp"

namespace sspo {

std::string_view to_string(ObjectiveKind kind) noexcept {
    switch (kind) {
        case ObjectiveKind::Grpo: return "grpo";
        case ObjectiveKind::Gspo: return "gspo";
        case ObjectiveKind::Gmpo: return "gmpo";
        case ObjectiveKind::Sapo: return "sapo";
        case ObjectiveKind::Sspo: return "sspo";
    }
    return "?";
}

ObjectiveKind parse_objective(std::string_view name) {
    for (ObjectiveKind k : kAllObjectives)
        if (to_string(k) == name) return k;
    throw ValidationError("unknown objective '" + std::string(name) + "' (valid: grpo, gspo, gmpo, sapo, sspo)");
}

bool is_sequence_level(ObjectiveKind kind) noexcept {
    return kind == ObjectiveKind::Gspo || kind == ObjectiveKind::Sspo;
}

double gmpo_log_weight(std::span<const double> log_ratios, double advantage, const GateConfig& cfg) {
    if (log_ratios.empty()) throw InvalidInput("gmpo: empty sequence");
    // |clip(.)| is the identity because every clip output is positive
    assert(1.0 - cfg.eps_low > 0.0);
    const double log_hi = std::log1p(cfg.eps_high);
    const double log_lo = std::log1p(-cfg.eps_low);
    double acc = 0.0;
    for (double lr : log_ratios) acc += advantage > 0.0 ? std::fmin(lr, log_hi) : std::fmax(lr, log_lo);
    return acc / static_cast<double>(log_ratios.size());
}

SequenceTerm sequence_term(ObjectiveKind kind, std::span<const double> log_ratios, double advantage,
                           const GateConfig& cfg) {
    const std::size_t len = log_ratios.size();
    if (len == 0) throw InvalidInput("objective: empty sequence");
    const double inv_len = 1.0 / static_cast<double>(len);
    SequenceTerm term;
    term.token_weights.assign(len, 0.0);

    switch (kind) {
        case ObjectiveKind::Grpo: {
            double acc = 0.0;
            for (std::size_t t = 0; t < len; ++t) {
                const double rho = std::exp(log_ratios[t]);
                acc += clip_gate(rho, advantage, cfg);
                if (!clip_active(rho, advantage, cfg)) term.token_weights[t] = advantage * rho * inv_len;
            }
            term.value = acc * inv_len * advantage;
            break;
        }
        case ObjectiveKind::Gspo: {
            const double s = std::exp(sequence_log_ratio_from_logs(log_ratios));
            term.value = clip_gate(s, advantage, cfg) * advantage;
            if (!clip_active(s, advantage, cfg))
                for (double& w : term.token_weights) w = advantage * s * inv_len;
            break;
        }
        case ObjectiveKind::Gmpo: {
            const double weight = std::exp(gmpo_log_weight(log_ratios, advantage, cfg));
            term.value = weight * advantage;
            for (std::size_t t = 0; t < len; ++t)
                if (!clip_active(std::exp(log_ratios[t]), advantage, cfg))
                    term.token_weights[t] = weight * advantage * inv_len;
            break;
        }
        case ObjectiveKind::Sapo: {
            double acc = 0.0;
            for (std::size_t t = 0; t < len; ++t) {
                const double rho = std::exp(log_ratios[t]);
                acc += soft_gate(rho, advantage, cfg);
                term.token_weights[t] = soft_gate_derivative(rho, advantage, cfg) * rho * advantage * inv_len;
            }
            term.value = acc * inv_len * advantage;
            break;
        }
        case ObjectiveKind::Sspo: {
            std::vector<double> ratios(len);
            for (std::size_t t = 0; t < len; ++t) ratios[t] = std::exp(log_ratios[t]);
            const double weight = std::exp(geo_gate_log(ratios, advantage, cfg));
            term.value = weight * advantage;
            for (std::size_t t = 0; t < len; ++t)
                term.token_weights[t] = weight * advantage * inv_len * sspo_weight(ratios[t], advantage, cfg).local_weight;
            break;
        }
    }
    return term;
}

namespace {

template <bool WithGradient>
SurrogateResult evaluate_impl(ObjectiveKind kind, std::span<const TrajectoryGroup> groups, const PolicyParams& params,
                              const GateConfig& cfg) {
    if (groups.empty()) throw InvalidInput("objective: empty batch");
    SurrogateResult result;
    if constexpr (WithGradient) result.gradient.assign(params.num_params(), 0.0);
    const auto vocab = static_cast<std::size_t>(params.vocab_size());
    std::vector<double> lp(vocab);
    const double inv_groups = 1.0 / static_cast<double>(groups.size());

    for (std::size_t g = 0; g < groups.size(); ++g) {
        const TrajectoryGroup& group = groups[g];
        validate(group);
        const double scale = inv_groups / static_cast<double>(group.size());
        for (std::size_t i = 0; i < group.size(); ++i) {
            const Trajectory& traj = group.trajectories[i];
            const double adv = group.advantages[i];
            if (!std::isfinite(adv))
                throw NumericError("objective: non-finite advantage at group " + std::to_string(g) + ", sequence " +
                                   std::to_string(i));
            const auto log_ratios = token_log_ratios(traj, params);
            const SequenceTerm term = sequence_term(kind, log_ratios, adv, cfg);
            if (!std::isfinite(term.value))
                throw NumericError("objective: non-finite value at group " + std::to_string(g) + ", sequence " +
                                   std::to_string(i));
            result.value += scale * term.value;
            if constexpr (WithGradient) {
                for (std::size_t t = 0; t < traj.length(); ++t) {
                    const double w = term.token_weights[t];
                    if (!std::isfinite(w))
                        throw NumericError("objective: non-finite token weight at group " + std::to_string(g) +
                                           ", sequence " + std::to_string(i) + ", t=" + std::to_string(t));
                    if (w == 0.0) continue;
                    const std::size_t s = state_at(params, traj.prompt_bucket, traj.response_tokens, t);
                    log_softmax(params.row(s), lp);
                    double* row = result.gradient.data() + s * vocab;
                    const double sw = scale * w;
                    for (std::size_t j = 0; j < vocab; ++j) row[j] -= sw * std::exp(lp[j]);
                    row[static_cast<std::size_t>(traj.response_tokens[t])] += sw;
                }
            }
        }
    }
    return result;
}

}  // namespace

SurrogateResult evaluate(ObjectiveKind kind, std::span<const TrajectoryGroup> groups, const PolicyParams& params,
                         const GateConfig& cfg) {
    cfg.validate();
    return evaluate_impl<true>(kind, groups, params, cfg);
}

double evaluate_value(ObjectiveKind kind, std::span<const TrajectoryGroup> groups, const PolicyParams& params,
                      const GateConfig& cfg) {
    cfg.validate();
    return evaluate_impl<false>(kind, groups, params, cfg).value;
}

}  // namespace sspo
