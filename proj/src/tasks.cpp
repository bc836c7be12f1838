#include "sspo/tasks.hpp"

#include <algorithm>
#include <numeric>

#include "sspo/errors.hpp"

namespace sspo {

std::size_t TaskSpec::target_length() const noexcept {
    return kind == TaskKind::RepeatN ? static_cast<std::size_t>(n) + 1 : 2;
}

void TaskSpec::validate() const {
    if (vocab_size < 3) throw ValidationError("task.vocab_size must be >= 3 (payload tokens plus EOS)");
    if (prompt_len < 1) throw ValidationError("task.prompt_len must be >= 1");
    if (kind == TaskKind::RepeatN && n < 1) throw ValidationError("task.n must be >= 1 for repeat_n");
    if (max_len < 1) throw ValidationError("task.max_len must be >= 1");
    if (static_cast<std::size_t>(max_len) < target_length())
        throw ValidationError("task.max_len must be >= target length " + std::to_string(target_length()));
}

std::string_view to_string(TaskKind kind) noexcept {
    switch (kind) {
        case TaskKind::CopyLast: return "copy_last";
        case TaskKind::SumMod: return "sum_mod";
        case TaskKind::RepeatN: return "repeat_n";
    }
    return "?";
}

std::string_view to_string(RewardMode mode) noexcept {
    return mode == RewardMode::Binary ? "binary" : "fractional";
}

TaskKind parse_task_kind(std::string_view name) {
    if (name == "copy_last") return TaskKind::CopyLast;
    if (name == "sum_mod") return TaskKind::SumMod;
    if (name == "repeat_n") return TaskKind::RepeatN;
    throw ValidationError("task.kind: unknown task '" + std::string(name) + "' (valid: copy_last, sum_mod, repeat_n)");
}

RewardMode parse_reward_mode(std::string_view name) {
    if (name == "binary") return RewardMode::Binary;
    if (name == "fractional") return RewardMode::Fractional;
    throw ValidationError("task.reward_mode: unknown mode '" + std::string(name) + "' (valid: binary, fractional)");
}

Token answer_token(const TaskSpec& spec, std::span<const Token> prompt) {
    if (prompt.empty()) throw InvalidInput("task: empty prompt");
    switch (spec.kind) {
        case TaskKind::CopyLast:
        case TaskKind::RepeatN:
            return prompt.back();
        case TaskKind::SumMod: {
            const long sum = std::accumulate(prompt.begin(), prompt.end(), 0L);
            return static_cast<Token>(sum % spec.payload_size());
        }
    }
    return 0;
}

std::vector<Token> target_sequence(const TaskSpec& spec, std::span<const Token> prompt) {
    const Token a = answer_token(spec, prompt);
    std::vector<Token> target(spec.target_length() - 1, a);
    target.push_back(spec.eos());
    return target;
}

int prompt_bucket(const TaskSpec& spec, std::span<const Token> prompt, int prompt_buckets) {
    if (prompt_buckets < 1) throw InvalidInput("task: prompt_buckets must be >= 1");
    return answer_token(spec, prompt) % prompt_buckets;
}

Prompt make_prompt(const TaskSpec& spec, int prompt_buckets, Rng& rng) {
    Prompt p;
    p.tokens.resize(static_cast<std::size_t>(spec.prompt_len));
    for (Token& t : p.tokens) t = static_cast<Token>(rng.below(static_cast<std::uint64_t>(spec.payload_size())));
    p.bucket = prompt_bucket(spec, p.tokens, prompt_buckets);
    return p;
}

double reward(const TaskSpec& spec, std::span<const Token> prompt, std::span<const Token> response) {
    if (response.empty()) throw InvalidInput("reward: empty response");
    const auto target = target_sequence(spec, prompt);
    if (spec.reward_mode == RewardMode::Binary)
        return std::equal(target.begin(), target.end(), response.begin(), response.end()) ? 1.0 : 0.0;
    const std::size_t common = std::min(target.size(), response.size());
    std::size_t hits = 0;
    for (std::size_t i = 0; i < common; ++i) hits += target[i] == response[i] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(std::max(target.size(), response.size()));
}

}  // namespace sspo
