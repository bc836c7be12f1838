#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sspo/rng.hpp"
#include "sspo/trajectory.hpp"

namespace sspo {

enum class TaskKind { CopyLast, SumMod, RepeatN };
enum class RewardMode { Binary, Fractional };

/// Synthetic verifiable-reward task.
///
/// `vocab_size` counts every token including EOS (= vocab_size - 1), so
/// payload tokens are [0, vocab_size - 1). Targets:
///   copy_last  [last prompt token, EOS]
///   sum_mod    [(sum of prompt tokens) mod (vocab_size - 1), EOS]
///   repeat_n   [last prompt token] * n, then EOS
struct TaskSpec {
    TaskKind kind = TaskKind::CopyLast;
    int vocab_size = 8;
    int prompt_len = 2;
    int max_len = 4;
    RewardMode reward_mode = RewardMode::Binary;
    int n = 3;

    Token eos() const noexcept { return vocab_size - 1; }
    int payload_size() const noexcept { return vocab_size - 1; }
    std::size_t target_length() const noexcept;

    /// Throws ValidationError on V < 3, prompt_len < 1, max_len shorter than the target, n < 1.
    void validate() const;

    friend bool operator==(const TaskSpec&, const TaskSpec&) = default;
};

struct Prompt {
    std::vector<Token> tokens;
    int bucket = 0;
};

std::string_view to_string(TaskKind kind) noexcept;
std::string_view to_string(RewardMode mode) noexcept;
TaskKind parse_task_kind(std::string_view name);
RewardMode parse_reward_mode(std::string_view name);

/// The token the task asks for (the first target position).
Token answer_token(const TaskSpec& spec, std::span<const Token> prompt);

/// Full target sequence, EOS included.
std::vector<Token> target_sequence(const TaskSpec& spec, std::span<const Token> prompt);

/// Bucket = answer token mod `prompt_buckets`.
int prompt_bucket(const TaskSpec& spec, std::span<const Token> prompt, int prompt_buckets);

/// Uniform random payload tokens plus their bucket.
Prompt make_prompt(const TaskSpec& spec, int prompt_buckets, Rng& rng);

/// Binary: 1 iff response equals the target exactly. Fractional: matching
/// positions divided by max(|target|, |response|).
double reward(const TaskSpec& spec, std::span<const Token> prompt, std::span<const Token> response);

}  // namespace sspo
