#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "sspo/rng.hpp"
#include "sspo/trajectory.hpp"

namespace sspo {

/// Conditioning for one decoding step: the prompt bucket plus the last k
/// response tokens, oldest first. Positions before the response starts hold
/// the BOS pad, which reuses the EOS index: EOS ends generation, so it never
/// occurs inside a real context.
struct ContextState {
    int prompt_bucket = 0;
    std::vector<Token> last_k;
};

/// Tabular order-k autoregressive softmax policy.
///
/// Logits form a dense row-major table of shape [P * V^k, V]. Row index of
/// a state is `bucket * V^k + sum_j last_k[j] * V^(k-1-j)`, so for k = 2 the
/// context [a, b] maps to `a * V + b`. EOS is token V - 1.
class PolicyParams {
public:
    PolicyParams() = default;
    /// Zero-initialised (uniform) policy. Throws InvalidInput unless V >= 2, k >= 1, P >= 1.
    PolicyParams(int vocab_size, int context_order, int prompt_buckets);

    int vocab_size() const noexcept { return vocab_; }
    int context_order() const noexcept { return order_; }
    int prompt_buckets() const noexcept { return buckets_; }
    Token eos() const noexcept { return vocab_ - 1; }
    Token bos_pad() const noexcept { return vocab_ - 1; }

    std::size_t num_states() const noexcept { return states_; }
    std::size_t num_params() const noexcept { return logits_.size(); }

    std::span<double> logits() noexcept { return logits_; }
    std::span<const double> logits() const noexcept { return logits_; }
    std::span<double> row(std::size_t state) noexcept;
    std::span<const double> row(std::size_t state) const noexcept;

    friend bool operator==(const PolicyParams&, const PolicyParams&) = default;

private:
    int vocab_ = 0;
    int order_ = 0;
    int buckets_ = 0;
    std::size_t states_ = 0;
    std::vector<double> logits_;
};

std::size_t state_index(const PolicyParams& params, int prompt_bucket, std::span<const Token> last_k);
std::size_t state_index(const PolicyParams& params, const ContextState& state);

/// State before emitting response position `t` (0-based) of `response`.
std::size_t state_at(const PolicyParams& params, int prompt_bucket, std::span<const Token> response, std::size_t t);

/// Stable log-softmax of a logits row.
void log_softmax(std::span<const double> row, std::span<double> out);

double log_prob(const PolicyParams& params, std::size_t state, Token token);
double log_prob(const PolicyParams& params, const ContextState& state, Token token);

/// d log pi(token | state) / d logits[state, :] = one_hot(token) - softmax(row).
/// Every other row of the gradient is zero.
std::vector<double> grad_log_prob(const PolicyParams& params, std::size_t state, Token token);

double entropy(const PolicyParams& params, std::size_t state);

/// Ancestral sampling at temperature 1 until EOS or `max_len` tokens.
/// `behavior_logps` are taken from `params` at sampling time.
Trajectory sample_response(const PolicyParams& params, int prompt_bucket, std::span<const Token> prompt,
                           int max_len, Rng& rng);

/// Binary checkpoint, all fields little-endian:
///   bytes 0..7   magic "SSPOCKPT"
///   u32          format version (1)
///   u32 V, u32 k, u32 P
///   u64          number of logits (P * V^k * V)
///   f64[]        logits, row-major
void save_checkpoint(const PolicyParams& params, const std::filesystem::path& path);
PolicyParams load_checkpoint(const std::filesystem::path& path);

}  // namespace sspo
