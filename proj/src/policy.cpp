#include "sspo/policy.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>

#include "sspo/errors.hpp"

namespace sspo {

PolicyParams::PolicyParams(int vocab_size, int context_order, int prompt_buckets)
    : vocab_(vocab_size), order_(context_order), buckets_(prompt_buckets) {
    if (vocab_size < 2) throw InvalidInput("policy: vocab_size must be >= 2");
    if (context_order < 1) throw InvalidInput("policy: context_order must be >= 1");
    if (prompt_buckets < 1) throw InvalidInput("policy: prompt_buckets must be >= 1");
    std::size_t contexts = 1;
    for (int j = 0; j < context_order; ++j) {
        if (contexts > (std::size_t{1} << 32) / static_cast<std::size_t>(vocab_size))
            throw InvalidInput("policy: table too large");
        contexts *= static_cast<std::size_t>(vocab_size);
    }
    states_ = contexts * static_cast<std::size_t>(prompt_buckets);
    logits_.assign(states_ * static_cast<std::size_t>(vocab_size), 0.0);
}

std::span<double> PolicyParams::row(std::size_t state) noexcept {
    return std::span<double>(logits_).subspan(state * static_cast<std::size_t>(vocab_), static_cast<std::size_t>(vocab_));
}

std::span<const double> PolicyParams::row(std::size_t state) const noexcept {
    return std::span<const double>(logits_).subspan(state * static_cast<std::size_t>(vocab_),
                                                    static_cast<std::size_t>(vocab_));
}

std::size_t state_index(const PolicyParams& params, int prompt_bucket, std::span<const Token> last_k) {
    const int v = params.vocab_size();
    if (prompt_bucket < 0 || prompt_bucket >= params.prompt_buckets())
        throw InvalidInput("state_index: prompt bucket " + std::to_string(prompt_bucket) + " out of range");
    if (static_cast<int>(last_k.size()) != params.context_order())
        throw InvalidInput("state_index: context length must equal the policy order");
    std::size_t index = static_cast<std::size_t>(prompt_bucket);
    for (Token t : last_k) {
        if (t < 0 || t >= v) throw InvalidInput("state_index: token " + std::to_string(t) + " out of range");
        index = index * static_cast<std::size_t>(v) + static_cast<std::size_t>(t);
    }
    return index;
}

std::size_t state_index(const PolicyParams& params, const ContextState& state) {
    return state_index(params, state.prompt_bucket, state.last_k);
}

std::size_t state_at(const PolicyParams& params, int prompt_bucket, std::span<const Token> response, std::size_t t) {
    const auto k = static_cast<std::size_t>(params.context_order());
    std::array<Token, 16> small{};
    std::vector<Token> large;
    std::span<Token> ctx;
    if (k <= small.size()) {
        ctx = std::span<Token>(small.data(), k);
    } else {
        large.resize(k);
        ctx = large;
    }
    for (std::size_t j = 0; j < k; ++j) {
        // position t - k + j of the response, BOS-padded on the left
        const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(t) - static_cast<std::ptrdiff_t>(k) +
                                   static_cast<std::ptrdiff_t>(j);
        ctx[j] = pos < 0 ? params.bos_pad() : response[static_cast<std::size_t>(pos)];
    }
    return state_index(params, prompt_bucket, ctx);
}

namespace {

// log_prob and log_softmax share this so recomputed log-probs match sampled ones bit for bit
double log_sum_exp(std::span<const double> row) {
    const double hi = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double z : row) sum += std::exp(z - hi);
    return hi + std::log(sum);
}

}  // namespace

void log_softmax(std::span<const double> row, std::span<double> out) {
    const double lse = log_sum_exp(row);
    for (std::size_t j = 0; j < row.size(); ++j) out[j] = row[j] - lse;
}

namespace {

void check_state_token(const PolicyParams& params, std::size_t state, Token token) {
    if (state >= params.num_states()) throw InvalidInput("policy: state index out of range");
    if (token < 0 || token >= params.vocab_size())
        throw InvalidInput("policy: token " + std::to_string(token) + " out of range");
}

}  // namespace

double log_prob(const PolicyParams& params, std::size_t state, Token token) {
    check_state_token(params, state, token);
    const auto row = params.row(state);
    return row[static_cast<std::size_t>(token)] - log_sum_exp(row);
}

double log_prob(const PolicyParams& params, const ContextState& state, Token token) {
    return log_prob(params, state_index(params, state), token);
}

std::vector<double> grad_log_prob(const PolicyParams& params, std::size_t state, Token token) {
    check_state_token(params, state, token);
    std::vector<double> g(static_cast<std::size_t>(params.vocab_size()));
    log_softmax(params.row(state), g);
    for (double& x : g) x = -std::exp(x);
    g[static_cast<std::size_t>(token)] += 1.0;
    return g;
}

double entropy(const PolicyParams& params, std::size_t state) {
    if (state >= params.num_states()) throw InvalidInput("entropy: state index out of range");
    std::vector<double> lp(static_cast<std::size_t>(params.vocab_size()));
    log_softmax(params.row(state), lp);
    double h = 0.0;
    for (double l : lp) {
        const double p = std::exp(l);
        if (p > 0.0) h -= p * l;
    }
    return std::clamp(h, 0.0, std::log(static_cast<double>(params.vocab_size())));
}

Trajectory sample_response(const PolicyParams& params, int prompt_bucket, std::span<const Token> prompt,
                           int max_len, Rng& rng) {
    if (max_len < 1) throw InvalidInput("sample_response: max_len must be >= 1");
    Trajectory traj;
    traj.prompt_bucket = prompt_bucket;
    traj.prompt_tokens.assign(prompt.begin(), prompt.end());
    std::vector<double> lp(static_cast<std::size_t>(params.vocab_size()));
    for (int t = 0; t < max_len; ++t) {
        const std::size_t s = state_at(params, prompt_bucket, traj.response_tokens, static_cast<std::size_t>(t));
        log_softmax(params.row(s), lp);
        // inverse CDF; the last token absorbs round-off
        const double u = rng.uniform();
        double cdf = 0.0;
        Token pick = params.vocab_size() - 1;
        for (int j = 0; j < params.vocab_size(); ++j) {
            cdf += std::exp(lp[static_cast<std::size_t>(j)]);
            if (u < cdf) {
                pick = j;
                break;
            }
        }
        // a zero-probability token can only be picked by round-off; walk back to a supported one
        while (pick > 0 && !(std::exp(lp[static_cast<std::size_t>(pick)]) > 0.0)) --pick;
        traj.response_tokens.push_back(pick);
        traj.behavior_logps.push_back(lp[static_cast<std::size_t>(pick)]);
        if (pick == params.eos()) break;
    }
    return traj;
}

namespace {

constexpr std::array<char, 8> kMagic{'S', 'S', 'P', 'O', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kFormatVersion = 1;

template <typename U>
void put_le(std::ostream& os, U value) {
    std::array<char, sizeof(U)> bytes{};
    for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
    os.write(bytes.data(), bytes.size());
}

template <typename U>
U get_le(std::istream& is) {
    std::array<unsigned char, sizeof(U)> bytes{};
    is.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
    if (!is) throw InvalidInput("checkpoint: truncated file");
    U value = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
    return value;
}

}  // namespace

void save_checkpoint(const PolicyParams& params, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw InvalidInput("checkpoint: cannot open " + path.string() + " for writing");
    os.write(kMagic.data(), kMagic.size());
    put_le<std::uint32_t>(os, kFormatVersion);
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(params.vocab_size()));
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(params.context_order()));
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(params.prompt_buckets()));
    put_le<std::uint64_t>(os, static_cast<std::uint64_t>(params.num_params()));
    for (double x : params.logits()) put_le<std::uint64_t>(os, std::bit_cast<std::uint64_t>(x));
    if (!os) throw InvalidInput("checkpoint: write failed for " + path.string());
}

PolicyParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InvalidInput("checkpoint: cannot open " + path.string());
    std::array<char, 8> magic{};
    is.read(magic.data(), magic.size());
    if (!is || magic != kMagic) throw InvalidInput("checkpoint: bad magic in " + path.string());
    if (get_le<std::uint32_t>(is) != kFormatVersion) throw InvalidInput("checkpoint: unsupported version");
    const auto v = get_le<std::uint32_t>(is);
    const auto k = get_le<std::uint32_t>(is);
    const auto p = get_le<std::uint32_t>(is);
    PolicyParams params(static_cast<int>(v), static_cast<int>(k), static_cast<int>(p));
    if (get_le<std::uint64_t>(is) != params.num_params()) throw InvalidInput("checkpoint: logit count mismatch");
    for (double& x : params.logits()) {
        x = std::bit_cast<double>(get_le<std::uint64_t>(is));
        if (!std::isfinite(x)) throw InvalidInput("checkpoint: non-finite logit");
    }
    return params;
}

}  // namespace sspo
