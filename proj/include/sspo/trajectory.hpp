#pragma once

#include <cstddef>
#include <vector>

namespace sspo {

using Token = int;

/// One sampled response y to a prompt x, with the behavior policy's
/// per-token log-probabilities recorded at sampling time.
struct Trajectory {
    int prompt_id = 0;      ///< prompt slot within the rollout; shared across a group
    int prompt_bucket = 0;  ///< conditioning bucket fed to the policy
    std::vector<Token> prompt_tokens;
    std::vector<Token> response_tokens;  ///< includes EOS when emitted
    std::vector<double> behavior_logps;  ///< log pi_old(y_t | x, y_<t), one per response token
    double reward = 0.0;

    std::size_t length() const noexcept { return response_tokens.size(); }
};

/// G responses to one prompt plus their group-relative advantages.
struct TrajectoryGroup {
    std::vector<Trajectory> trajectories;
    std::vector<double> advantages;

    std::size_t size() const noexcept { return trajectories.size(); }
};

/// Throws InvalidInput when a Trajectory violates its invariants
/// (length >= 1, one log-prob per token, log-probs <= 0, reward in [0,1]).
void validate(const Trajectory& trajectory);

/// Shared prompt_id, advantage count matching trajectory count, valid members.
void validate(const TrajectoryGroup& group);

}  // namespace sspo
