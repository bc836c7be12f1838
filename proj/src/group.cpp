#include "sspo/group.hpp"

#include <cmath>
#include <string>

#include "sspo/errors.hpp"

namespace sspo {

void validate(const Trajectory& trajectory) {
    if (trajectory.length() < 1) throw InvalidInput("trajectory: empty response");
    if (trajectory.behavior_logps.size() != trajectory.length())
        throw InvalidInput("trajectory: behavior_logps size does not match response length");
    for (double lp : trajectory.behavior_logps)
        if (!(lp <= 0.0)) throw InvalidInput("trajectory: behavior log-prob must be <= 0");
    if (!(trajectory.reward >= 0.0 && trajectory.reward <= 1.0))
        throw InvalidInput("trajectory: reward outside [0,1]");
}

void validate(const TrajectoryGroup& group) {
    if (group.trajectories.empty()) throw InvalidInput("group: no trajectories");
    if (group.advantages.size() != group.trajectories.size())
        throw InvalidInput("group: " + std::to_string(group.advantages.size()) + " advantages for " +
                           std::to_string(group.trajectories.size()) + " trajectories");
    const int id = group.trajectories.front().prompt_id;
    for (const auto& t : group.trajectories) {
        if (t.prompt_id != id) throw InvalidInput("group: trajectories do not share a prompt_id");
        validate(t);
    }
}

std::vector<double> normalize_advantages(std::span<const double> rewards, double eps) {
    if (rewards.size() < 2) throw InvalidInput("normalize_advantages: group needs at least 2 rewards");
    if (!(eps > 0.0)) throw InvalidInput("normalize_advantages: eps must be > 0");
    const double n = static_cast<double>(rewards.size());
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= n;
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    const double std_dev = std::sqrt(var / n);
    std::vector<double> adv(rewards.size(), 0.0);
    if (std_dev < eps) return adv;
    for (std::size_t i = 0; i < rewards.size(); ++i) adv[i] = (rewards[i] - mean) / std_dev;
    return adv;
}

std::vector<double> token_log_ratios(const Trajectory& trajectory, const PolicyParams& params) {
    std::vector<double> out(trajectory.length());
    for (std::size_t t = 0; t < trajectory.length(); ++t) {
        const std::size_t s = state_at(params, trajectory.prompt_bucket, trajectory.response_tokens, t);
        const double lr = log_prob(params, s, trajectory.response_tokens[t]) - trajectory.behavior_logps[t];
        if (!std::isfinite(lr))
            throw NumericError("token_ratios: non-finite log ratio in trajectory with prompt_id " +
                               std::to_string(trajectory.prompt_id) + " at t=" + std::to_string(t));
        out[t] = lr;
    }
    return out;
}

std::vector<double> token_ratios(const Trajectory& trajectory, const PolicyParams& params) {
    auto r = token_log_ratios(trajectory, params);
    for (std::size_t t = 0; t < r.size(); ++t) {
        r[t] = std::exp(r[t]);
        if (!(r[t] > 0.0) || !std::isfinite(r[t]))
            throw NumericError("token_ratios: ratio under/overflow in trajectory with prompt_id " +
                               std::to_string(trajectory.prompt_id) + " at t=" + std::to_string(t));
    }
    return r;
}

namespace {

std::vector<double> logs_of(std::span<const double> ratios) {
    std::vector<double> logs(ratios.size());
    for (std::size_t t = 0; t < ratios.size(); ++t) {
        if (!(ratios[t] > 0.0)) throw InvalidInput("ratio must be > 0");
        logs[t] = std::log(ratios[t]);
    }
    return logs;
}

}  // namespace

double sequence_log_ratio_from_logs(std::span<const double> log_ratios) {
    if (log_ratios.empty()) throw InvalidInput("sequence ratio of an empty sequence");
    double sum = 0.0;
    for (double l : log_ratios) sum += l;
    return sum / static_cast<double>(log_ratios.size());
}

double sequence_ratio(std::span<const double> ratios) {
    if (ratios.empty()) throw InvalidInput("sequence_ratio: empty ratio list");
    return std::exp(sequence_log_ratio_from_logs(logs_of(ratios)));
}

double intra_sequence_dispersion_from_logs(std::span<const double> log_ratios) {
    const double log_s = sequence_log_ratio_from_logs(log_ratios);
    double acc = 0.0;
    for (double l : log_ratios) acc += (l - log_s) * (l - log_s);
    return acc / static_cast<double>(log_ratios.size());
}

double intra_sequence_dispersion(std::span<const double> ratios) {
    if (ratios.empty()) throw InvalidInput("intra_sequence_dispersion: empty ratio list");
    return intra_sequence_dispersion_from_logs(logs_of(ratios));
}

}  // namespace sspo
