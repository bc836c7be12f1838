#include "sspo/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sspo/errors.hpp"
#include "sspo/group.hpp"

namespace sspo {

GradCheckInstance make_instance(const InstanceSpec& spec, std::uint64_t seed) {
    if (spec.group_size < 2) throw InvalidInput("gradcheck instance: group_size must be >= 2");
    if (spec.buckets_used < 1 || spec.buckets_used > spec.prompt_buckets)
        throw InvalidInput("gradcheck instance: buckets_used must lie in [1, prompt_buckets]");
    Rng rng(seed, {static_cast<std::uint64_t>(StreamTag::Instance)});
    GradCheckInstance inst{PolicyParams(spec.vocab_size, spec.context_order, spec.prompt_buckets), {}, {}};
    inst.behavior = inst.params;
    for (double& x : inst.behavior.logits()) x = spec.logit_scale * rng.normal();

    for (int g = 0; g < spec.num_groups; ++g) {
        const int bucket = static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.buckets_used)));
        const std::vector<Token> prompt{bucket};
        TrajectoryGroup group;
        std::vector<double> rewards;
        for (int i = 0; i < spec.group_size; ++i) {
            Trajectory t = sample_response(inst.behavior, bucket, prompt, spec.max_len, rng);
            t.prompt_id = g;
            t.reward = rng.uniform();
            rewards.push_back(t.reward);
            group.trajectories.push_back(std::move(t));
        }
        group.advantages = normalize_advantages(rewards);
        inst.groups.push_back(std::move(group));
    }

    inst.params = inst.behavior;
    for (double& x : inst.params.logits()) x += spec.drift * rng.normal();
    return inst;
}

std::string GradCheckReport::to_string() const {
    std::ostringstream os;
    os << "objective=" << sspo::to_string(kind) << " pass=" << (pass ? "true" : "false")
       << " coords_checked=" << coords_checked << " untouched_checked=" << untouched_checked
       << " skipped_kink_coords=" << skipped_kink_coords << " max_rel_err=" << max_rel_err
       << " max_abs_err=" << max_abs_err << " worst_coord=" << worst_coord << " analytic=" << worst_analytic
       << " finite_diff=" << worst_finite_diff;
    if (!failure.empty()) os << " failure=\"" << failure << "\"";
    return os.str();
}

double central_difference(const std::function<double(double)>& fn, double x, double h) {
    if (!(h > 0.0)) throw InvalidInput("central_difference: h must be > 0");
    const double up = x + h;
    const double down = x - h;
    const double fu = fn(up);
    const double fd = fn(down);
    if (!std::isfinite(fu) || !std::isfinite(fd)) throw NumericError("central_difference: non-finite evaluation");
    return (fu - fd) / (up - down);
}

double step_for(double theta) { return kRelativeStep * std::max(1.0, std::abs(theta)); }

double finite_diff_grad(ObjectiveKind kind, std::span<const TrajectoryGroup> groups, const PolicyParams& params,
                        const GateConfig& cfg, std::size_t coord, double h) {
    if (coord >= params.num_params()) throw InvalidInput("finite_diff_grad: coordinate out of range");
    PolicyParams probe = params;
    auto value_at = [&](double x) {
        probe.logits()[coord] = x;
        return evaluate_value(kind, groups, probe, cfg);
    };
    return central_difference(value_at, params.logits()[coord], h);
}

std::vector<bool> touched_rows(std::span<const TrajectoryGroup> groups, const PolicyParams& params) {
    std::vector<bool> rows(params.num_states(), false);
    for (const auto& g : groups)
        for (const auto& t : g.trajectories)
            for (std::size_t i = 0; i < t.length(); ++i) rows[state_at(params, t.prompt_bucket, t.response_tokens, i)] = true;
    return rows;
}

namespace {

bool near_bound(double rho, double advantage, const GateConfig& cfg, double band) {
    const double bound = advantage > 0.0 ? 1.0 + cfg.eps_high : 1.0 - cfg.eps_low;
    return std::abs(rho - bound) < band;
}

}  // namespace

std::vector<bool> kink_rows(ObjectiveKind kind, std::span<const TrajectoryGroup> groups, const PolicyParams& params,
                            const GateConfig& cfg, double band) {
    std::vector<bool> rows(params.num_states(), false);
    if (kind == ObjectiveKind::Sapo || kind == ObjectiveKind::Sspo) return rows;
    for (const auto& g : groups) {
        for (std::size_t i = 0; i < g.size(); ++i) {
            const Trajectory& t = g.trajectories[i];
            const double adv = g.advantages[i];
            if (adv == 0.0) continue;
            const auto log_ratios = token_log_ratios(t, params);
            if (kind == ObjectiveKind::Gspo) {
                if (!near_bound(std::exp(sequence_log_ratio_from_logs(log_ratios)), adv, cfg, band)) continue;
                for (std::size_t k = 0; k < t.length(); ++k)
                    rows[state_at(params, t.prompt_bucket, t.response_tokens, k)] = true;
                continue;
            }
            for (std::size_t k = 0; k < t.length(); ++k)
                if (near_bound(std::exp(log_ratios[k]), adv, cfg, band))
                    rows[state_at(params, t.prompt_bucket, t.response_tokens, k)] = true;
        }
    }
    return rows;
}

GradCheckReport check_gradient(ObjectiveKind kind, std::span<const TrajectoryGroup> groups,
                               const PolicyParams& params, const GateConfig& cfg, double rtol, double atol,
                               std::uint64_t seed, int untouched_samples) {
    GradCheckReport report;
    report.kind = kind;
    const SurrogateResult analytic = evaluate(kind, groups, params, cfg);
    const auto touched = touched_rows(groups, params);
    const auto kinks = kink_rows(kind, groups, params, cfg);
    const auto vocab = static_cast<std::size_t>(params.vocab_size());

    std::size_t touched_coords = 0;
    for (bool b : touched) touched_coords += b ? vocab : 0;
    if (touched_coords > 5000) throw InvalidInput("gradcheck: instance touches more than 5000 coordinates");

    bool ok = true;
    double worst_badness = -1.0;
    auto record = [&](std::size_t coord, double a, double f) {
        const double abs_err = std::abs(a - f);
        const double scale = std::max(std::abs(a), std::abs(f));
        const double rel_err = scale > 0.0 ? abs_err / scale : 0.0;
        report.max_abs_err = std::max(report.max_abs_err, abs_err);
        if (scale > atol) report.max_rel_err = std::max(report.max_rel_err, rel_err);
        const bool coord_ok = rel_err <= rtol || abs_err <= atol;
        // failing coordinates always outrank passing ones
        const double badness = (coord_ok ? 0.0 : 1.0) + abs_err / (1.0 + abs_err);
        if (badness > worst_badness) {
            worst_badness = badness;
            report.worst_coord = coord;
            report.worst_analytic = a;
            report.worst_finite_diff = f;
        }
        if (!coord_ok && ok) {
            ok = false;
            std::ostringstream os;
            os << "coordinate " << coord << " (state " << coord / vocab << ", token " << coord % vocab
               << ") rel_err=" << rel_err << " abs_err=" << abs_err;
            report.failure = os.str();
        }
    };

    std::vector<std::size_t> untouched;
    for (std::size_t s = 0; s < params.num_states(); ++s) {
        for (std::size_t j = 0; j < vocab; ++j) {
            const std::size_t coord = s * vocab + j;
            if (!touched[s]) {
                untouched.push_back(coord);
                continue;
            }
            if (kinks[s]) {
                ++report.skipped_kink_coords;
                continue;
            }
            const double h = step_for(params.logits()[coord]);
            record(coord, analytic.gradient[coord], finite_diff_grad(kind, groups, params, cfg, coord, h));
            ++report.coords_checked;
        }
    }

    Rng rng(seed, {static_cast<std::uint64_t>(StreamTag::Instance), 0x756e74ULL});
    rng.shuffle(std::span<std::size_t>(untouched));
    const std::size_t sample = std::min(untouched.size(), static_cast<std::size_t>(std::max(0, untouched_samples)));
    for (std::size_t n = 0; n < sample; ++n) {
        const std::size_t coord = untouched[n];
        const double a = analytic.gradient[coord];
        const double f = finite_diff_grad(kind, groups, params, cfg, coord, step_for(params.logits()[coord]));
        ++report.untouched_checked;
        if (a != 0.0 && ok) {
            ok = false;
            report.failure = "untouched coordinate " + std::to_string(coord) + " has nonzero analytic gradient";
            report.worst_coord = coord;
            report.worst_analytic = a;
            report.worst_finite_diff = f;
        }
        report.max_abs_err = std::max(report.max_abs_err, std::abs(a - f));
    }
    report.pass = ok;
    return report;
}

GradCheckReport run_gradcheck(ObjectiveKind kind, const InstanceSpec& spec, double rtol, double atol,
                              std::uint64_t seed, const GateConfig& cfg) {
    const GradCheckInstance inst = make_instance(spec, seed);
    return check_gradient(kind, inst.groups, inst.params, cfg, rtol, atol, seed);
}

}  // namespace sspo
