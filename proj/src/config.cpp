#include "sspo/config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <string_view>

#include "sspo/errors.hpp"

namespace sspo {

using nlohmann::json;

namespace {

/// Key path helper for error messages.
std::string path_of(std::string_view section, std::string_view key) {
    return section.empty() ? std::string(key) : std::string(section) + "." + std::string(key);
}

void reject_unknown(const json& obj, std::string_view section, std::initializer_list<std::string_view> allowed) {
    if (!obj.is_object()) throw ValidationError(std::string(section) + " must be a JSON object");
    for (const auto& [key, value] : obj.items()) {
        bool known = false;
        for (auto a : allowed) known = known || key == a;
        if (!known) throw ValidationError("unknown key '" + path_of(section, key) + "'");
    }
}

class Section {
public:
    Section(const json* obj, std::string name) : obj_(obj), name_(std::move(name)) {}

    bool has(std::string_view key) const { return obj_ != nullptr && obj_->contains(key); }

    void require(std::string_view key) const {
        if (!has(key)) throw ValidationError("missing required key '" + path_of(name_, key) + "'");
    }

    int get_int(std::string_view key, int fallback) const {
        if (!has(key)) return fallback;
        const json& v = obj_->at(key);
        if (!v.is_number_integer()) throw ValidationError(path_of(name_, key) + " must be an integer");
        const auto x = v.get<long long>();
        if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
            throw ValidationError(path_of(name_, key) + " is out of range");
        return static_cast<int>(x);
    }

    std::uint64_t get_u64(std::string_view key, std::uint64_t fallback) const {
        if (!has(key)) return fallback;
        const json& v = obj_->at(key);
        if (!v.is_number_unsigned()) throw ValidationError(path_of(name_, key) + " must be a non-negative integer");
        return v.get<std::uint64_t>();
    }

    double get_real(std::string_view key, double fallback, bool null_is_inf = false) const {
        if (!has(key)) return fallback;
        const json& v = obj_->at(key);
        if (null_is_inf && v.is_null()) return std::numeric_limits<double>::infinity();
        if (!v.is_number()) throw ValidationError(path_of(name_, key) + " must be a number");
        return v.get<double>();
    }

    bool get_bool(std::string_view key, bool fallback) const {
        if (!has(key)) return fallback;
        const json& v = obj_->at(key);
        if (!v.is_boolean()) throw ValidationError(path_of(name_, key) + " must be a boolean");
        return v.get<bool>();
    }

    std::string get_string(std::string_view key, std::string fallback) const {
        if (!has(key)) return fallback;
        const json& v = obj_->at(key);
        if (!v.is_string()) throw ValidationError(path_of(name_, key) + " must be a string");
        return v.get<std::string>();
    }

private:
    const json* obj_;
    std::string name_;
};

const json* child(const json& doc, std::string_view key) { return doc.contains(key) ? &doc.at(key) : nullptr; }

}  // namespace

ExperimentConfig parse_config(const json& doc, std::optional<ObjectiveKind> objective_override) {
    reject_unknown(doc, "config", {"task", "policy", "objective", "gate", "train", "output_dir"});
    ExperimentConfig cfg;
    TrainConfig& tc = cfg.train;
    const Section root(&doc, "");

    if (objective_override) {
        tc.objective = *objective_override;
    } else {
        root.require("objective");
        tc.objective = parse_objective(root.get_string("objective", ""));
    }
    if (root.has("objective") && objective_override) parse_objective(root.get_string("objective", ""));

    root.require("task");
    const json* task = child(doc, "task");
    reject_unknown(*task, "task", {"kind", "vocab_size", "prompt_len", "max_len", "reward_mode", "n"});
    const Section ts(task, "task");
    ts.require("kind");
    tc.task.kind = parse_task_kind(ts.get_string("kind", ""));
    tc.task.vocab_size = ts.get_int("vocab_size", tc.task.vocab_size);
    tc.task.prompt_len = ts.get_int("prompt_len", tc.task.prompt_len);
    tc.task.max_len = ts.get_int("max_len", tc.task.max_len);
    tc.task.reward_mode = parse_reward_mode(ts.get_string("reward_mode", "binary"));
    tc.task.n = ts.get_int("n", tc.task.n);

    const json* policy = child(doc, "policy");
    if (policy) reject_unknown(*policy, "policy", {"k", "prompt_buckets"});
    const Section ps(policy, "policy");
    tc.context_order = ps.get_int("k", 1);
    tc.prompt_buckets = ps.get_int("prompt_buckets", std::max(1, tc.task.vocab_size - 1));

    const json* gate = child(doc, "gate");
    if (gate) {
        reject_unknown(*gate, "gate", {"tau_pos", "tau_neg", "eps_low", "eps_high", "allow_tau_inversion"});
        const Section gs(gate, "gate");
        // a partial gate section for the chosen objective is an error rather than a silent default
        if (tc.objective == ObjectiveKind::Sapo || tc.objective == ObjectiveKind::Sspo) {
            gs.require("tau_pos");
            gs.require("tau_neg");
        } else {
            gs.require("eps_low");
            gs.require("eps_high");
        }
        tc.gate.tau_pos = gs.get_real("tau_pos", tc.gate.tau_pos);
        tc.gate.tau_neg = gs.get_real("tau_neg", tc.gate.tau_neg);
        tc.gate.eps_low = gs.get_real("eps_low", tc.gate.eps_low);
        tc.gate.eps_high = gs.get_real("eps_high", tc.gate.eps_high, true);
        tc.gate.allow_tau_inversion = gs.get_bool("allow_tau_inversion", false);
    }

    const json* train = child(doc, "train");
    if (train)
        reject_unknown(*train, "train",
                       {"G", "B", "E", "M", "optimizer", "learning_rate", "total_updates", "seed", "advantage_eps",
                        "adam_beta1", "adam_beta2", "adam_eps", "checkpoint_every"});
    const Section trs(train, "train");
    tc.group_size = trs.get_int("G", tc.group_size);
    tc.prompts_per_rollout = trs.get_int("B", tc.prompts_per_rollout);
    tc.epochs_per_rollout = trs.get_int("E", tc.epochs_per_rollout);
    tc.minibatches_per_epoch = trs.get_int("M", tc.minibatches_per_epoch);
    tc.optimizer = parse_optimizer(trs.get_string("optimizer", "adam"));
    tc.learning_rate = trs.get_real("learning_rate", tc.learning_rate);
    tc.total_updates = trs.get_int("total_updates", tc.total_updates);
    tc.seed = trs.get_u64("seed", tc.seed);
    tc.advantage_eps = trs.get_real("advantage_eps", tc.advantage_eps);
    tc.adam_beta1 = trs.get_real("adam_beta1", tc.adam_beta1);
    tc.adam_beta2 = trs.get_real("adam_beta2", tc.adam_beta2);
    tc.adam_eps = trs.get_real("adam_eps", tc.adam_eps);
    cfg.checkpoint_every = trs.get_int("checkpoint_every", 0);
    if (cfg.checkpoint_every < 0) throw ValidationError("train.checkpoint_every must be >= 0");

    cfg.output_dir = root.get_string("output_dir", cfg.output_dir);
    tc.validate();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path, std::optional<ObjectiveKind> objective_override) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot read config file " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return parse_config(doc, objective_override);
}

json to_json(const ExperimentConfig& config) {
    const TrainConfig& tc = config.train;
    json doc;
    doc["task"] = {{"kind", std::string(to_string(tc.task.kind))},
                   {"vocab_size", tc.task.vocab_size},
                   {"prompt_len", tc.task.prompt_len},
                   {"max_len", tc.task.max_len},
                   {"reward_mode", std::string(to_string(tc.task.reward_mode))},
                   {"n", tc.task.n}};
    doc["policy"] = {{"k", tc.context_order}, {"prompt_buckets", tc.prompt_buckets}};
    doc["objective"] = std::string(to_string(tc.objective));
    json eps_high = std::isinf(tc.gate.eps_high) ? json(nullptr) : json(tc.gate.eps_high);
    doc["gate"] = {{"tau_pos", tc.gate.tau_pos},
                   {"tau_neg", tc.gate.tau_neg},
                   {"eps_low", tc.gate.eps_low},
                   {"eps_high", eps_high},
                   {"allow_tau_inversion", tc.gate.allow_tau_inversion}};
    doc["train"] = {{"G", tc.group_size},
                    {"B", tc.prompts_per_rollout},
                    {"E", tc.epochs_per_rollout},
                    {"M", tc.minibatches_per_epoch},
                    {"optimizer", std::string(to_string(tc.optimizer))},
                    {"learning_rate", tc.learning_rate},
                    {"total_updates", tc.total_updates},
                    {"seed", tc.seed},
                    {"advantage_eps", tc.advantage_eps},
                    {"adam_beta1", tc.adam_beta1},
                    {"adam_beta2", tc.adam_beta2},
                    {"adam_eps", tc.adam_eps},
                    {"checkpoint_every", config.checkpoint_every}};
    doc["output_dir"] = config.output_dir;
    return doc;
}

}  // namespace sspo
