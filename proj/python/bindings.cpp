#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "sspo/commands.hpp"
#include "sspo/config.hpp"
#include "sspo/errors.hpp"
#include "sspo/gates.hpp"
#include "sspo/gradcheck.hpp"
#include "sspo/group.hpp"
#include "sspo/objectives.hpp"
#include "sspo/policy.hpp"
#include "sspo/tasks.hpp"
#include "sspo/trainer.hpp"

namespace py = pybind11;
using namespace sspo;

namespace {

py::array_t<double> to_numpy(std::span<const double> xs) {
    py::array_t<double> out(static_cast<py::ssize_t>(xs.size()));
    std::copy(xs.begin(), xs.end(), out.mutable_data());
    return out;
}

py::dict metrics_to_dict(const MetricsRow& r) {
    py::dict d;
    d["update_index"] = r.update_index;
    d["mean_reward"] = r.mean_reward;
    d["objective_value"] = r.objective_value;
    d["policy_entropy_mean"] = r.policy_entropy_mean;
    d["ratio_mean"] = r.ratio_mean;
    d["ratio_max"] = r.ratio_max;
    d["intra_seq_dispersion_mean"] = r.intra_seq_dispersion_mean;
    d["soft_clipped_fraction"] = r.soft_clipped_fraction;
    d["grad_norm"] = r.grad_norm;
    return d;
}

}  // namespace

PYBIND11_MODULE(_sspo, m) {
    m.doc() = "GRPO/GSPO/GMPO/SAPO/SSPO surrogate objectives with analytic gradients";

    py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_ValueError);
    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

    py::enum_<ObjectiveKind>(m, "ObjectiveKind")
        .value("GRPO", ObjectiveKind::Grpo)
        .value("GSPO", ObjectiveKind::Gspo)
        .value("GMPO", ObjectiveKind::Gmpo)
        .value("SAPO", ObjectiveKind::Sapo)
        .value("SSPO", ObjectiveKind::Sspo);

    py::class_<GateConfig>(m, "GateConfig")
        .def(py::init([](double tau_pos, double tau_neg, double eps_low, double eps_high, bool allow_tau_inversion) {
                 return make_gate_config(tau_pos, tau_neg, eps_low, eps_high, allow_tau_inversion);
             }),
             py::arg("tau_pos") = 1.0, py::arg("tau_neg") = 2.0, py::arg("eps_low") = 0.2, py::arg("eps_high") = 0.2,
             py::arg("allow_tau_inversion") = false)
        .def_readonly("tau_pos", &GateConfig::tau_pos)
        .def_readonly("tau_neg", &GateConfig::tau_neg)
        .def_readonly("eps_low", &GateConfig::eps_low)
        .def_readonly("eps_high", &GateConfig::eps_high)
        .def_readonly("allow_tau_inversion", &GateConfig::allow_tau_inversion);

    m.def("temperature", &temperature, py::arg("advantage"), py::arg("cfg"));
    m.def("clip_gate", &clip_gate, py::arg("rho"), py::arg("advantage"), py::arg("cfg"));
    m.def("soft_gate", &soft_gate, py::arg("rho"), py::arg("advantage"), py::arg("cfg"));
    m.def("soft_gate_derivative", &soft_gate_derivative, py::arg("rho"), py::arg("advantage"), py::arg("cfg"));
    m.def("sspo_gate", &sspo_gate, py::arg("rho"), py::arg("advantage"), py::arg("cfg"));
    m.def(
        "sspo_weight",
        [](double rho, double adv, const GateConfig& cfg) {
            const auto w = sspo_weight(rho, adv, cfg);
            return py::make_tuple(w.f_ratio, w.local_weight);
        },
        py::arg("rho"), py::arg("advantage"), py::arg("cfg"), "Returns (f'/f, rho * f'/f).");
    m.def(
        "geo_gate_log", [](const std::vector<double>& r, double a, const GateConfig& c) { return geo_gate_log(r, a, c); },
        py::arg("ratios"), py::arg("advantage"), py::arg("cfg"));

    m.def(
        "normalize_advantages", [](const std::vector<double>& r, double eps) { return normalize_advantages(r, eps); },
        py::arg("rewards"), py::arg("eps") = kDefaultAdvantageEps);
    m.def(
        "sequence_ratio", [](const std::vector<double>& r) { return sequence_ratio(r); }, py::arg("ratios"));
    m.def(
        "intra_sequence_dispersion", [](const std::vector<double>& r) { return intra_sequence_dispersion(r); },
        py::arg("ratios"));

    py::class_<PolicyParams>(m, "PolicyParams")
        .def(py::init<int, int, int>(), py::arg("vocab_size"), py::arg("context_order"), py::arg("prompt_buckets"))
        .def_property_readonly("vocab_size", &PolicyParams::vocab_size)
        .def_property_readonly("context_order", &PolicyParams::context_order)
        .def_property_readonly("prompt_buckets", &PolicyParams::prompt_buckets)
        .def_property_readonly("num_states", &PolicyParams::num_states)
        .def_property(
            "logits",
            [](const PolicyParams& p) {
                auto a = to_numpy(p.logits());
                a.resize({static_cast<py::ssize_t>(p.num_states()), static_cast<py::ssize_t>(p.vocab_size())});
                return a;
            },
            [](PolicyParams& p, py::array_t<double, py::array::c_style | py::array::forcecast> a) {
                if (static_cast<std::size_t>(a.size()) != p.num_params())
                    throw InvalidInput("logits: expected " + std::to_string(p.num_params()) + " values");
                std::copy(a.data(), a.data() + a.size(), p.logits().begin());
            })
        .def("copy", [](const PolicyParams& p) { return PolicyParams(p); })
        .def("save", [](const PolicyParams& p, const std::string& path) { save_checkpoint(p, path); })
        .def_static("load", [](const std::string& path) { return load_checkpoint(path); });

    m.def(
        "state_index",
        [](const PolicyParams& p, int bucket, const std::vector<Token>& last_k) { return state_index(p, bucket, last_k); },
        py::arg("params"), py::arg("prompt_bucket"), py::arg("last_k"));
    m.def(
        "log_prob", [](const PolicyParams& p, std::size_t s, Token t) { return log_prob(p, s, t); }, py::arg("params"),
        py::arg("state"), py::arg("token"));
    m.def(
        "grad_log_prob", [](const PolicyParams& p, std::size_t s, Token t) { return grad_log_prob(p, s, t); },
        py::arg("params"), py::arg("state"), py::arg("token"));
    m.def("entropy", &entropy, py::arg("params"), py::arg("state"));

    py::class_<Trajectory>(m, "Trajectory")
        .def(py::init<>())
        .def_readwrite("prompt_id", &Trajectory::prompt_id)
        .def_readwrite("prompt_bucket", &Trajectory::prompt_bucket)
        .def_readwrite("prompt_tokens", &Trajectory::prompt_tokens)
        .def_readwrite("response_tokens", &Trajectory::response_tokens)
        .def_readwrite("behavior_logps", &Trajectory::behavior_logps)
        .def_readwrite("reward", &Trajectory::reward)
        .def_property_readonly("length", &Trajectory::length);

    py::class_<TrajectoryGroup>(m, "TrajectoryGroup")
        .def(py::init<>())
        .def(py::init([](std::vector<Trajectory> ts, std::vector<double> adv) {
                 return TrajectoryGroup{std::move(ts), std::move(adv)};
             }),
             py::arg("trajectories"), py::arg("advantages"))
        .def_readwrite("trajectories", &TrajectoryGroup::trajectories)
        .def_readwrite("advantages", &TrajectoryGroup::advantages);

    m.def(
        "sample_response",
        [](const PolicyParams& p, int bucket, const std::vector<Token>& prompt, int max_len, std::uint64_t seed) {
            Rng rng(seed);
            return sample_response(p, bucket, prompt, max_len, rng);
        },
        py::arg("params"), py::arg("prompt_bucket"), py::arg("prompt"), py::arg("max_len"), py::arg("seed"));
    m.def("token_ratios", &token_ratios, py::arg("trajectory"), py::arg("params"));

    m.def(
        "evaluate",
        [](ObjectiveKind kind, const std::vector<TrajectoryGroup>& groups, const PolicyParams& params,
           const GateConfig& cfg) {
            auto r = evaluate(kind, groups, params, cfg);
            auto g = to_numpy(r.gradient);
            g.resize({static_cast<py::ssize_t>(params.num_states()), static_cast<py::ssize_t>(params.vocab_size())});
            return py::make_tuple(r.value, g);
        },
        py::arg("kind"), py::arg("groups"), py::arg("params"), py::arg("cfg"),
        "Returns (value, gradient) with gradient shaped like params.logits.");

    py::class_<TaskSpec>(m, "TaskSpec")
        .def(py::init([](const std::string& kind, int vocab_size, int prompt_len, int max_len,
                         const std::string& reward_mode, int n) {
                 TaskSpec t{parse_task_kind(kind), vocab_size, prompt_len, max_len, parse_reward_mode(reward_mode), n};
                 t.validate();
                 return t;
             }),
             py::arg("kind"), py::arg("vocab_size") = 8, py::arg("prompt_len") = 2, py::arg("max_len") = 4,
             py::arg("reward_mode") = "binary", py::arg("n") = 3)
        .def_property_readonly("eos", &TaskSpec::eos);
    m.def(
        "reward",
        [](const TaskSpec& s, const std::vector<Token>& prompt, const std::vector<Token>& response) {
            return reward(s, prompt, response);
        },
        py::arg("spec"), py::arg("prompt"), py::arg("response"));
    m.def(
        "make_prompt",
        [](const TaskSpec& s, int buckets, std::uint64_t seed) {
            Rng rng(seed);
            const Prompt p = make_prompt(s, buckets, rng);
            return py::make_tuple(p.tokens, p.bucket);
        },
        py::arg("spec"), py::arg("prompt_buckets"), py::arg("seed"));

    py::class_<InstanceSpec>(m, "InstanceSpec")
        .def(py::init<>())
        .def_readwrite("vocab_size", &InstanceSpec::vocab_size)
        .def_readwrite("prompt_buckets", &InstanceSpec::prompt_buckets)
        .def_readwrite("buckets_used", &InstanceSpec::buckets_used)
        .def_readwrite("num_groups", &InstanceSpec::num_groups)
        .def_readwrite("group_size", &InstanceSpec::group_size)
        .def_readwrite("max_len", &InstanceSpec::max_len)
        .def_readwrite("drift", &InstanceSpec::drift);

    py::class_<GradCheckReport>(m, "GradCheckReport")
        .def_readonly("kind", &GradCheckReport::kind)
        .def_readonly("coords_checked", &GradCheckReport::coords_checked)
        .def_readonly("untouched_checked", &GradCheckReport::untouched_checked)
        .def_readonly("skipped_kink_coords", &GradCheckReport::skipped_kink_coords)
        .def_readonly("max_rel_err", &GradCheckReport::max_rel_err)
        .def_readonly("max_abs_err", &GradCheckReport::max_abs_err)
        .def_readonly("passed", &GradCheckReport::pass)
        .def_readonly("worst_coord", &GradCheckReport::worst_coord)
        .def("__repr__", &GradCheckReport::to_string);

    m.def(
        "run_gradcheck",
        [](ObjectiveKind kind, std::uint64_t seed, double rtol, double atol, const InstanceSpec& spec) {
            return run_gradcheck(kind, spec, rtol, atol, seed);
        },
        py::arg("kind"), py::arg("seed") = 0, py::arg("rtol") = 1e-5, py::arg("atol") = 1e-8,
        py::arg("spec") = InstanceSpec{});

    m.def(
        "train",
        [](const std::string& config_json) {
            const ExperimentConfig cfg = parse_config(nlohmann::json::parse(config_json));
            TrainResult result;
            {
                py::gil_scoped_release release;
                result = train(cfg.train);
            }
            py::list rows;
            for (const auto& r : result.metrics) rows.append(metrics_to_dict(r));
            return py::make_tuple(rows, result.final_params);
        },
        py::arg("config_json"), "Train from an experiment config given as a JSON string; returns (metrics, params).");

    m.def(
        "gates_csv",
        [](const GateConfig& cfg, double rho_min, double rho_max, int steps, double advantage) {
            std::ostringstream os;
            write_gates_csv(os, GatesGrid{cfg, rho_min, rho_max, steps, advantage});
            return os.str();
        },
        py::arg("cfg"), py::arg("rho_min") = 0.25, py::arg("rho_max") = 3.0, py::arg("steps") = 12,
        py::arg("advantage") = 1.0);
}
