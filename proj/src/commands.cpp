#include "sspo/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include "sspo/csv.hpp"
#include "sspo/errors.hpp"

namespace sspo {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw ValidationError("cannot write " + path.string());
    return os;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ValidationError("cannot create output directory " + dir.string() + ": " + ec.message());
}

double variance(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double acc = 0.0;
    for (double x : xs) acc += (x - mean) * (x - mean);
    return acc / static_cast<double>(xs.size());
}

double mean_of(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

}  // namespace

int cmd_train(const fs::path& config_path, const std::optional<fs::path>& out_dir, std::ostream& log) {
    ExperimentConfig cfg;
    try {
        cfg = load_config(config_path);
        if (out_dir) cfg.output_dir = out_dir->string();
        ensure_dir(cfg.output_dir);
    } catch (const ValidationError& e) {
        log << "validation error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const InvalidInput& e) {
        log << "validation error: " << e.what() << '\n';
        return kExitValidation;
    }

    const fs::path dir(cfg.output_dir);
    {
        auto os = open_out(dir / "config.resolved.json");
        os << to_json(cfg).dump(2) << '\n';
    }

    auto write_metrics = [&](const std::vector<MetricsRow>& rows) {
        auto os = open_out(dir / "metrics.csv");
        write_metrics_csv(os, rows);
    };
    UpdateCallback on_update;
    if (cfg.checkpoint_every > 0) {
        on_update = [&](int u, const PolicyParams& params) {
            if ((u + 1) % cfg.checkpoint_every == 0)
                save_checkpoint(params, dir / ("ckpt_" + std::to_string(u + 1) + ".ckpt"));
        };
    }
    try {
        const TrainResult result = train(cfg.train, on_update);
        write_metrics(result.metrics);
        save_checkpoint(result.final_params, dir / "final.ckpt");
        const double last = result.metrics.empty() ? 0.0 : result.metrics.back().mean_reward;
        log << "trained " << to_string(cfg.train.objective) << " for " << cfg.train.total_updates
            << " updates; final mean_reward " << format_real(last) << "; wrote " << dir.string() << '\n';
        return kExitOk;
    } catch (const TrainingDiverged& e) {
        write_metrics(e.metrics);
        log << "numeric failure: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const NumericError& e) {
        log << "numeric failure: " << e.what() << '\n';
        return kExitNumeric;
    }
}

std::vector<double> rho_grid(double rho_min, double rho_max, int steps) {
    if (!(rho_min > 0.0)) throw ValidationError("gates: rho_min must be > 0");
    if (!(rho_max > rho_min) || !std::isfinite(rho_max)) throw ValidationError("gates: rho_max must exceed rho_min");
    if (steps < 2) throw ValidationError("gates: steps must be >= 2");
    if (rho_min > 1.0 || rho_max < 1.0) throw ValidationError("gates: the grid must contain rho = 1");
    std::vector<double> grid(static_cast<std::size_t>(steps));
    const double width = (rho_max - rho_min) / static_cast<double>(steps - 1);
    std::size_t nearest = 0;
    for (std::size_t j = 0; j < grid.size(); ++j) {
        grid[j] = j + 1 == grid.size() ? rho_max : rho_min + static_cast<double>(j) * width;
        if (std::abs(grid[j] - 1.0) < std::abs(grid[nearest] - 1.0)) nearest = j;
    }
    grid[nearest] = 1.0;
    return grid;
}

void write_gates_csv(std::ostream& os, const GatesGrid& grid) {
    grid.gate.validate();
    const auto rhos = rho_grid(grid.rho_min, grid.rho_max, grid.steps);
    os << "rho,clip_gate_pos,clip_gate_neg,soft_gate,soft_gate_derivative,sspo_gate,f_ratio,local_weight\n";
    for (double rho : rhos) {
        const SspoWeight w = sspo_weight(rho, grid.advantage, grid.gate);
        os << format_real(rho) << ',' << format_real(clip_gate(rho, 1.0, grid.gate)) << ','
           << format_real(clip_gate(rho, -1.0, grid.gate)) << ',' << format_real(soft_gate(rho, grid.advantage, grid.gate))
           << ',' << format_real(soft_gate_derivative(rho, grid.advantage, grid.gate)) << ','
           << format_real(sspo_gate(rho, grid.advantage, grid.gate)) << ',' << format_real(w.f_ratio) << ','
           << format_real(w.local_weight) << '\n';
    }
}

int cmd_gates(const GatesGrid& grid, const fs::path& out_file, std::ostream& log) {
    try {
        std::ostringstream buffer;
        write_gates_csv(buffer, grid);
        if (out_file == "-") {
            log << buffer.str();
        } else {
            auto os = open_out(out_file);
            os << buffer.str();
        }
        return kExitOk;
    } catch (const ValidationError& e) {
        log << "usage error: " << e.what() << '\n';
        return kExitValidation;
    }
}

int cmd_gradcheck(const std::string& objective, std::uint64_t seed, double rtol, double atol, int num_seeds,
                  std::ostream& log) {
    std::vector<ObjectiveKind> kinds;
    try {
        if (objective == "all")
            kinds.assign(kAllObjectives.begin(), kAllObjectives.end());
        else
            kinds.push_back(parse_objective(objective));
        if (!(rtol >= 0.0) || !(atol >= 0.0)) throw ValidationError("gradcheck: tolerances must be >= 0");
        if (num_seeds < 1) throw ValidationError("gradcheck: num_seeds must be >= 1");
    } catch (const ValidationError& e) {
        log << "usage error: " << e.what() << '\n';
        return kExitValidation;
    }
    bool all_pass = true;
    try {
        for (ObjectiveKind kind : kinds) {
            for (int s = 0; s < num_seeds; ++s) {
                const auto report = run_gradcheck(kind, InstanceSpec{}, rtol, atol, seed + static_cast<std::uint64_t>(s));
                log << "seed=" << seed + static_cast<std::uint64_t>(s) << ' ' << report.to_string() << '\n';
                all_pass = all_pass && report.pass;
            }
        }
    } catch (const NumericError& e) {
        log << "numeric failure: " << e.what() << '\n';
        return kExitNumeric;
    }
    return all_pass ? kExitOk : kExitNumeric;
}

std::uint64_t compare_cell_seed(ObjectiveKind objective, std::uint64_t seed) {
    return derive_key(seed, {static_cast<std::uint64_t>(StreamTag::Compare), static_cast<std::uint64_t>(objective)});
}

namespace {

struct CellOutcome {
    CompareRow row;
    std::vector<MetricsRow> metrics;
};

CellOutcome run_cell(const fs::path& config_path, ObjectiveKind kind, std::uint64_t seed) {
    CellOutcome out;
    out.row.objective = kind;
    out.row.seed = seed;
    std::vector<MetricsRow> metrics;
    PolicyParams final_params;
    try {
        ExperimentConfig cfg = load_config(config_path, kind);
        cfg.train.seed = compare_cell_seed(kind, seed);
        TrainResult result = train(cfg.train);
        metrics = std::move(result.metrics);
        final_params = std::move(result.final_params);
        out.row.status = "ok";
    } catch (const TrainingDiverged& e) {
        metrics = e.metrics;
        out.row.status = "diverged";
        out.row.error = e.what();
    } catch (const std::exception& e) {
        out.row.status = "error";
        out.row.error = e.what();
    }

    std::vector<double> norms;
    for (const auto& m : metrics) {
        norms.push_back(m.grad_norm);
        out.row.best_mean_reward = std::max(out.row.best_mean_reward, m.mean_reward);
        if (out.row.updates_to_threshold < 0 && m.mean_reward >= kRewardThreshold)
            out.row.updates_to_threshold = m.update_index;
    }
    if (!metrics.empty()) {
        out.row.final_mean_reward = metrics.back().mean_reward;
        out.row.final_entropy = metrics.back().policy_entropy_mean;
    }
    out.row.grad_norm_mean = mean_of(norms);
    out.row.grad_norm_var = variance(norms);
    for (double x : final_params.logits()) out.row.max_abs_logit = std::max(out.row.max_abs_logit, std::abs(x));
    if (out.row.status == "diverged") out.row.max_abs_logit = std::numeric_limits<double>::infinity();
    out.metrics = std::move(metrics);
    return out;
}

std::string csv_escape(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c == '\n' ? ' ' : c;
    }
    return out + "\"";
}

}  // namespace

int cmd_compare(const fs::path& config_path, const std::vector<std::string>& objectives,
                const std::vector<std::uint64_t>& seeds, const std::optional<fs::path>& out_dir, int threads,
                std::ostream& log) {
    std::vector<ObjectiveKind> kinds;
    ExperimentConfig base;
    try {
        if (objectives.empty()) throw ValidationError("compare: at least one objective is required");
        if (seeds.empty()) throw ValidationError("compare: at least one seed is required");
        for (const auto& name : objectives) kinds.push_back(parse_objective(name));
        std::sort(kinds.begin(), kinds.end());
        kinds.erase(std::unique(kinds.begin(), kinds.end()), kinds.end());
        base = load_config(config_path, kinds.front());
        if (out_dir) base.output_dir = out_dir->string();
        ensure_dir(base.output_dir);
    } catch (const ValidationError& e) {
        log << "validation error: " << e.what() << '\n';
        return kExitValidation;
    }
    std::vector<std::uint64_t> sorted_seeds = seeds;
    std::sort(sorted_seeds.begin(), sorted_seeds.end());
    sorted_seeds.erase(std::unique(sorted_seeds.begin(), sorted_seeds.end()), sorted_seeds.end());

    struct Cell {
        ObjectiveKind kind;
        std::uint64_t seed;
    };
    std::vector<Cell> cells;
    for (ObjectiveKind k : kinds)
        for (std::uint64_t s : sorted_seeds) cells.push_back({k, s});

    std::vector<CellOutcome> outcomes(cells.size());
    std::atomic<std::size_t> next{0};
    const int workers = std::clamp(threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency()), 1,
                                   static_cast<int>(cells.size()));
    {
        std::vector<std::jthread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < cells.size(); i = next++)
                    outcomes[i] = run_cell(config_path, cells[i].kind, cells[i].seed);
            });
    }

    const fs::path dir(base.output_dir);
    auto summary = open_out(dir / "summary.csv");
    summary << "objective,seed,status,final_mean_reward,best_mean_reward,updates_to_threshold,final_entropy,"
               "grad_norm_mean,grad_norm_var,max_abs_logit,error\n";
    auto var_csv = open_out(dir / "variance.csv");
    var_csv << "objective,seed,update_index,grad_norm_mean,grad_norm_var\n";

    bool any_failure = false;
    std::map<ObjectiveKind, std::vector<const CellOutcome*>> by_kind;
    for (const auto& out : outcomes) {
        const CompareRow& r = out.row;
        any_failure = any_failure || r.status != "ok";
        by_kind[r.objective].push_back(&out);
        summary << to_string(r.objective) << ',' << r.seed << ',' << r.status << ',' << format_real(r.final_mean_reward)
                << ',' << format_real(r.best_mean_reward) << ',' << r.updates_to_threshold << ','
                << format_real(r.final_entropy) << ',' << format_real(r.grad_norm_mean) << ','
                << format_real(r.grad_norm_var) << ',' << format_real(r.max_abs_logit) << ',' << csv_escape(r.error)
                << '\n';

        auto cell_csv = open_out(dir / ("metrics_" + std::string(to_string(r.objective)) + "_seed" +
                                        std::to_string(r.seed) + ".csv"));
        write_metrics_csv(cell_csv, out.metrics);

        std::size_t i = 0;
        while (i < out.metrics.size()) {
            std::size_t j = i;
            std::vector<double> norms;
            while (j < out.metrics.size() && out.metrics[j].update_index == out.metrics[i].update_index)
                norms.push_back(out.metrics[j++].grad_norm);
            var_csv << to_string(r.objective) << ',' << r.seed << ',' << out.metrics[i].update_index << ','
                    << format_real(mean_of(norms)) << ',' << format_real(variance(norms)) << '\n';
            i = j;
        }
    }

    // grad-norm variance by objective, compared against token-level GRPO
    auto report = open_out(dir / "variance_report.csv");
    report << "objective,granularity,task,runs,mean_grad_norm,mean_grad_norm_var,var_ratio_vs_grpo,direction_vs_grpo\n";
    std::map<ObjectiveKind, double> mean_var;
    for (const auto& [kind, outs] : by_kind) {
        std::vector<double> vars;
        for (const auto* o : outs) vars.push_back(o->row.grad_norm_var);
        mean_var[kind] = mean_of(vars);
    }
    const bool have_grpo = mean_var.contains(ObjectiveKind::Grpo);
    for (const auto& [kind, outs] : by_kind) {
        std::vector<double> norms;
        for (const auto* o : outs) norms.push_back(o->row.grad_norm_mean);
        std::string ratio = "n/a", direction = "n/a";
        if (have_grpo && kind != ObjectiveKind::Grpo) {
            const double base_var = mean_var[ObjectiveKind::Grpo];
            const double v = mean_var[kind];
            ratio = base_var > 0.0 ? format_real(v / base_var) : "n/a";
            direction = v < base_var ? "lower" : (v > base_var ? "higher" : "equal");
        }
        const std::string granularity =
            is_sequence_level(kind) ? "sequence" : (kind == ObjectiveKind::Gmpo ? "geometric-token" : "token");
        report << to_string(kind) << ',' << granularity << ',' << to_string(base.train.task.kind) << ','
               << outs.size() << ',' << format_real(mean_of(norms)) << ',' << format_real(mean_var[kind]) << ','
               << ratio << ',' << direction << '\n';
        if (have_grpo && kind != ObjectiveKind::Grpo)
            log << "grad-norm variance " << to_string(kind) << " vs grpo on " << to_string(base.train.task.kind) << ": "
                << direction << " (ratio " << ratio << ")\n";
    }

    log << "compare: " << outcomes.size() << " runs written to " << dir.string() << '\n';
    return any_failure ? kExitNumeric : kExitOk;
}

}  // namespace sspo
