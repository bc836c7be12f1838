#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sspo/config.hpp"
#include "sspo/gradcheck.hpp"

namespace sspo {

/// Process exit codes shared by every subcommand.
enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitNumeric = 2 };

/// Runs training and writes into the output directory:
///   metrics.csv, config.resolved.json, final.ckpt, and
///   ckpt_<update>.ckpt every `checkpoint_every` updates when that is set.
/// `out_dir` overrides the config's output_dir.
int cmd_train(const std::filesystem::path& config_path, const std::optional<std::filesystem::path>& out_dir,
              std::ostream& log);

struct GatesGrid {
    GateConfig gate;
    double rho_min = 0.25;
    double rho_max = 3.0;
    int steps = 12;
    double advantage = 1.0;  ///< sign selects tau for the soft/sspo columns
};

/// Linear grid over [rho_min, rho_max]; the point nearest 1 is snapped to 1
/// exactly. Throws ValidationError unless 0 < rho_min <= 1 <= rho_max,
/// rho_min < rho_max and steps >= 2.
std::vector<double> rho_grid(double rho_min, double rho_max, int steps);

/// CSV columns: rho, clip_gate_pos, clip_gate_neg, soft_gate,
/// soft_gate_derivative, sspo_gate, f_ratio, local_weight.
void write_gates_csv(std::ostream& os, const GatesGrid& grid);
int cmd_gates(const GatesGrid& grid, const std::filesystem::path& out_file, std::ostream& log);

/// Checks `objective` ("all" for every kind) on seeds [seed, seed + num_seeds).
int cmd_gradcheck(const std::string& objective, std::uint64_t seed, double rtol, double atol, int num_seeds,
                  std::ostream& log);

struct CompareRow {
    ObjectiveKind objective = ObjectiveKind::Grpo;
    std::uint64_t seed = 0;
    std::string status;  ///< ok | diverged | error
    double final_mean_reward = 0.0;
    double best_mean_reward = 0.0;
    int updates_to_threshold = -1;
    double final_entropy = 0.0;
    double grad_norm_mean = 0.0;
    double grad_norm_var = 0.0;
    double max_abs_logit = 0.0;
    std::string error;
};

inline constexpr double kRewardThreshold = 0.9;

/// Seed a compare cell actually trains with: keyed by (objective, seed).
std::uint64_t compare_cell_seed(ObjectiveKind objective, std::uint64_t seed);

/// Writes summary.csv, variance.csv (per-update grad-norm mean/variance over
/// the update's optimizer steps), variance_report.csv and one metrics file per cell.
int cmd_compare(const std::filesystem::path& config_path, const std::vector<std::string>& objectives,
                const std::vector<std::uint64_t>& seeds, const std::optional<std::filesystem::path>& out_dir,
                int threads, std::ostream& log);

}  // namespace sspo
