#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sspo/commands.hpp"
#include "sspo/errors.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Group-based off-policy surrogate objectives (GRPO, GSPO, GMPO, SAPO, SSPO) on toy policies"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;

    auto* train = app.add_subcommand("train", "Train a tabular policy from a JSON experiment config");
    train->add_option("--config", config_path, "Experiment config (JSON)")->required();
    train->add_option("--out", out_dir, "Output directory (overrides output_dir)");

    sspo::GatesGrid grid;
    std::string gates_out = "-";
    auto* gates = app.add_subcommand("gates", "Emit gate curves on a rho grid as CSV");
    gates->add_option("--tau-pos", grid.gate.tau_pos, "Temperature for positive advantages")->capture_default_str();
    gates->add_option("--tau-neg", grid.gate.tau_neg, "Temperature for non-positive advantages")->capture_default_str();
    gates->add_option("--eps-low", grid.gate.eps_low, "Lower clip width")->capture_default_str();
    gates->add_option("--eps-high", grid.gate.eps_high, "Upper clip width")->capture_default_str();
    gates->add_flag("--allow-tau-inversion", grid.gate.allow_tau_inversion, "Permit tau_neg < tau_pos");
    gates->add_option("--rho-min", grid.rho_min, "Grid start (> 0)")->capture_default_str();
    gates->add_option("--rho-max", grid.rho_max, "Grid end")->capture_default_str();
    gates->add_option("--steps", grid.steps, "Number of grid points")->capture_default_str();
    gates->add_option("--advantage", grid.advantage, "Advantage whose sign selects tau for soft columns")
        ->capture_default_str();
    gates->add_option("--out", gates_out, "Output CSV ('-' for stdout)")->capture_default_str();

    std::string objective;
    std::uint64_t seed = 0;
    double rtol = 1e-5;
    double atol = -1.0;
    int num_seeds = 1;
    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of an objective's analytic gradient");
    gradcheck->add_option("--objective", objective, "grpo|gspo|gmpo|sapo|sspo|all")->required();
    gradcheck->add_option("--seed", seed, "First instance seed")->capture_default_str();
    gradcheck->add_option("--num-seeds", num_seeds, "Number of consecutive seeds")->capture_default_str();
    gradcheck->add_option("--rtol", rtol, "Relative tolerance")->capture_default_str();
    gradcheck->add_option("--atol", atol, "Absolute tolerance (default 1e-3 * rtol)");

    std::vector<std::string> objectives{"grpo", "gspo", "gmpo", "sapo", "sspo"};
    std::vector<std::uint64_t> seeds{0, 1, 2};
    int threads = 0;
    auto* compare = app.add_subcommand("compare", "Run every (objective, seed) cell and summarise");
    compare->add_option("--config", config_path, "Experiment config (JSON)")->required();
    compare->add_option("--objectives", objectives, "Objectives to compare")->delimiter(',')->capture_default_str();
    compare->add_option("--seeds", seeds, "Seeds")->delimiter(',')->capture_default_str();
    compare->add_option("--out", out_dir, "Output directory (overrides output_dir)");
    compare->add_option("--threads", threads, "Worker threads (0 = hardware concurrency)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return sspo::kExitValidation;
    }

    try {
        const auto out = out_dir.empty() ? std::nullopt : std::optional<std::filesystem::path>(out_dir);
        if (*train) return sspo::cmd_train(config_path, out, std::cerr);
        if (*gates) return sspo::cmd_gates(grid, gates_out, gates_out == "-" ? std::cout : std::cerr);
        if (*gradcheck) return sspo::cmd_gradcheck(objective, seed, rtol, atol < 0.0 ? 1e-3 * rtol : atol, num_seeds, std::cout);
        if (*compare) return sspo::cmd_compare(config_path, objectives, seeds, out, threads, std::cerr);
    } catch (const sspo::ValidationError& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return sspo::kExitValidation;
    } catch (const sspo::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return sspo::kExitNumeric;
    }
    return sspo::kExitOk;
}
