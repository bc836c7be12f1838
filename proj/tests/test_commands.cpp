#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sspo/commands.hpp"
#include "sspo/csv.hpp"

using namespace sspo;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("sspo_test_" + name)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

fs::path write_config(const fs::path& dir, const std::string& body) {
    const fs::path p = dir / "config.json";
    std::ofstream(p) << body;
    return p;
}

const char* kSmallConfig = R"({
  "objective": "sspo",
  "task": {"kind": "copy_last", "vocab_size": 5, "prompt_len": 2, "max_len": 3},
  "train": {"G": 4, "B": 4, "E": 1, "M": 2, "total_updates": 6, "seed": 3, "checkpoint_every": 3}
})";

}  // namespace

TEST_CASE("rho_grid") {
    const auto g = rho_grid(0.25, 3.0, 12);
    CHECK(g.size() == 12);
    CHECK(g.front() == 0.25);
    CHECK(g.back() == 3.0);
    CHECK(std::count(g.begin(), g.end(), 1.0) == 1);
    for (std::size_t i = 1; i < g.size(); ++i) CHECK(g[i] > g[i - 1]);
    CHECK_THROWS_AS(rho_grid(1.5, 3.0, 5), ValidationError);
    CHECK_THROWS_AS(rho_grid(0.0, 3.0, 5), ValidationError);
    CHECK_THROWS_AS(rho_grid(0.5, 3.0, 1), ValidationError);
}

TEST_CASE("gates CSV") {
    GatesGrid grid;
    grid.rho_min = 0.5;
    grid.rho_max = 2.0;
    grid.steps = 7;  // 0.5, 0.75, ..., 2.0
    std::ostringstream os;
    write_gates_csv(os, grid);
    const auto rows = read_csv(os.str());
    REQUIRE(rows.size() == 8);
    CHECK(rows[0] == std::vector<std::string>{"rho", "clip_gate_pos", "clip_gate_neg", "soft_gate",
                                              "soft_gate_derivative", "sspo_gate", "f_ratio", "local_weight"});
    bool saw_one = false, saw_two = false;
    double prev = 0.0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const double rho = std::stod(rows[i][0]);
        CHECK(rho > prev);
        prev = rho;
        if (rho == 1.0) {
            saw_one = true;
            CHECK(rows[i][5] == "1");
            CHECK(rows[i][6] == "1");
            CHECK(rows[i][7] == "1");
        }
        if (rho == 2.0) {
            saw_two = true;
            CHECK(rows[i][5] == "2.19328005");
            CHECK(rows[i][1] == "1.2");
        }
    }
    CHECK(saw_one);
    CHECK(saw_two);

    TempDir dir("gates");
    std::ostringstream log;
    CHECK(cmd_gates(grid, dir.path / "gates.csv", log) == kExitOk);
    CHECK(slurp(dir.path / "gates.csv") == os.str());
    grid.rho_min = 2.0;
    CHECK(cmd_gates(grid, dir.path / "bad.csv", log) == kExitValidation);
}

TEST_CASE("gradcheck command exit codes") {
    std::ostringstream log;
    CHECK(cmd_gradcheck("all", 0, 1e-5, 1e-8, 2, log) == kExitOk);
    CHECK(log.str().find("sspo") != std::string::npos);
    std::ostringstream fail;
    CHECK(cmd_gradcheck("sspo", 0, 0.0, 0.0, 1, fail) != kExitOk);
    CHECK(fail.str().find("worst") != std::string::npos);
    std::ostringstream usage;
    CHECK(cmd_gradcheck("ppo", 0, 1e-5, 1e-8, 1, usage) == kExitValidation);
    CHECK(usage.str().find("grpo") != std::string::npos);
}

TEST_CASE("train command outputs and determinism") {
    TempDir dir("train");
    const fs::path cfg = write_config(dir.path, kSmallConfig);
    std::ostringstream log;
    REQUIRE(cmd_train(cfg, dir.path / "a", log) == kExitOk);
    REQUIRE(cmd_train(cfg, dir.path / "b", log) == kExitOk);
    CHECK(fs::exists(dir.path / "a" / "config.resolved.json"));
    for (const char* f : {"metrics.csv", "final.ckpt", "ckpt_3.ckpt", "ckpt_6.ckpt"}) {
        CHECK(fs::exists(dir.path / "a" / f));
        CHECK(slurp(dir.path / "a" / f) == slurp(dir.path / "b" / f));
    }
    const auto rows = read_csv(slurp(dir.path / "a" / "metrics.csv"));
    CHECK(rows.size() == 1 + 6 * 2);
    CHECK(load_config(dir.path / "a" / "config.resolved.json").train == load_config(cfg).train);
}

TEST_CASE("train command rejects a partial gate section") {
    TempDir dir("train_bad");
    const fs::path cfg = write_config(dir.path, R"({"objective": "sspo", "task": {"kind": "copy_last"},
                                                   "gate": {"tau_pos": 1.0}})");
    std::ostringstream log;
    CHECK(cmd_train(cfg, dir.path / "out", log) == kExitValidation);
    CHECK(log.str().find("gate.tau_neg") != std::string::npos);
}

TEST_CASE("train command reports divergence") {
    TempDir dir("train_div");
    const fs::path cfg = write_config(dir.path, R"({"objective": "grpo", "task": {"kind": "copy_last"},
        "train": {"optimizer": "sgd", "learning_rate": 1e9, "total_updates": 20}})");
    std::ostringstream log;
    CHECK(cmd_train(cfg, dir.path / "out", log) == kExitNumeric);
    CHECK(fs::exists(dir.path / "out" / "metrics.csv"));
}

TEST_CASE("compare command") {
    TempDir dir("compare");
    const fs::path cfg = write_config(dir.path, kSmallConfig);
    std::ostringstream log;
    REQUIRE(cmd_compare(cfg, {"grpo"}, {0}, dir.path / "one", 1, log) == kExitOk);
    CHECK(read_csv(slurp(dir.path / "one" / "summary.csv")).size() == 2);

    REQUIRE(cmd_compare(cfg, {"sspo", "grpo", "gspo"}, {1, 0}, dir.path / "a", 4, log) == kExitOk);
    REQUIRE(cmd_compare(cfg, {"grpo", "gspo", "sspo"}, {0, 1}, dir.path / "b", 1, log) == kExitOk);
    for (const char* f : {"summary.csv", "variance.csv", "variance_report.csv", "metrics_gspo_seed1.csv"})
        CHECK(slurp(dir.path / "a" / f) == slurp(dir.path / "b" / f));
    const auto summary = read_csv(slurp(dir.path / "a" / "summary.csv"));
    CHECK(summary.size() == 7);
    CHECK(summary[1][0] == "grpo");
    CHECK(summary[1][1] == "0");
    // same seed, different objective: independent streams
    CHECK(compare_cell_seed(ObjectiveKind::Grpo, 0) != compare_cell_seed(ObjectiveKind::Sspo, 0));
    CHECK(slurp(dir.path / "a" / "metrics_grpo_seed0.csv") != slurp(dir.path / "a" / "metrics_sspo_seed0.csv"));
    const auto report = read_csv(slurp(dir.path / "a" / "variance_report.csv"));
    CHECK(report.size() == 4);
    CHECK(log.str().find("vs grpo") != std::string::npos);
}

TEST_CASE("compare records a failing cell in-row and keeps going") {
    TempDir dir("compare_fail");
    // the gate section only carries clip keys, so the sspo cell fails validation
    const fs::path cfg = write_config(dir.path, R"({"objective": "grpo",
        "task": {"kind": "copy_last", "vocab_size": 5, "max_len": 3},
        "gate": {"eps_low": 0.2, "eps_high": 0.2},
        "train": {"G": 4, "B": 4, "E": 1, "M": 1, "total_updates": 3}})");
    std::ostringstream log;
    CHECK(cmd_compare(cfg, {"grpo", "sspo"}, {0}, dir.path / "out", 2, log) == kExitNumeric);
    const auto summary = read_csv(slurp(dir.path / "out" / "summary.csv"));
    REQUIRE(summary.size() == 3);
    CHECK(summary[1][2] == "ok");
    CHECK(summary[2][2] == "error");
    CHECK(summary[2][10].find("gate.tau_pos") != std::string::npos);
    std::ostringstream usage;
    CHECK(cmd_compare(cfg, {"ppo"}, {0}, dir.path / "x", 1, usage) == kExitValidation);
    CHECK(cmd_compare(cfg, {"grpo"}, {}, dir.path / "x", 1, usage) == kExitValidation);
}
