#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <sstream>

#include "sspo/group.hpp"
#include "sspo/trainer.hpp"

using namespace sspo;

namespace {

TrainConfig copy_last_config() {
    TrainConfig cfg;
    cfg.task = TaskSpec{TaskKind::CopyLast, 8, 2, 4, RewardMode::Binary, 3};
    cfg.prompt_buckets = 7;
    return cfg;
}

int first_update_reaching(const std::vector<MetricsRow>& rows, double threshold) {
    for (const auto& r : rows)
        if (r.mean_reward >= threshold) return r.update_index;
    return -1;
}

}  // namespace

TEST_CASE("snapshot_behavior is a deep copy") {
    PolicyParams p(4, 1, 2);
    p.logits()[3] = 0.5;
    const PolicyParams snap = snapshot_behavior(p);
    CHECK(snap == p);
    p.logits()[3] = -2.0;
    CHECK(snap.logits()[3] == 0.5);

    const auto path = std::filesystem::temp_directory_path() / "sspo_test_snapshot.ckpt";
    save_checkpoint(snap, path);
    CHECK(load_checkpoint(path) == snap);
    std::filesystem::remove(path);
}

TEST_CASE("ratios are 1 right after the snapshot and move after a step") {
    TrainConfig cfg = copy_last_config();
    PolicyParams params(8, 1, 7);
    const PolicyParams behavior = snapshot_behavior(params);
    auto groups = collect_rollouts(behavior, cfg.task, 4, 8, 1, 0);
    for (const auto& g : groups)
        for (const auto& t : g.trajectories)
            for (double r : token_ratios(t, params)) CHECK(r == 1.0);

    const auto res = evaluate(ObjectiveKind::Sspo, groups, params, cfg.gate);
    Optimizer opt(cfg, params.num_params());
    opt.step(params.logits(), res.gradient);
    bool moved = false;
    for (const auto& g : groups)
        for (const auto& t : g.trajectories)
            for (double r : token_ratios(t, params)) moved = moved || r != 1.0;
    CHECK(moved);
}

TEST_CASE("collect_rollouts: cardinality, grouping, determinism") {
    const TaskSpec task = copy_last_config().task;
    const PolicyParams behavior(8, 1, 7);
    const auto a = collect_rollouts(behavior, task, 4, 8, 11, 3);
    CHECK(a.size() == 4);
    std::size_t total = 0;
    for (std::size_t b = 0; b < a.size(); ++b) {
        CHECK(a[b].size() == 8);
        total += a[b].size();
        for (const auto& t : a[b].trajectories) {
            CHECK(t.prompt_id == a[b].trajectories[0].prompt_id);
            CHECK(t.prompt_tokens == a[b].trajectories[0].prompt_tokens);
            CHECK(t.reward == reward(task, t.prompt_tokens, t.response_tokens));
        }
        CHECK(a[b].advantages == normalize_advantages(std::vector<double>{
                                     a[b].trajectories[0].reward, a[b].trajectories[1].reward,
                                     a[b].trajectories[2].reward, a[b].trajectories[3].reward,
                                     a[b].trajectories[4].reward, a[b].trajectories[5].reward,
                                     a[b].trajectories[6].reward, a[b].trajectories[7].reward}));
    }
    CHECK(total == 32);
    const auto b = collect_rollouts(behavior, task, 4, 8, 11, 3);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a[i].size(); ++j) {
            CHECK(a[i].trajectories[j].response_tokens == b[i].trajectories[j].response_tokens);
            CHECK(a[i].trajectories[j].behavior_logps == b[i].trajectories[j].behavior_logps);
        }
    // prompt slots are independent of how many slots are requested
    const auto c = collect_rollouts(behavior, task, 2, 8, 11, 3);
    CHECK(c[1].trajectories[5].response_tokens == a[1].trajectories[5].response_tokens);
}

TEST_CASE("deterministic policy yields degenerate groups") {
    const TaskSpec task = copy_last_config().task;
    PolicyParams behavior(8, 1, 7);
    for (std::size_t s = 0; s < behavior.num_states(); ++s) behavior.row(s)[7] = 60.0;
    for (const auto& g : collect_rollouts(behavior, task, 6, 4, 2, 0)) {
        for (const auto& t : g.trajectories) CHECK(t.reward == 0.0);
        for (double a : g.advantages) CHECK(a == 0.0);
    }
}

TEST_CASE("zero learning rate leaves parameters untouched") {
    TrainConfig cfg = copy_last_config();
    cfg.learning_rate = 0.0;
    cfg.total_updates = 100;
    const auto res = train(cfg);
    for (double x : res.final_params.logits()) CHECK(x == 0.0);
    // the policy stays uniform, so every rollout has the same success rate (1/8)^2
    double mean = 0.0;
    int cycles = 0;
    for (std::size_t i = 0; i < res.metrics.size(); i += 4, ++cycles) mean += res.metrics[i].mean_reward;
    mean /= cycles;
    const double p = 1.0 / 64.0;
    const double sd = std::sqrt(p * (1 - p) / (cycles * 16.0 * 8.0));
    CHECK(std::abs(mean - p) <= 4 * sd);
}

TEST_CASE("E = M = 1 makes the first step of each cycle on-policy") {
    TrainConfig cfg = copy_last_config();
    cfg.epochs_per_rollout = 1;
    cfg.minibatches_per_epoch = 1;
    cfg.total_updates = 20;
    const auto res = train(cfg);
    CHECK(res.metrics.size() == 20);
    for (const auto& r : res.metrics) {
        CHECK(std::abs(r.ratio_mean - 1.0) <= 1e-9);
        CHECK(std::abs(r.ratio_max - 1.0) <= 1e-9);
    }
}

TEST_CASE("with E = M = 1 all objectives follow the same trajectory") {
    for (auto opt : {OptimizerKind::Adam, OptimizerKind::Sgd}) {
        std::vector<std::vector<std::vector<double>>> paths;
        for (auto k : kAllObjectives) {
            TrainConfig cfg = copy_last_config();
            cfg.objective = k;
            cfg.optimizer = opt;
            cfg.learning_rate = opt == OptimizerKind::Sgd ? 1.0 : 0.05;
            cfg.epochs_per_rollout = 1;
            cfg.minibatches_per_epoch = 1;
            cfg.total_updates = 10;
            std::vector<std::vector<double>> path;
            train(cfg, [&](int, const PolicyParams& p) { path.emplace_back(p.logits().begin(), p.logits().end()); });
            CHECK(path.size() == 10);
            paths.push_back(std::move(path));
        }
        for (std::size_t k = 1; k < paths.size(); ++k)
            for (std::size_t u = 0; u < paths[0].size(); ++u)
                for (std::size_t j = 0; j < paths[0][u].size(); ++j)
                    CHECK(std::abs(paths[k][u][j] - paths[0][u][j]) <= 1e-9);
    }
}

TEST_CASE("training is deterministic and metrics stay in range") {
    TrainConfig cfg = copy_last_config();
    cfg.total_updates = 40;
    const auto a = train(cfg);
    const auto b = train(cfg);
    std::ostringstream sa, sb;
    write_metrics_csv(sa, a.metrics);
    write_metrics_csv(sb, b.metrics);
    CHECK(sa.str() == sb.str());
    CHECK(a.final_params == b.final_params);
    CHECK(a.metrics.size() == 40u * 2u * 2u);
    CHECK(sa.str().rfind(std::string(metrics_csv_header()), 0) == 0);
    for (const auto& r : a.metrics) {
        CHECK(r.mean_reward >= 0.0);
        CHECK(r.mean_reward <= 1.0);
        CHECK(r.policy_entropy_mean >= 0.0);
        CHECK(r.policy_entropy_mean <= std::log(8.0) + 1e-12);
        CHECK(r.soft_clipped_fraction >= 0.0);
        CHECK(r.soft_clipped_fraction <= 1.0);
        CHECK(std::isfinite(r.grad_norm));
        CHECK(std::isfinite(r.objective_value));
    }
}

TEST_CASE("copy_last regression: seed 0 first reaches 0.9 at cycle 23") {
    const auto res = train(copy_last_config());
    CHECK(first_update_reaching(res.metrics, 0.9) == 23);
    for (double x : res.final_params.logits()) CHECK(std::isfinite(x));
}

TEST_CASE("divergence aborts with the rows logged so far") {
    TrainConfig cfg = copy_last_config();
    cfg.optimizer = OptimizerKind::Sgd;
    cfg.learning_rate = 1e9;
    cfg.total_updates = 50;
    try {
        train(cfg);
        FAIL("expected TrainingDiverged");
    } catch (const TrainingDiverged& e) {
        CHECK(e.metrics.size() < 200);
        for (const auto& r : e.metrics) CHECK(std::isfinite(r.grad_norm));
    }
}

TEST_CASE("config validation") {
    TrainConfig cfg = copy_last_config();
    cfg.prompts_per_rollout = 15;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = copy_last_config();
    cfg.group_size = 1;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = copy_last_config();
    cfg.learning_rate = -1.0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    CHECK_THROWS_AS(parse_optimizer("rmsprop"), ValidationError);
    CHECK(parse_optimizer("sgd") == OptimizerKind::Sgd);
}
