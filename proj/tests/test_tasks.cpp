#include <doctest.h>

#include <functional>

#include "sspo/errors.hpp"
#include "sspo/tasks.hpp"

using namespace sspo;

TEST_CASE("prompt buckets follow the answer token") {
    TaskSpec copy{TaskKind::CopyLast, 10, 2, 4, RewardMode::Binary, 3};
    CHECK(prompt_bucket(copy, std::vector<Token>{3, 7}, 4) == 7 % 4);
    CHECK(prompt_bucket(copy, std::vector<Token>{3, 7}, 9) == 7);

    // eight payload tokens plus EOS
    TaskSpec sum{TaskKind::SumMod, 9, 3, 4, RewardMode::Binary, 3};
    CHECK(answer_token(sum, std::vector<Token>{3, 7, 6}) == 0);
    CHECK(prompt_bucket(sum, std::vector<Token>{3, 7, 6}, 8) == 0);
    CHECK(target_sequence(sum, std::vector<Token>{3, 7, 6}) == std::vector<Token>{0, 8});
}

TEST_CASE("make_prompt: payload range and determinism") {
    TaskSpec spec{TaskKind::SumMod, 6, 4, 4, RewardMode::Binary, 3};
    Rng a(42), b(42);
    for (int i = 0; i < 200; ++i) {
        const Prompt pa = make_prompt(spec, 3, a);
        const Prompt pb = make_prompt(spec, 3, b);
        CHECK(pa.tokens == pb.tokens);
        CHECK(pa.bucket == pb.bucket);
        CHECK(pa.tokens.size() == 4);
        for (Token t : pa.tokens) CHECK((t >= 0 && t < spec.eos()));
        CHECK(pa.bucket == prompt_bucket(spec, pa.tokens, 3));
    }
}

TEST_CASE("reward: examples") {
    TaskSpec copy{TaskKind::CopyLast, 10, 2, 4, RewardMode::Binary, 3};
    const Token eos = copy.eos();
    CHECK(reward(copy, std::vector<Token>{3, 7}, std::vector<Token>{7, eos}) == 1.0);
    CHECK(reward(copy, std::vector<Token>{3, 7}, std::vector<Token>{5, eos}) == 0.0);
    CHECK(reward(copy, std::vector<Token>{3, 7}, std::vector<Token>{7}) == 0.0);
    CHECK(reward(copy, std::vector<Token>{3, 7}, std::vector<Token>{7, eos, eos}) == 0.0);

    TaskSpec rep{TaskKind::RepeatN, 6, 2, 5, RewardMode::Fractional, 3};
    const Token e = rep.eos();
    CHECK(target_sequence(rep, std::vector<Token>{1, 4}) == std::vector<Token>{4, 4, 4, e});
    CHECK(reward(rep, std::vector<Token>{1, 4}, std::vector<Token>{4, 4, 5, e}) == 0.75);
    // length mismatch scored against the longer sequence
    CHECK(reward(rep, std::vector<Token>{1, 4}, std::vector<Token>{4, e}) == 0.25);
    CHECK(reward(rep, std::vector<Token>{1, 4}, std::vector<Token>{4, 4, 4, 4, e}) == doctest::Approx(0.6));
    CHECK_THROWS_AS(reward(rep, std::vector<Token>{1}, std::vector<Token>{}), InvalidInput);
}

TEST_CASE("task validation") {
    CHECK_THROWS_AS((TaskSpec{TaskKind::CopyLast, 2, 2, 4, RewardMode::Binary, 3}.validate()), ValidationError);
    CHECK_THROWS_AS((TaskSpec{TaskKind::CopyLast, 5, 0, 4, RewardMode::Binary, 3}.validate()), ValidationError);
    CHECK_THROWS_AS((TaskSpec{TaskKind::CopyLast, 5, 1, 1, RewardMode::Binary, 3}.validate()), ValidationError);
    CHECK_THROWS_AS((TaskSpec{TaskKind::RepeatN, 5, 1, 3, RewardMode::Binary, 3}.validate()), ValidationError);
    CHECK_THROWS_AS((TaskSpec{TaskKind::RepeatN, 5, 1, 3, RewardMode::Binary, 0}.validate()), ValidationError);
    CHECK_NOTHROW((TaskSpec{TaskKind::RepeatN, 5, 1, 4, RewardMode::Binary, 3}.validate()));
    CHECK_THROWS_AS(parse_task_kind("sort"), ValidationError);
    CHECK_THROWS_AS(parse_reward_mode("partial"), ValidationError);
}

namespace {

// every response the sampler can emit: EOS only as the final token, or no EOS at max_len
void for_each_response(int vocab, int max_len, const std::function<void(const std::vector<Token>&)>& fn) {
    const Token eos = vocab - 1;
    std::vector<Token> y;
    std::function<void()> rec = [&] {
        for (Token t = 0; t < vocab; ++t) {
            y.push_back(t);
            if (t == eos || static_cast<int>(y.size()) == max_len)
                fn(y);
            else
                rec();
            y.pop_back();
        }
    };
    rec();
}

void for_each_prompt(int payload, int len, const std::function<void(const std::vector<Token>&)>& fn) {
    std::vector<Token> x(static_cast<std::size_t>(len), 0);
    while (true) {
        fn(x);
        int i = len - 1;
        while (i >= 0 && x[static_cast<std::size_t>(i)] == payload - 1) x[static_cast<std::size_t>(i--)] = 0;
        if (i < 0) return;
        ++x[static_cast<std::size_t>(i)];
    }
}

}  // namespace

TEST_CASE("brute force: exactly one rewarded response per prompt on tiny instances") {
    const std::vector<TaskSpec> specs{
        {TaskKind::CopyLast, 3, 2, 2, RewardMode::Binary, 1},
        {TaskKind::CopyLast, 4, 2, 3, RewardMode::Binary, 1},
        {TaskKind::SumMod, 4, 3, 3, RewardMode::Binary, 1},
        {TaskKind::SumMod, 3, 2, 2, RewardMode::Binary, 1},
        {TaskKind::RepeatN, 4, 2, 3, RewardMode::Binary, 2},
        {TaskKind::RepeatN, 3, 1, 3, RewardMode::Binary, 1},
    };
    for (const auto& spec : specs) {
        spec.validate();
        for_each_prompt(spec.payload_size(), spec.prompt_len, [&](const std::vector<Token>& x) {
            int winners = 0;
            for_each_response(spec.vocab_size, spec.max_len, [&](const std::vector<Token>& y) {
                const double rb = reward(spec, x, y);
                CHECK((rb == 0.0 || rb == 1.0));
                winners += rb == 1.0 ? 1 : 0;
                TaskSpec frac = spec;
                frac.reward_mode = RewardMode::Fractional;
                const double rf = reward(frac, x, y);
                CHECK(rf >= 0.0);
                CHECK(rf <= 1.0);
                CHECK((rf == 1.0) == (rb == 1.0));
                CHECK(reward(frac, x, y) == rf);
            });
            CHECK(winners == 1);
        });
    }
}
