#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "presto/masking.hpp"
#include "presto/synth.hpp"

using namespace presto;

namespace {

std::vector<TokenInfo> random_layout(Rng& rng, double dropout = 0.0) {
  PixelSample s;
  s.init_storage();
  for (int t = 0; t < s.T; ++t)
    for (int g = 0; g < kNumDynamic; ++g)
      if (rng.uniform() < dropout) s.presence_dyn[size_t(t) * kNumDynamic + g] = 0;
  return build_token_layout(s);
}

}  // namespace

TEST_CASE("strategy names round trip") {
  for (auto s : {MaskStrategy::Random, MaskStrategy::ChannelGroups,
                 MaskStrategy::Timesteps, MaskStrategy::ContiguousTimesteps,
                 MaskStrategy::Combined})
    CHECK(mask_strategy_from_name(mask_strategy_name(s)) == s);
  CHECK_THROWS_AS(mask_strategy_from_name("bogus"), std::invalid_argument);
}

TEST_CASE("draw covers the four concrete strategies") {
  Rng rng(1);
  std::set<MaskStrategy> seen;
  for (int i = 0; i < 200; ++i) {
    MaskStrategy s = draw_strategy(rng);
    CHECK(s != MaskStrategy::Combined);
    seen.insert(s);
  }
  CHECK(seen.size() == 4);
}

TEST_CASE("budget is exact and loc is never masked") {
  Rng rng(2);
  for (int trial = 0; trial < 1000; ++trial) {
    Rng trial_rng = rng.split(uint64_t(trial));
    auto tokens = random_layout(trial_rng, trial % 3 == 0 ? 0.3 : 0.0);
    MaskStrategy strat = draw_strategy(trial_rng);
    MaskPlan plan = build_mask(tokens, 0.75, strat, trial_rng);

    int64_t maskable = 0;
    for (const auto& t : tokens) maskable += t.maskable ? 1 : 0;
    CHECK(int64_t(plan.masked.size()) == llround(0.75 * double(maskable)));
    CHECK(plan.budget == int64_t(plan.masked.size()));

    MaskedSplit split = apply_mask(tokens, plan);
    CHECK(split.visible.size() + split.targets.size() == tokens.size());
    for (int32_t idx : plan.masked) CHECK(tokens[size_t(idx)].maskable);
    // Partition: every index appears exactly once across the two sides.
    std::set<int32_t> all(split.visible.begin(), split.visible.end());
    for (const auto& tg : split.targets) all.insert(tg.token_index);
    CHECK(all.size() == tokens.size());
    // Loc stayed visible.
    CHECK(std::find(split.visible.begin(), split.visible.end(),
                    int32_t(tokens.size() - 1)) != split.visible.end());
  }
}

TEST_CASE("full sample budget example") {
  Rng rng(3);
  PixelSample s;
  s.init_storage();
  auto tokens = build_token_layout(s);  // 110 tokens, 109 maskable
  MaskPlan plan = build_mask(tokens, 0.75, MaskStrategy::Random, rng);
  CHECK(plan.masked.size() == 82);  // llround(81.75)
}

TEST_CASE("channel strategy masks whole dynamic groups") {
  Rng rng(4);
  PixelSample s;
  s.init_storage();
  auto tokens = build_token_layout(s);
  MaskPlan plan = build_mask(tokens, 0.75, MaskStrategy::ChannelGroups, rng);
  // Count masked tokens per dynamic group; fully-masked groups account for
  // the structural part (6 groups of 12 = 72 of the 82 budget).
  std::array<int, kNumGroups> per_group{};
  for (int32_t idx : plan.masked) ++per_group[size_t(int(tokens[size_t(idx)].group))];
  int whole = 0;
  for (int g = 0; g < kNumDynamic; ++g)
    if (per_group[size_t(g)] == 12) ++whole;
  CHECK(whole >= 6);
}

TEST_CASE("timestep strategy masks whole steps") {
  Rng rng(5);
  PixelSample s;
  s.init_storage();
  auto tokens = build_token_layout(s);
  MaskPlan plan = build_mask(tokens, 0.75, MaskStrategy::Timesteps, rng);
  std::array<int, 12> per_step{};
  for (int32_t idx : plan.masked)
    if (tokens[size_t(idx)].timestep >= 0) ++per_step[size_t(tokens[size_t(idx)].timestep)];
  int whole = 0;
  for (int t = 0; t < 12; ++t)
    if (per_step[size_t(t)] == 9) ++whole;
  CHECK(whole >= 9);  // 82 / 9 = 9 whole steps fit
}

TEST_CASE("contiguous strategy masks one run of steps") {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    PixelSample s;
    s.init_storage();
    auto tokens = build_token_layout(s);
    Rng trng = rng.split(uint64_t(trial));
    MaskPlan plan = build_mask(tokens, 0.75, MaskStrategy::ContiguousTimesteps, trng);
    std::array<int, 12> per_step{};
    for (int32_t idx : plan.masked)
      if (tokens[size_t(idx)].timestep >= 0) ++per_step[size_t(tokens[size_t(idx)].timestep)];
    std::vector<int> whole;
    for (int t = 0; t < 12; ++t)
      if (per_step[size_t(t)] == 9) whole.push_back(t);
    REQUIRE(whole.size() == 9);  // largest fitting run: 81 <= 82 tokens
    for (size_t i = 1; i < whole.size(); ++i) CHECK(whole[i] == whole[i - 1] + 1);
  }
}

TEST_CASE("mask errors") {
  Rng rng(7);
  PixelSample s;
  s.init_storage();
  auto tokens = build_token_layout(s);
  CHECK_THROWS_AS(build_mask(tokens, 0.0, MaskStrategy::Random, rng), std::invalid_argument);
  CHECK_THROWS_AS(build_mask(tokens, 1.0, MaskStrategy::Random, rng), std::invalid_argument);
  CHECK_THROWS_AS(build_mask({}, 0.5, MaskStrategy::Random, rng), std::invalid_argument);
  CHECK_THROWS_AS(build_mask(tokens, 0.5, MaskStrategy::Combined, rng), std::invalid_argument);

  MaskPlan bad;
  bad.masked = {int32_t(tokens.size() - 1)};  // Loc
  CHECK_THROWS_AS(apply_mask(tokens, bad), std::invalid_argument);
  bad.masked = {0, 0};
  CHECK_THROWS_AS(apply_mask(tokens, bad), std::invalid_argument);
  bad.masked = {int32_t(tokens.size())};
  CHECK_THROWS_AS(apply_mask(tokens, bad), std::out_of_range);
}

TEST_CASE("targets carry the masked token contents") {
  Rng rng(8);
  PixelSample s;
  s.init_storage();
  for (int t = 0; t < s.T; ++t) s.dw[size_t(t)] = uint8_t(t % kDwClasses);
  auto tokens = build_token_layout(s);
  MaskPlan plan = build_mask(tokens, 0.75, MaskStrategy::Random, rng);
  MaskedSplit split = apply_mask(tokens, plan);
  for (const auto& tg : split.targets) {
    const TokenInfo& tok = tokens[size_t(tg.token_index)];
    CHECK(tg.group == tok.group);
    CHECK(tg.values == tok.values);
    CHECK(tg.dw_id == tok.dw_id);
  }
}
