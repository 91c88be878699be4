#include "presto/masking.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace presto {

const char* mask_strategy_name(MaskStrategy s) {
  switch (s) {
    case MaskStrategy::Random: return "random";
    case MaskStrategy::ChannelGroups: return "channel";
    case MaskStrategy::Timesteps: return "timestep";
    case MaskStrategy::ContiguousTimesteps: return "contiguous";
    case MaskStrategy::Combined: return "combined";
  }
  return "?";
}

MaskStrategy mask_strategy_from_name(const std::string& name) {
  for (auto s : {MaskStrategy::Random, MaskStrategy::ChannelGroups,
                 MaskStrategy::Timesteps, MaskStrategy::ContiguousTimesteps,
                 MaskStrategy::Combined})
    if (name == mask_strategy_name(s)) return s;
  throw std::invalid_argument("unknown masking strategy: " + name);
}

MaskStrategy draw_strategy(Rng& rng) {
  return MaskStrategy(int(rng.uniform_int(4)));
}

namespace {

// Draw `count` distinct elements from pool (order irrelevant, pool mutated).
std::vector<int32_t> sample_without_replacement(std::vector<int32_t>& pool,
                                                int64_t count, Rng& rng) {
  std::vector<int32_t> out;
  out.reserve(size_t(count));
  for (int64_t i = 0; i < count; ++i) {
    size_t j = size_t(rng.uniform_int(pool.size()));
    out.push_back(pool[j]);
    pool[j] = pool.back();
    pool.pop_back();
  }
  return out;
}

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (size_t i = v.size(); i > 1; --i)
    std::swap(v[i - 1], v[size_t(rng.uniform_int(i))]);
}

}  // namespace

MaskPlan build_mask(const std::vector<TokenInfo>& tokens, double ratio,
                    MaskStrategy strategy, Rng& rng) {
  if (!(ratio > 0.0 && ratio < 1.0))
    throw std::invalid_argument("build_mask: ratio must be in (0, 1)");
  if (tokens.empty()) throw std::invalid_argument("build_mask: empty sequence");
  if (strategy == MaskStrategy::Combined)
    throw std::invalid_argument("build_mask: draw a concrete strategy first");

  std::vector<int32_t> maskable;
  int max_t = -1;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i].maskable) maskable.push_back(int32_t(i));
    max_t = std::max(max_t, tokens[i].timestep);
  }
  const int T = max_t + 1;
  const int64_t budget = llround(ratio * double(maskable.size()));
  if (budget >= int64_t(maskable.size()))
    throw std::invalid_argument("build_mask: budget leaves nothing to encode");

  std::vector<int32_t> chosen;
  chosen.reserve(size_t(budget));
  std::vector<char> taken(tokens.size(), 0);
  int64_t remaining = budget;
  auto take = [&](int32_t idx) {
    chosen.push_back(idx);
    taken[size_t(idx)] = 1;
    --remaining;
  };

  if (strategy == MaskStrategy::ChannelGroups) {
    // Whole dynamic groups in random order until the next one no longer fits.
    std::vector<std::vector<int32_t>> by_group(kNumDynamic);
    for (size_t i = 0; i < tokens.size(); ++i)
      if (tokens[i].timestep >= 0) by_group[size_t(int(tokens[i].group))].push_back(int32_t(i));
    std::vector<int> order;
    for (int g = 0; g < kNumDynamic; ++g)
      if (!by_group[size_t(g)].empty()) order.push_back(g);
    shuffle(order, rng);
    for (int g : order) {
      if (int64_t(by_group[size_t(g)].size()) > remaining) break;
      for (int32_t idx : by_group[size_t(g)]) take(idx);
    }
  } else if (strategy == MaskStrategy::Timesteps ||
             strategy == MaskStrategy::ContiguousTimesteps) {
    std::vector<std::vector<int32_t>> by_step(size_t(std::max(T, 0)));
    for (size_t i = 0; i < tokens.size(); ++i)
      if (tokens[i].timestep >= 0) by_step[size_t(tokens[i].timestep)].push_back(int32_t(i));
    if (strategy == MaskStrategy::Timesteps) {
      std::vector<int> order(size_t(T), 0);
      for (int t = 0; t < T; ++t) order[size_t(t)] = t;
      shuffle(order, rng);
      for (int t : order) {
        if (by_step[size_t(t)].empty()) continue;
        if (int64_t(by_step[size_t(t)].size()) > remaining) break;
        for (int32_t idx : by_step[size_t(t)]) take(idx);
      }
    } else {
      // Largest contiguous run of whole timesteps that fits, placed uniformly
      // among the fitting placements of that length.
      std::vector<int64_t> prefix(size_t(T) + 1, 0);
      for (int t = 0; t < T; ++t)
        prefix[size_t(t) + 1] = prefix[size_t(t)] + int64_t(by_step[size_t(t)].size());
      for (int len = T; len >= 1; --len) {
        std::vector<int> starts;
        for (int st = 0; st + len <= T; ++st)
          if (prefix[size_t(st + len)] - prefix[size_t(st)] <= remaining) starts.push_back(st);
        if (starts.empty()) continue;
        int st = starts[size_t(rng.uniform_int(starts.size()))];
        for (int t = st; t < st + len; ++t)
          for (int32_t idx : by_step[size_t(t)]) take(idx);
        break;
      }
    }
  }

  // Random strategy masks nothing structurally; everything is a uniform draw.
  if (remaining > 0) {
    std::vector<int32_t> pool;
    for (int32_t idx : maskable)
      if (!taken[size_t(idx)]) pool.push_back(idx);
    for (int32_t idx : sample_without_replacement(pool, remaining, rng)) take(idx);
  }

  std::sort(chosen.begin(), chosen.end());
  return MaskPlan{strategy, std::move(chosen), ratio, budget};
}

MaskedSplit apply_mask(const std::vector<TokenInfo>& tokens, const MaskPlan& plan) {
  std::vector<char> is_masked(tokens.size(), 0);
  for (int32_t idx : plan.masked) {
    if (idx < 0 || size_t(idx) >= tokens.size())
      throw std::out_of_range("apply_mask: token index out of range");
    if (is_masked[size_t(idx)])
      throw std::invalid_argument("apply_mask: duplicate masked index");
    if (!tokens[size_t(idx)].maskable)
      throw std::invalid_argument("apply_mask: plan masks a non-maskable token");
    is_masked[size_t(idx)] = 1;
  }
  MaskedSplit out;
  out.visible.reserve(tokens.size() - plan.masked.size());
  out.targets.reserve(plan.masked.size());
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (!is_masked[i]) {
      out.visible.push_back(int32_t(i));
      continue;
    }
    const TokenInfo& tok = tokens[i];
    MaskTarget tg;
    tg.token_index = int32_t(i);
    tg.group = tok.group;
    tg.timestep = tok.timestep;
    tg.month = tok.month;
    tg.values = tok.values;
    tg.dw_id = tok.dw_id;
    out.targets.push_back(tg);
  }
  return out;
}

}  // namespace presto
