#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "presto/rng.hpp"
#include "presto/tokenizer.hpp"

namespace presto {

// Combined is the training mode (a fresh draw per instance); build_mask only
// accepts the four concrete strategies.
enum class MaskStrategy {
  Random = 0,
  ChannelGroups,
  Timesteps,
  ContiguousTimesteps,
  Combined,
};

const char* mask_strategy_name(MaskStrategy s);
MaskStrategy mask_strategy_from_name(const std::string& name);

struct MaskPlan {
  MaskStrategy strategy;
  std::vector<int32_t> masked;  // sorted token indices
  double ratio;
  int64_t budget;  // == llround(ratio * #maskable) == masked.size()
};

// Uniform draw over the four concrete strategies.
MaskStrategy draw_strategy(Rng& rng);

// Budget-exact mask construction: whole-unit greedy fit for the structured
// strategies, then uniform top-up from the remaining maskable tokens.
MaskPlan build_mask(const std::vector<TokenInfo>& tokens, double ratio,
                    MaskStrategy strategy, Rng& rng);

struct MaskTarget {
  int32_t token_index;
  Group group;
  int timestep;  // -1 for TG
  int month;
  std::array<float, 3> values{};  // continuous targets
  int dw_id = -1;                 // categorical target
};

struct MaskedSplit {
  std::vector<int32_t> visible;      // token indices not in the plan
  std::vector<MaskTarget> targets;   // one per masked token
};

MaskedSplit apply_mask(const std::vector<TokenInfo>& tokens, const MaskPlan& plan);

}  // namespace presto
