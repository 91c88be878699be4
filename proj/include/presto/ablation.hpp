#pragma once

#include <string>
#include <vector>

#include "presto/pretrain.hpp"

namespace presto {

enum class AblationKind { Masking, Scaling };

struct AblationRow {
  std::string name;
  int depth = 0;
  int width = 0;
  int64_t params = 0;
  int64_t flops = 0;  // full-input encoder + decoder MACs
  double f1 = 0.0;    // probe macro F1 on held-out half
};

// Masking: the four single strategies plus the combined draw, probe F1 each.
// Scaling: the 2x128 / 4x128 / 2x256 encoder grid with params and FLOPs.
std::vector<AblationRow> run_ablation(AblationKind kind, const Dataset& labeled,
                                      const ModelConfig& base_model,
                                      const PretrainConfig& base_cfg);

}  // namespace presto
