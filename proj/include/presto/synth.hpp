#pragma once

#include <cstdint>
#include <vector>

#include "presto/data.hpp"

namespace presto {

// Config for the synthetic pixel world. Each class has a per-channel seasonal
// signature (base level, amplitude, phase); samples add per-sample gain and
// phase jitter, Gaussian noise, and Bernoulli cloud dropout per
// (timestep, dynamic group). Everything is a pure function of the seed.
struct SyntheticWorldConfig {
  int64_t n_samples = 10000;
  int n_classes = 4;
  int T = kDefaultT;
  double noise_sigma = 0.1;
  double gain_jitter = 0.2;    // multiplicative amplitude jitter, U(1-j, 1+j)
  double phase_jitter = 0.75;  // per-sample phase shift, N(0, j) months
  double dropout = 0.0;        // presence dropout per (timestep, dynamic group)
  double dw_match_prob = 0.35; // chance a DW step follows the class signature
  uint64_t seed = 0;

  // Optional explicit signature tables, [class][channel] over the 15 dynamic
  // continuous channels. Empty tables are derived from the seed.
  std::vector<std::vector<float>> base, amplitude, phase;
};

Dataset generate_synthetic(const SyntheticWorldConfig& cfg);

}  // namespace presto
