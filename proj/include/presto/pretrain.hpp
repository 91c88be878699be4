#pragma once

#include <functional>
#include <vector>

#include "presto/masking.hpp"
#include "presto/model.hpp"

namespace presto {

struct PretrainConfig {
  int epochs = 10;
  int batch_size = 256;
  double mask_ratio = 0.75;
  double lambda = 2.0;  // categorical loss weight
  double lr_max = 1e-3;
  double weight_decay = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.95;
  int64_t warmup_steps = -1;  // < 0: one tenth of total steps
  uint64_t seed = 0;
  // Strategies drawn per instance; one entry pins that strategy throughout.
  std::vector<MaskStrategy> strategies = {
      MaskStrategy::Random, MaskStrategy::ChannelGroups, MaskStrategy::Timesteps,
      MaskStrategy::ContiguousTimesteps};
};

// Reconstruction loss split. Means are over masked continuous values and
// masked categorical tokens respectively; the combined value re-weights the
// cross-entropy by lambda * n_cat / n_cont.
struct LossReport {
  double mse = 0.0;
  double ce = 0.0;
  int64_t n_cont = 0;  // masked continuous values
  int64_t n_cat = 0;   // masked categorical tokens
  double lambda = 2.0;

  double total() const {
    if (n_cont == 0) return lambda * ce;
    if (n_cat == 0) return mse;
    return mse + lambda * (double(n_cat) / double(n_cont)) * ce;
  }
};

struct PretrainResult {
  Checkpoint ckpt;
  std::vector<LossReport> epoch_losses;
};

using EpochCallback = std::function<void(int epoch, const LossReport&, double lr)>;

// Masked-autoencoder pretraining on raw (unnormalized) samples. Normalization
// stats are computed here and stored in the checkpoint. Deterministic for a
// fixed seed and dataset.
PretrainResult pretrain(const Dataset& raw, const ModelConfig& mcfg,
                        const PretrainConfig& cfg, const EpochCallback& on_epoch = {});

// Quick downstream check: logistic probe fitted on even-indexed samples,
// macro F1 on the odd-indexed rest.
double validate_probe(const Checkpoint& ckpt, const Dataset& labeled);

}  // namespace presto
