#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "presto/model.hpp"
#include "presto/synth.hpp"

namespace presto {

// Pooled encoder embedding per sample; inputs are raw samples, standardized
// internally with the checkpoint's stored stats.
std::vector<std::vector<float>> embed_dataset(const Checkpoint& ckpt, const Dataset& ds);

// Same, with dynamic tokens restricted to the first `months` timesteps.
std::vector<std::vector<float>> embed_dataset_months(const Checkpoint& ckpt,
                                                     const Dataset& ds, int months);

struct ProbeSpec {
  enum class Kind { Linear, Logistic, Knn };
  Kind kind = Kind::Logistic;
  int k = 5;  // kNN neighbours
};

// A fitted shallow model over embeddings. Logistic regression is fitted by
// full-batch gradient descent (tolerance 1e-6, max 10k steps); linear
// regression by ridge least squares (eps 1e-6); kNN stores the training set.
struct Probe {
  ProbeSpec spec;
  int n_classes = 0;
  std::vector<float> feat_mean, feat_std;        // feature standardization
  std::vector<float> weights;                    // (d+1) x K logistic / d+1 linear
  std::vector<std::vector<float>> train_x;       // kNN
  std::vector<int32_t> train_y;
  bool degenerate_features = false;              // constant-feature warning
};

Probe fit_probe_class(const std::vector<std::vector<float>>& x,
                      const std::vector<int32_t>& y, ProbeSpec spec);
Probe fit_probe_real(const std::vector<std::vector<float>>& x,
                     const std::vector<float>& y);
std::vector<int32_t> predict_class(const Probe& probe,
                                   const std::vector<std::vector<float>>& x);
std::vector<float> predict_value(const Probe& probe,
                                 const std::vector<std::vector<float>>& x);

double accuracy(const std::vector<int32_t>& truth, const std::vector<int32_t>& pred);
double macro_f1(const std::vector<int32_t>& truth, const std::vector<int32_t>& pred);
double rmse(const std::vector<float>& truth, const std::vector<float>& pred);

struct FinetuneConfig {
  double lr = 3e-4;
  double weight_decay = 0.05;
  int epochs = 20;
  int batch_size = 64;
  double val_fraction = 0.2;
  int patience = 5;  // early-stop after this many non-improving evaluations
  uint64_t seed = 0;
};

struct FinetuneResult {
  Checkpoint ckpt;       // encoder params updated; adds ft.head.{w,b}
  double val_accuracy = 0.0;
  int best_epoch = -1;
};

// Full-encoder fine-tuning with a linear head on the pooled embedding.
FinetuneResult finetune(const Checkpoint& ckpt, const Dataset& labeled,
                        const FinetuneConfig& cfg);
std::vector<int32_t> predict_finetuned(const Checkpoint& ckpt, const Dataset& ds);

// Per-image descriptor: per-dimension mean and population standard deviation
// of the pixel embeddings, concatenated (mean first) into 2*d_e values.
std::vector<float> aggregate_image(const Checkpoint& ckpt,
                                   const std::vector<PixelSample>& pixels);

}  // namespace presto
