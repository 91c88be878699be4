#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "presto/tensor.hpp"

namespace presto {

// Linear warmup to lr_max over warmup_steps, then half-cosine decay to zero
// at total_steps. Out-of-range steps clamp.
inline double cosine_lr(int64_t step, int64_t total_steps, int64_t warmup_steps,
                        double lr_max) {
  if (warmup_steps >= total_steps)
    throw std::invalid_argument("cosine_lr: warmup must precede total");
  if (step < 0) step = 0;
  if (step > total_steps) step = total_steps;
  if (step < warmup_steps)
    return lr_max * double(step) / double(warmup_steps);
  double t = double(step - warmup_steps) / double(total_steps - warmup_steps);
  return lr_max * 0.5 * (1.0 + std::cos(M_PI * t));
}

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  double weight_decay = 0.05;
};

// Decoupled-weight-decay Adam. Moments live per parameter; `step` counts
// completed updates and drives bias correction.
class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

  int64_t step_count() const { return step_; }
  const AdamWConfig& config() const { return cfg_; }

  // params and grads must be aligned (same count and shapes across calls).
  void step(std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
            double lr) {
    if (params.size() != grads.size())
      throw std::invalid_argument("adamw: param/grad count mismatch");
    if (lr < 0) throw std::invalid_argument("adamw: negative lr");
    if (m_.empty()) {
      for (auto* p : params) {
        m_.emplace_back(p->shape, 0.0f);
        v_.emplace_back(p->shape, 0.0f);
      }
    }
    if (m_.size() != params.size())
      throw std::invalid_argument("adamw: parameter set changed");
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, double(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, double(step_));
    for (size_t i = 0; i < params.size(); ++i) {
      Tensor& p = *params[i];
      const Tensor& g = *grads[i];
      if (p.shape != g.shape) throw std::invalid_argument("adamw: shape mismatch");
      Tensor& m = m_[i];
      Tensor& v = v_[i];
      const float decay = float(1.0 - lr * cfg_.weight_decay);
      for (size_t j = 0; j < p.data.size(); ++j) {
        double gj = g.data[j];
        m.data[j] = float(cfg_.beta1 * m.data[j] + (1.0 - cfg_.beta1) * gj);
        v.data[j] = float(cfg_.beta2 * v.data[j] + (1.0 - cfg_.beta2) * gj * gj);
        double mhat = m.data[j] / bc1;
        double vhat = v.data[j] / bc2;
        p.data[j] = decay * p.data[j] -
                    float(lr * mhat / (std::sqrt(vhat) + cfg_.eps));
      }
    }
  }

 private:
  AdamWConfig cfg_;
  int64_t step_ = 0;
  std::vector<Tensor> m_, v_;
};

}  // namespace presto
