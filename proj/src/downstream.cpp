#include "presto/downstream.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

#include "presto/optim.hpp"

namespace presto {

namespace {

std::vector<std::vector<TokenInfo>> layouts_for(const Checkpoint& ckpt, const Dataset& ds,
                                                int months = -1) {
  if (!ckpt.norm_stats.valid()) throw std::invalid_argument("embed: checkpoint lacks stats");
  std::vector<std::vector<TokenInfo>> out;
  out.reserve(ds.samples.size());
  for (const auto& s : ds.samples) {
    PixelSample n = normalize(s, ckpt.norm_stats);
    if (months >= 0 && months < n.T) {
      for (int t = months; t < n.T; ++t)
        for (int g = 0; g < kNumDynamic; ++g)
          n.presence_dyn[size_t(t) * kNumDynamic + g] = 0;
    }
    out.push_back(build_token_layout(n));
  }
  return out;
}

void standardize_features(const std::vector<std::vector<float>>& x, Probe& p) {
  const size_t d = x[0].size();
  p.feat_mean.assign(d, 0.0f);
  p.feat_std.assign(d, 0.0f);
  for (const auto& row : x)
    for (size_t j = 0; j < d; ++j) p.feat_mean[j] += row[j];
  for (size_t j = 0; j < d; ++j) p.feat_mean[j] /= float(x.size());
  for (const auto& row : x)
    for (size_t j = 0; j < d; ++j) {
      float v = row[j] - p.feat_mean[j];
      p.feat_std[j] += v * v;
    }
  for (size_t j = 0; j < d; ++j) {
    p.feat_std[j] = std::sqrt(p.feat_std[j] / float(x.size()));
    if (p.feat_std[j] < 1e-12f) {
      p.feat_std[j] = 1.0f;
      p.degenerate_features = true;
    }
  }
}

std::vector<float> apply_standardize(const Probe& p, const std::vector<float>& row) {
  std::vector<float> z(row.size() + 1);
  for (size_t j = 0; j < row.size(); ++j)
    z[j] = (row[j] - p.feat_mean[j]) / p.feat_std[j];
  z.back() = 1.0f;  // bias feature
  return z;
}

// Mean multinomial cross-entropy and gradient for weights w ((d+1) x K).
double logistic_loss_grad(const std::vector<std::vector<float>>& z,
                          const std::vector<int32_t>& y, const std::vector<double>& w,
                          int K, std::vector<double>* grad) {
  const size_t d1 = z[0].size();
  if (grad) grad->assign(w.size(), 0.0);
  double loss = 0.0;
  std::vector<double> logits(size_t(K), 0.0);
  for (size_t i = 0; i < z.size(); ++i) {
    for (int k = 0; k < K; ++k) {
      double acc = 0.0;
      for (size_t j = 0; j < d1; ++j) acc += double(z[i][j]) * w[j * size_t(K) + size_t(k)];
      logits[size_t(k)] = acc;
    }
    double mx = *std::max_element(logits.begin(), logits.end());
    double lse = 0.0;
    for (double l : logits) lse += std::exp(l - mx);
    lse = mx + std::log(lse);
    loss += lse - logits[size_t(y[i])];
    if (grad) {
      for (int k = 0; k < K; ++k) {
        double p = std::exp(logits[size_t(k)] - lse) - (k == y[i] ? 1.0 : 0.0);
        for (size_t j = 0; j < d1; ++j)
          (*grad)[j * size_t(K) + size_t(k)] += p * double(z[i][j]) / double(z.size());
      }
    }
  }
  return loss / double(z.size());
}

// Ridge least squares via normal equations and Cholesky.
std::vector<float> ridge_solve(const std::vector<std::vector<float>>& z,
                               const std::vector<float>& y, double eps) {
  const size_t d = z[0].size();
  std::vector<double> a(d * d, 0.0), b(d, 0.0);
  for (size_t i = 0; i < z.size(); ++i) {
    for (size_t r = 0; r < d; ++r) {
      b[r] += double(z[i][r]) * y[i];
      for (size_t c = r; c < d; ++c) a[r * d + c] += double(z[i][r]) * z[i][c];
    }
  }
  for (size_t r = 0; r < d; ++r) {
    a[r * d + r] += eps;
    for (size_t c = 0; c < r; ++c) a[r * d + c] = a[c * d + r];
  }
  // Cholesky a = L L^T
  for (size_t r = 0; r < d; ++r) {
    for (size_t c = 0; c <= r; ++c) {
      double s = a[r * d + c];
      for (size_t k = 0; k < c; ++k) s -= a[r * d + k] * a[c * d + k];
      if (r == c) {
        if (s <= 0.0) throw std::runtime_error("ridge: matrix not positive definite");
        a[r * d + r] = std::sqrt(s);
      } else {
        a[r * d + c] = s / a[c * d + c];
      }
    }
  }
  std::vector<double> w(d);
  for (size_t r = 0; r < d; ++r) {
    double s = b[r];
    for (size_t k = 0; k < r; ++k) s -= a[r * d + k] * w[k];
    w[r] = s / a[r * d + r];
  }
  for (size_t ri = d; ri-- > 0;) {
    double s = w[ri];
    for (size_t k = ri + 1; k < d; ++k) s -= a[k * d + ri] * w[k];
    w[ri] = s / a[ri * d + ri];
  }
  return std::vector<float>(w.begin(), w.end());
}

}  // namespace

std::vector<std::vector<float>> embed_dataset(const Checkpoint& ckpt, const Dataset& ds) {
  return encode_pooled(ckpt, layouts_for(ckpt, ds));
}

std::vector<std::vector<float>> embed_dataset_months(const Checkpoint& ckpt,
                                                     const Dataset& ds, int months) {
  if (months <= 0) throw std::invalid_argument("embed: months must be positive");
  return encode_pooled(ckpt, layouts_for(ckpt, ds, months));
}

Probe fit_probe_class(const std::vector<std::vector<float>>& x,
                      const std::vector<int32_t>& y, ProbeSpec spec) {
  if (x.empty() || x.size() != y.size())
    throw std::invalid_argument("probe: empty or misaligned inputs");
  if (spec.kind == ProbeSpec::Kind::Linear)
    throw std::invalid_argument("probe: linear regression is for real targets");
  std::set<int32_t> classes(y.begin(), y.end());
  if (classes.size() < 2) throw std::invalid_argument("probe: need at least 2 classes");
  if (*classes.begin() < 0) throw std::invalid_argument("probe: negative class id");
  Probe p;
  p.spec = spec;
  p.n_classes = *classes.rbegin() + 1;
  if (spec.kind == ProbeSpec::Kind::Knn) {
    if (spec.k < 1) throw std::invalid_argument("probe: k must be >= 1");
    p.train_x = x;
    p.train_y = y;
    return p;
  }
  standardize_features(x, p);
  std::vector<std::vector<float>> z;
  z.reserve(x.size());
  for (const auto& row : x) z.push_back(apply_standardize(p, row));
  const int K = p.n_classes;
  std::vector<double> w(z[0].size() * size_t(K), 0.0), grad;
  double lr = 1.0;
  double loss = logistic_loss_grad(z, y, w, K, &grad);
  for (int step = 0; step < 10000; ++step) {
    std::vector<double> wn(w.size());
    double new_loss;
    for (;;) {
      for (size_t j = 0; j < w.size(); ++j) wn[j] = w[j] - lr * grad[j];
      new_loss = logistic_loss_grad(z, y, wn, K, nullptr);
      if (new_loss <= loss) break;
      lr *= 0.5;
      if (lr < 1e-12) break;
    }
    if (lr < 1e-12) break;
    w.swap(wn);
    double improved = loss - new_loss;
    loss = new_loss;
    logistic_loss_grad(z, y, w, K, &grad);
    if (improved < 1e-6) break;
    lr *= 1.05;  // gentle recovery after backtracking
  }
  p.weights.assign(w.begin(), w.end());
  return p;
}

Probe fit_probe_real(const std::vector<std::vector<float>>& x, const std::vector<float>& y) {
  if (x.empty() || x.size() != y.size())
    throw std::invalid_argument("probe: empty or misaligned inputs");
  Probe p;
  p.spec.kind = ProbeSpec::Kind::Linear;
  standardize_features(x, p);
  std::vector<std::vector<float>> z;
  z.reserve(x.size());
  for (const auto& row : x) z.push_back(apply_standardize(p, row));
  p.weights = ridge_solve(z, y, 1e-6);
  return p;
}

std::vector<int32_t> predict_class(const Probe& probe,
                                   const std::vector<std::vector<float>>& x) {
  std::vector<int32_t> out;
  out.reserve(x.size());
  if (probe.spec.kind == ProbeSpec::Kind::Knn) {
    for (const auto& q : x) {
      std::vector<std::pair<double, int32_t>> dist;
      dist.reserve(probe.train_x.size());
      for (size_t i = 0; i < probe.train_x.size(); ++i) {
        double d = 0.0;
        for (size_t j = 0; j < q.size(); ++j) {
          double v = double(q[j]) - probe.train_x[i][j];
          d += v * v;
        }
        dist.emplace_back(d, probe.train_y[i]);
      }
      int k = std::min<int>(probe.spec.k, int(dist.size()));
      std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
      std::map<int32_t, int> votes;
      for (int i = 0; i < k; ++i) ++votes[dist[size_t(i)].second];
      int best_votes = -1;
      int32_t best_class = 0;
      for (const auto& [cls, v] : votes)
        if (v > best_votes) { best_votes = v; best_class = cls; }  // map order: ties -> smallest id
      out.push_back(best_class);
    }
    return out;
  }
  const int K = probe.n_classes;
  for (const auto& q : x) {
    auto z = apply_standardize(probe, q);
    int32_t best = 0;
    double best_v = -1e300;
    for (int k = 0; k < K; ++k) {
      double acc = 0.0;
      for (size_t j = 0; j < z.size(); ++j) acc += double(z[j]) * probe.weights[j * size_t(K) + size_t(k)];
      if (acc > best_v) { best_v = acc; best = k; }
    }
    out.push_back(best);
  }
  return out;
}

std::vector<float> predict_value(const Probe& probe,
                                 const std::vector<std::vector<float>>& x) {
  if (probe.spec.kind != ProbeSpec::Kind::Linear)
    throw std::invalid_argument("probe: not a regression probe");
  std::vector<float> out;
  out.reserve(x.size());
  for (const auto& q : x) {
    auto z = apply_standardize(probe, q);
    double acc = 0.0;
    for (size_t j = 0; j < z.size(); ++j) acc += double(z[j]) * probe.weights[j];
    out.push_back(float(acc));
  }
  return out;
}

double accuracy(const std::vector<int32_t>& truth, const std::vector<int32_t>& pred) {
  if (truth.size() != pred.size() || truth.empty())
    throw std::invalid_argument("accuracy: misaligned inputs");
  int64_t hit = 0;
  for (size_t i = 0; i < truth.size(); ++i) hit += truth[i] == pred[i];
  return double(hit) / double(truth.size());
}

double macro_f1(const std::vector<int32_t>& truth, const std::vector<int32_t>& pred) {
  if (truth.size() != pred.size() || truth.empty())
    throw std::invalid_argument("macro_f1: misaligned inputs");
  std::set<int32_t> classes(truth.begin(), truth.end());
  double f1_sum = 0.0;
  for (int32_t c : classes) {
    int64_t tp = 0, fp = 0, fn = 0;
    for (size_t i = 0; i < truth.size(); ++i) {
      if (pred[i] == c && truth[i] == c) ++tp;
      else if (pred[i] == c) ++fp;
      else if (truth[i] == c) ++fn;
    }
    double denom = double(2 * tp + fp + fn);
    f1_sum += denom > 0 ? 2.0 * double(tp) / denom : 0.0;
  }
  return f1_sum / double(classes.size());
}

double rmse(const std::vector<float>& truth, const std::vector<float>& pred) {
  if (truth.size() != pred.size() || truth.empty())
    throw std::invalid_argument("rmse: misaligned inputs");
  double s = 0.0;
  for (size_t i = 0; i < truth.size(); ++i) {
    double d = double(truth[i]) - pred[i];
    s += d * d;
  }
  return std::sqrt(s / double(truth.size()));
}

FinetuneResult finetune(const Checkpoint& ckpt, const Dataset& labeled,
                        const FinetuneConfig& cfg) {
  if (labeled.samples.empty()) throw std::invalid_argument("finetune: empty dataset");
  int32_t max_label = -1;
  for (int32_t l : labeled.labels) {
    if (l < 0) throw std::invalid_argument("finetune: unlabeled sample");
    max_label = std::max(max_label, l);
  }
  const int K = max_label + 1;
  if (K < 2) throw std::invalid_argument("finetune: need at least 2 classes");

  Rng rng(cfg.seed, 21);
  std::vector<size_t> order(labeled.samples.size());
  std::iota(order.begin(), order.end(), size_t(0));
  for (size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[size_t(rng.uniform_int(i))]);
  size_t n_val = size_t(double(order.size()) * cfg.val_fraction);
  if (n_val == 0) throw std::invalid_argument("finetune: empty validation split");
  std::vector<size_t> val_idx(order.begin(), order.begin() + int64_t(n_val));
  std::vector<size_t> train_idx(order.begin() + int64_t(n_val), order.end());
  if (train_idx.empty()) throw std::invalid_argument("finetune: empty training split");

  FinetuneResult res;
  res.ckpt.config = ckpt.config;
  res.ckpt.norm_stats = ckpt.norm_stats;
  for (const auto& [name, t] : ckpt.params) res.ckpt.params.add(name, t);
  if (!res.ckpt.params.has("ft.head.w")) {
    Tensor hw({ckpt.config.d_e, K});
    for (auto& v : hw.data) v = float(rng.trunc_normal(0.02));
    res.ckpt.params.add("ft.head.w", std::move(hw));
    res.ckpt.params.add("ft.head.b", Tensor({K}, 0.0f));
  }

  // Only the tokenizer, encoder and head take gradient steps.
  auto trained = [](const std::string& n) {
    return n.rfind("tok.", 0) == 0 || n.rfind("enc.", 0) == 0 || n.rfind("ft.", 0) == 0;
  };

  auto layouts = layouts_for(res.ckpt, labeled);
  auto eval_split = [&](const std::vector<size_t>& idx) {
    std::vector<std::vector<TokenInfo>> subset;
    std::vector<int32_t> truth;
    for (size_t i : idx) {
      subset.push_back(layouts[i]);
      truth.push_back(labeled.labels[i]);
    }
    auto emb = encode_pooled(res.ckpt, subset);
    const Tensor& hw = res.ckpt.params.at("ft.head.w");
    const Tensor& hb = res.ckpt.params.at("ft.head.b");
    std::vector<int32_t> pred;
    for (const auto& e : emb) {
      int32_t best = 0;
      double best_v = -1e300;
      for (int k = 0; k < K; ++k) {
        double acc = hb.data[size_t(k)];
        for (int j = 0; j < ckpt.config.d_e; ++j) acc += double(e[size_t(j)]) * hw.at(j, k);
        if (acc > best_v) { best_v = acc; best = k; }
      }
      pred.push_back(best);
    }
    return accuracy(truth, pred);
  };

  AdamW opt({0.9, 0.95, 1e-8, cfg.weight_decay});
  ParamStore best = res.ckpt.params;
  double best_acc = eval_split(val_idx);
  res.best_epoch = -1;
  int since_best = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng erng = rng.split(uint64_t(epoch) + 1);
    std::vector<size_t> sched = train_idx;
    for (size_t i = sched.size(); i > 1; --i)
      std::swap(sched[i - 1], sched[size_t(erng.uniform_int(i))]);
    for (size_t b0 = 0; b0 < sched.size(); b0 += size_t(cfg.batch_size)) {
      size_t b1 = std::min(sched.size(), b0 + size_t(cfg.batch_size));
      GraphContext<float> g(res.ckpt.params);
      std::vector<BatchEntry> batch;
      std::vector<int32_t> ys;
      for (size_t i = b0; i < b1; ++i) {
        BatchEntry e;
        e.tokens = &layouts[sched[i]];
        e.encoder_indices.resize(layouts[sched[i]].size());
        std::iota(e.encoder_indices.begin(), e.encoder_indices.end(), 0);
        batch.push_back(std::move(e));
        ys.push_back(labeled.labels[sched[i]]);
      }
      auto enc = encode_batch(g, res.ckpt.config, batch);
      auto logits = g.tape().linear(enc.pooled, g.p("ft.head.w"), g.p("ft.head.b"));
      auto loss = g.tape().cross_entropy_mean(logits, ys);
      g.tape().backward(loss);
      std::vector<Tensor*> params;
      std::vector<const Tensor*> grads;
      std::vector<Tensor> zero_grads;
      zero_grads.reserve(res.ckpt.params.size());
      for (auto& [name, t] : res.ckpt.params) {
        params.push_back(&t);
        if (trained(name)) {
          grads.push_back(&g.grad(name));
        } else {
          zero_grads.emplace_back(t.shape, 0.0f);
          grads.push_back(&zero_grads.back());
        }
      }
      opt.step(params, grads, cfg.lr);
    }
    double acc = eval_split(val_idx);
    if (acc > best_acc) {
      best_acc = acc;
      best = res.ckpt.params;
      res.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  res.ckpt.params = std::move(best);
  res.val_accuracy = best_acc;
  return res;
}

std::vector<int32_t> predict_finetuned(const Checkpoint& ckpt, const Dataset& ds) {
  const Tensor& hw = ckpt.params.at("ft.head.w");
  const Tensor& hb = ckpt.params.at("ft.head.b");
  auto emb = embed_dataset(ckpt, ds);
  std::vector<int32_t> pred;
  pred.reserve(emb.size());
  for (const auto& e : emb) {
    int32_t best = 0;
    double best_v = -1e300;
    for (int64_t k = 0; k < hw.cols(); ++k) {
      double acc = hb.data[size_t(k)];
      for (int64_t j = 0; j < hw.rows(); ++j) acc += double(e[size_t(j)]) * hw.at(j, k);
      if (acc > best_v) { best_v = acc; best = int32_t(k); }
    }
    pred.push_back(best);
  }
  return pred;
}

std::vector<float> aggregate_image(const Checkpoint& ckpt,
                                   const std::vector<PixelSample>& pixels) {
  if (pixels.empty()) throw std::invalid_argument("aggregate: empty image");
  Dataset ds;
  ds.samples = pixels;
  ds.labels.assign(pixels.size(), -1);
  auto emb = embed_dataset(ckpt, ds);
  const size_t d = emb[0].size();
  std::vector<float> out(2 * d, 0.0f);
  for (const auto& e : emb)
    for (size_t j = 0; j < d; ++j) out[j] += e[j];
  for (size_t j = 0; j < d; ++j) out[j] /= float(emb.size());
  for (const auto& e : emb)
    for (size_t j = 0; j < d; ++j) {
      float v = e[j] - out[j];
      out[d + j] += v * v;
    }
  for (size_t j = 0; j < d; ++j) out[d + j] = std::sqrt(out[d + j] / float(emb.size()));
  return out;
}

}  // namespace presto
