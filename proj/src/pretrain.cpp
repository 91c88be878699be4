#include "presto/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "presto/downstream.hpp"
#include "presto/optim.hpp"

namespace presto {

namespace {

struct BatchLoss {
  double sse = 0.0;       // summed squared error over masked continuous values
  double ce_sum = 0.0;    // summed cross-entropy over masked DW tokens
  int64_t n_cont = 0;
  int64_t n_cat = 0;
};

// Forward/backward for one batch; returns the scalar pieces for reporting.
BatchLoss batch_step(GraphContext<float>& g, const ModelConfig& mcfg,
                     const std::vector<BatchEntry>& batch,
                     const std::vector<const std::vector<MaskTarget>*>& targets,
                     double lambda, bool do_backward) {
  auto& t = g.tape();
  auto enc = encode_batch(g, mcfg, batch);
  auto dec = decode_batch(g, mcfg, batch, enc);

  std::array<std::vector<int32_t>, kNumGroups> rows;
  std::array<std::vector<float>, kNumGroups> vals;
  std::vector<int32_t> dw_rows, dw_ids;
  BatchLoss out;
  for (size_t b = 0; b < batch.size(); ++b) {
    const int32_t row0 = dec.offsets[b];
    for (const MaskTarget& mt : *targets[b]) {
      if (mt.group == Group::DW) {
        dw_rows.push_back(row0 + mt.token_index);
        dw_ids.push_back(mt.dw_id);
        continue;
      }
      const auto& spec = group_spec(mt.group);
      rows[size_t(int(mt.group))].push_back(row0 + mt.token_index);
      for (int c = 0; c < spec.width; ++c)
        vals[size_t(int(mt.group))].push_back(mt.values[size_t(c)]);
      out.n_cont += spec.width;
    }
  }
  out.n_cat = int64_t(dw_ids.size());

  TapeT<float>::Var total = -1;
  if (out.n_cont > 0) {
    TapeT<float>::Var sse_total = -1;
    for (int gi = 0; gi < kNumGroups; ++gi) {
      if (rows[size_t(gi)].empty()) continue;
      const auto& spec = group_table()[size_t(gi)];
      auto h = t.gather_rows(dec.dec_out, rows[size_t(gi)]);
      auto pred = t.linear(h, g.p(head_w_name(Group(gi))), g.p(head_b_name(Group(gi))));
      Tensor tgt({int64_t(rows[size_t(gi)].size()), spec.width},
                 std::vector<float>(vals[size_t(gi)]));
      auto s = t.sse(pred, std::move(tgt));
      sse_total = sse_total < 0 ? s : t.add(sse_total, s);
    }
    out.sse = double(t.value(sse_total).data[0]);
    total = t.scale(sse_total, float(1.0 / double(out.n_cont)));
  }
  if (out.n_cat > 0) {
    auto h = t.gather_rows(dec.dec_out, dw_rows);
    auto logits = t.linear(h, g.p(head_w_name(Group::DW)), g.p(head_b_name(Group::DW)));
    auto ce = t.cross_entropy_mean(logits, dw_ids);
    out.ce_sum = double(t.value(ce).data[0]) * double(out.n_cat);
    const float w =
        float(out.n_cont > 0 ? lambda * double(out.n_cat) / double(out.n_cont) : lambda);
    total = total < 0 ? t.scale(ce, w) : t.add_scaled(total, ce, w);
  }
  if (total < 0) throw std::logic_error("pretrain: batch with no masked tokens");
  if (!std::isfinite(t.value(total).data[0]))
    throw std::runtime_error("pretrain: non-finite loss");
  if (do_backward) t.backward(total);
  return out;
}

}  // namespace

PretrainResult pretrain(const Dataset& raw, const ModelConfig& mcfg,
                        const PretrainConfig& cfg, const EpochCallback& on_epoch) {
  mcfg.validate();
  if (raw.samples.empty()) throw std::invalid_argument("pretrain: empty dataset");
  if (cfg.epochs <= 0 || cfg.batch_size <= 0)
    throw std::invalid_argument("pretrain: bad schedule");
  if (!(cfg.mask_ratio > 0.0 && cfg.mask_ratio < 1.0))
    throw std::invalid_argument("pretrain: mask ratio must be in (0, 1)");
  if (cfg.strategies.empty())
    throw std::invalid_argument("pretrain: no masking strategies");
  for (MaskStrategy s : cfg.strategies)
    if (s == MaskStrategy::Combined)
      throw std::invalid_argument("pretrain: list concrete strategies, not combined");

  PretrainResult res;
  res.ckpt.config = mcfg;
  res.ckpt.norm_stats = compute_norm_stats(raw);
  res.ckpt.params = init_params(mcfg, cfg.seed);

  const size_t N = raw.samples.size();
  std::vector<std::vector<TokenInfo>> layouts;
  layouts.reserve(N);
  for (const auto& s : raw.samples)
    layouts.push_back(build_token_layout(normalize(s, res.ckpt.norm_stats)));

  const int64_t batches_per_epoch = int64_t((N + size_t(cfg.batch_size) - 1) / size_t(cfg.batch_size));
  const int64_t total_steps = int64_t(cfg.epochs) * batches_per_epoch;
  int64_t warmup = cfg.warmup_steps >= 0 ? cfg.warmup_steps
                                         : std::max<int64_t>(1, total_steps / 10);
  warmup = std::min(warmup, total_steps - 1);
  if (warmup < 0) warmup = 0;

  AdamW opt({cfg.beta1, cfg.beta2, 1e-8, cfg.weight_decay});
  Rng root(cfg.seed, 11);
  int64_t global_step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng erng = root.split(uint64_t(epoch));
    std::vector<size_t> order(N);
    std::iota(order.begin(), order.end(), size_t(0));
    Rng srng = erng.split(0);
    for (size_t i = N; i > 1; --i)
      std::swap(order[i - 1], order[size_t(srng.uniform_int(i))]);

    LossReport report;
    report.lambda = cfg.lambda;
    double sse_acc = 0.0, ce_acc = 0.0;
    for (size_t b0 = 0; b0 < N; b0 += size_t(cfg.batch_size)) {
      const size_t b1 = std::min(N, b0 + size_t(cfg.batch_size));
      std::vector<BatchEntry> batch;
      std::vector<std::vector<MaskTarget>> batch_targets;
      batch.reserve(b1 - b0);
      batch_targets.reserve(b1 - b0);
      for (size_t i = b0; i < b1; ++i) {
        const size_t idx = order[i];
        Rng irng = erng.split(1 + idx);
        MaskStrategy strat =
            cfg.strategies.size() == 1
                ? cfg.strategies[0]
                : cfg.strategies[size_t(irng.uniform_int(cfg.strategies.size()))];
        MaskPlan plan = build_mask(layouts[idx], cfg.mask_ratio, strat, irng);
        MaskedSplit split = apply_mask(layouts[idx], plan);
        batch.push_back({&layouts[idx], std::move(split.visible)});
        batch_targets.push_back(std::move(split.targets));
      }
      std::vector<const std::vector<MaskTarget>*> tptrs;
      for (const auto& tg : batch_targets) tptrs.push_back(&tg);

      GraphContext<float> g(res.ckpt.params);
      BatchLoss bl;
      try {
        bl = batch_step(g, mcfg, batch, tptrs, cfg.lambda, /*do_backward=*/true);
      } catch (const std::runtime_error& e) {
        throw std::runtime_error(std::string(e.what()) + " (epoch " +
                                 std::to_string(epoch) + ", batch " +
                                 std::to_string(b0 / size_t(cfg.batch_size)) + ")");
      }
      sse_acc += bl.sse;
      ce_acc += bl.ce_sum;
      report.n_cont += bl.n_cont;
      report.n_cat += bl.n_cat;

      const double lr = cosine_lr(global_step, total_steps, warmup, cfg.lr_max);
      std::vector<Tensor*> params;
      std::vector<const Tensor*> grads;
      for (auto& [name, tensor] : res.ckpt.params) {
        params.push_back(&tensor);
        grads.push_back(&g.grad(name));
      }
      opt.step(params, grads, lr);
      ++global_step;
    }
    report.mse = report.n_cont > 0 ? sse_acc / double(report.n_cont) : 0.0;
    report.ce = report.n_cat > 0 ? ce_acc / double(report.n_cat) : 0.0;
    res.epoch_losses.push_back(report);
    if (on_epoch)
      on_epoch(epoch, report,
               cosine_lr(global_step, total_steps, warmup, cfg.lr_max));
  }
  return res;
}

double validate_probe(const Checkpoint& ckpt, const Dataset& labeled) {
  if (labeled.samples.size() < 4)
    throw std::invalid_argument("validate: need at least 4 labeled samples");
  auto emb = embed_dataset(ckpt, labeled);
  std::vector<std::vector<float>> train_x, test_x;
  std::vector<int32_t> train_y, test_y;
  for (size_t i = 0; i < emb.size(); ++i) {
    if (labeled.labels[i] < 0) throw std::invalid_argument("validate: unlabeled sample");
    if (i % 2 == 0) {
      train_x.push_back(emb[i]);
      train_y.push_back(labeled.labels[i]);
    } else {
      test_x.push_back(emb[i]);
      test_y.push_back(labeled.labels[i]);
    }
  }
  Probe p = fit_probe_class(train_x, train_y, {ProbeSpec::Kind::Logistic});
  return macro_f1(test_y, predict_class(p, test_x));
}

}  // namespace presto
