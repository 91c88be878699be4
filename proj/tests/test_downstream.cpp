#include <doctest.h>

#include <cmath>

#include "presto/downstream.hpp"
#include "presto/pretrain.hpp"
#include "presto/synth.hpp"

using namespace presto;

namespace {

Checkpoint tiny_checkpoint(const Dataset& ds, uint64_t seed = 0) {
  ModelConfig cfg;
  cfg.d_e = 32;
  cfg.depth = 1;
  cfg.d_dec = 32;
  cfg.dec_depth = 1;
  cfg.n_heads = 4;
  cfg.dec_heads = 4;
  Checkpoint ckpt;
  ckpt.config = cfg;
  ckpt.params = init_params(cfg, seed);
  ckpt.norm_stats = compute_norm_stats(ds);
  return ckpt;
}

// Two separable 2-D blobs.
void make_blobs(std::vector<std::vector<float>>& x, std::vector<int32_t>& y, int n,
                uint64_t seed) {
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    int c = i % 2;
    float cx = c == 0 ? -2.0f : 2.0f;
    x.push_back({cx + float(0.5 * rng.normal()), float(0.5 * rng.normal())});
    y.push_back(c);
  }
}

}  // namespace

TEST_CASE("metrics against hand-computed values") {
  std::vector<int32_t> truth{0, 0, 1, 1, 2, 2};
  std::vector<int32_t> pred{0, 1, 1, 1, 2, 0};
  CHECK(accuracy(truth, pred) == doctest::Approx(4.0 / 6.0));
  // Per class F1: c0 tp1 fp1 fn1 -> 0.5; c1 tp2 fp1 fn0 -> 0.8; c2 tp1 fp0 fn1 -> 2/3.
  CHECK(macro_f1(truth, pred) == doctest::Approx((0.5 + 0.8 + 2.0 / 3.0) / 3.0));
  std::vector<float> a{1.0f, 2.0f}, b{2.0f, 4.0f};
  CHECK(rmse(a, b) == doctest::Approx(std::sqrt(2.5)));
  CHECK_THROWS_AS(accuracy(truth, {0}), std::invalid_argument);
}

TEST_CASE("logistic probe separates blobs") {
  std::vector<std::vector<float>> x;
  std::vector<int32_t> y;
  make_blobs(x, y, 100, 1);
  Probe p = fit_probe_class(x, y, {ProbeSpec::Kind::Logistic});
  auto pred = predict_class(p, x);
  CHECK(accuracy(y, pred) > 0.97);
}

TEST_CASE("linear probe recovers an exact linear map") {
  Rng rng(2);
  std::vector<std::vector<float>> x;
  std::vector<float> y;
  for (int i = 0; i < 50; ++i) {
    float a = float(rng.normal()), b = float(rng.normal());
    x.push_back({a, b});
    y.push_back(3.0f * a - 2.0f * b + 1.0f);
  }
  Probe p = fit_probe_real(x, y);
  auto pred = predict_value(p, x);
  CHECK(rmse(y, pred) < 1e-3);
}

TEST_CASE("knn probe matches a brute-force oracle") {
  std::vector<std::vector<float>> x;
  std::vector<int32_t> y;
  make_blobs(x, y, 60, 3);
  ProbeSpec spec;
  spec.kind = ProbeSpec::Kind::Knn;
  spec.k = 5;
  Probe p = fit_probe_class(x, y, spec);

  std::vector<std::vector<float>> queries;
  std::vector<int32_t> expect;
  Rng rng(4);
  for (int q = 0; q < 20; ++q) {
    std::vector<float> pt{float(3.0 * rng.normal()), float(3.0 * rng.normal())};
    // Oracle: sort all training points by distance, majority of top 5,
    // ties resolved toward the smallest class id.
    std::vector<std::pair<double, int32_t>> d;
    for (size_t i = 0; i < x.size(); ++i) {
      double dx = pt[0] - x[i][0], dy = pt[1] - x[i][1];
      d.emplace_back(dx * dx + dy * dy, y[i]);
    }
    std::sort(d.begin(), d.end());
    int votes[2] = {0, 0};
    for (int i = 0; i < 5; ++i) ++votes[d[size_t(i)].second];
    expect.push_back(votes[1] > votes[0] ? 1 : 0);
    queries.push_back(pt);
  }
  CHECK(predict_class(p, queries) == expect);
}

TEST_CASE("knn ties resolve to the smallest class id") {
  // Two classes at equal distance; k = 2 gives a 1-1 tie.
  std::vector<std::vector<float>> x{{-1.0f}, {1.0f}};
  std::vector<int32_t> y{1, 0};
  ProbeSpec spec;
  spec.kind = ProbeSpec::Kind::Knn;
  spec.k = 2;
  Probe p = fit_probe_class(x, y, spec);
  CHECK(predict_class(p, {{0.0f}})[0] == 0);
}

TEST_CASE("probe input validation") {
  std::vector<std::vector<float>> x{{1.0f}, {2.0f}};
  CHECK_THROWS_AS(fit_probe_class(x, {0, 0}, {}), std::invalid_argument);
  CHECK_THROWS_AS(fit_probe_class({}, {}, {}), std::invalid_argument);
  CHECK_THROWS_AS(fit_probe_class(x, {0}, {}), std::invalid_argument);
  CHECK_THROWS_AS(fit_probe_class(x, {0, 1}, {ProbeSpec::Kind::Linear}),
                  std::invalid_argument);
}

TEST_CASE("embeddings have the right shape and respect month subsets") {
  SyntheticWorldConfig sw;
  sw.n_samples = 6;
  Dataset ds = generate_synthetic(sw);
  Checkpoint ckpt = tiny_checkpoint(ds);
  auto full = embed_dataset(ckpt, ds);
  REQUIRE(full.size() == 6);
  CHECK(full[0].size() == 32);
  auto half = embed_dataset_months(ckpt, ds, 6);
  CHECK(half.size() == 6);
  // Fewer months means different pooled features.
  bool differs = false;
  for (int c = 0; c < 32; ++c)
    if (std::fabs(half[0][size_t(c)] - full[0][size_t(c)]) > 1e-6f) differs = true;
  CHECK(differs);
  // Restricting to all 12 months is a no-op.
  auto all12 = embed_dataset_months(ckpt, ds, 12);
  for (int c = 0; c < 32; ++c)
    CHECK(all12[0][size_t(c)] == doctest::Approx(full[0][size_t(c)]));
  CHECK_THROWS_AS(embed_dataset_months(ckpt, ds, 0), std::invalid_argument);
}

TEST_CASE("aggregate image contract") {
  SyntheticWorldConfig sw;
  sw.n_samples = 5;
  Dataset ds = generate_synthetic(sw);
  Checkpoint ckpt = tiny_checkpoint(ds);

  auto agg = aggregate_image(ckpt, ds.samples);
  CHECK(agg.size() == 64);  // 2 * d_e

  // Pixel order invariance.
  std::vector<PixelSample> reversed(ds.samples.rbegin(), ds.samples.rend());
  auto agg2 = aggregate_image(ckpt, reversed);
  for (size_t i = 0; i < agg.size(); ++i)
    CHECK(agg[i] == doctest::Approx(agg2[i]).epsilon(1e-4));

  // Single pixel: mean is the embedding, std is zero.
  auto one = aggregate_image(ckpt, {ds.samples[0]});
  auto emb = embed_dataset(ckpt, Dataset{{ds.samples[0]}, {0}});
  for (int c = 0; c < 32; ++c) {
    CHECK(one[size_t(c)] == doctest::Approx(emb[0][size_t(c)]));
    CHECK(one[size_t(32 + c)] == 0.0f);
  }
  CHECK_THROWS_AS(aggregate_image(ckpt, {}), std::invalid_argument);
}

TEST_CASE("finetune adds a head and reports validation accuracy") {
  SyntheticWorldConfig sw;
  sw.n_samples = 40;
  sw.n_classes = 2;
  sw.seed = 6;
  Dataset ds = generate_synthetic(sw);
  Checkpoint ckpt = tiny_checkpoint(ds);
  FinetuneConfig fc;
  fc.epochs = 2;
  fc.batch_size = 16;
  fc.seed = 1;
  FinetuneResult res = finetune(ckpt, ds, fc);
  CHECK(res.ckpt.params.has("ft.head.w"));
  CHECK(res.ckpt.params.has("ft.head.b"));
  CHECK(res.val_accuracy >= 0.0);
  CHECK(res.val_accuracy <= 1.0);
  auto pred = predict_finetuned(res.ckpt, ds);
  CHECK(pred.size() == ds.size());

  FinetuneResult res2 = finetune(ckpt, ds, fc);
  CHECK(res.val_accuracy == res2.val_accuracy);  // deterministic
}
