#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "presto/optim.hpp"
#include "presto/rng.hpp"
#include "presto/tape.hpp"

using namespace presto;

namespace {

using DTape = TapeT<double>;
using DTensor = TensorT<double>;

DTensor random_tensor(std::vector<int64_t> shape, Rng& rng, double scale = 0.5) {
  DTensor t(std::move(shape));
  for (auto& v : t.data) v = scale * rng.normal();
  return t;
}

// Central finite differences against analytic gradients for a graph builder
// that takes parameter values and returns the scalar loss (and optionally the
// analytic gradients).
void check_gradients(const std::function<double(const std::vector<DTensor>&,
                                                std::vector<DTensor>*)>& eval,
                     std::vector<DTensor> params, double rtol = 1e-6,
                     double atol = 1e-9) {
  std::vector<DTensor> grads;
  eval(params, &grads);
  REQUIRE(grads.size() == params.size());
  const double eps = 1e-5;
  for (size_t p = 0; p < params.size(); ++p) {
    for (size_t j = 0; j < params[p].data.size(); ++j) {
      double orig = params[p].data[j];
      params[p].data[j] = orig + eps;
      double up = eval(params, nullptr);
      params[p].data[j] = orig - eps;
      double dn = eval(params, nullptr);
      params[p].data[j] = orig;
      double fd = (up - dn) / (2.0 * eps);
      double an = grads[p].data[j];
      CHECK(std::fabs(fd - an) <= atol + rtol * std::max(std::fabs(fd), std::fabs(an)));
    }
  }
}

}  // namespace

TEST_CASE("rng is deterministic and splittable") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng c(42);
  Rng child1 = c.split(1), child2 = c.split(2);
  CHECK(child1.next_u64() != child2.next_u64());
  // Splitting does not consume parent draws.
  Rng d(42);
  (void)d.split(1);
  Rng e(42);
  CHECK(d.next_u64() == e.next_u64());
}

TEST_CASE("rng distributions stay in range") {
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(rng.uniform_int(13) < 13);
    CHECK(std::fabs(rng.trunc_normal(0.02)) <= 0.04 + 1e-12);
  }
}

TEST_CASE("rng seeds differ") {
  Rng a(1), b(2);
  CHECK(a.next_u64() != b.next_u64());
}

TEST_CASE("cosine schedule endpoints and warmup") {
  const double lr = 1e-3;
  CHECK(cosine_lr(0, 100, 10, lr) == doctest::Approx(0.0));
  CHECK(cosine_lr(5, 100, 10, lr) == doctest::Approx(lr * 0.5));
  CHECK(cosine_lr(10, 100, 10, lr) == doctest::Approx(lr));
  CHECK(cosine_lr(55, 100, 10, lr) == doctest::Approx(lr * 0.5));
  CHECK(cosine_lr(100, 100, 10, lr) == doctest::Approx(0.0));
  CHECK(cosine_lr(200, 100, 10, lr) == doctest::Approx(0.0));  // clamps
  CHECK_THROWS_AS(cosine_lr(0, 10, 10, lr), std::invalid_argument);
}

TEST_CASE("adamw decoupled decay with zero gradient") {
  Tensor p({1}, 1.0f);
  Tensor g({1}, 0.0f);
  AdamWConfig cfg;
  cfg.weight_decay = 0.05;
  AdamW opt(cfg);
  std::vector<Tensor*> ps{&p};
  std::vector<const Tensor*> gs{&g};
  opt.step(ps, gs, 1e-3);
  CHECK(p.data[0] == doctest::Approx(0.99995).epsilon(1e-6));
}

TEST_CASE("adamw matches a scalar reference over many steps") {
  // Hand-rolled double-precision AdamW on the same trajectory.
  const double b1 = 0.9, b2 = 0.95, eps = 1e-8, wd = 0.05, lr = 0.01;
  Rng rng(3);
  const int n = 7;
  Tensor p({n});
  std::vector<double> ref(n);
  for (int i = 0; i < n; ++i) ref[i] = p.data[size_t(i)] = float(rng.normal());

  AdamW opt({b1, b2, eps, wd});
  std::vector<double> m(n, 0.0), v(n, 0.0);
  for (int step = 1; step <= 25; ++step) {
    Tensor g({n});
    for (int i = 0; i < n; ++i) g.data[size_t(i)] = float(rng.normal());
    std::vector<Tensor*> ps{&p};
    std::vector<const Tensor*> gs{&g};
    opt.step(ps, gs, lr);
    for (int i = 0; i < n; ++i) {
      // Mirror the float storage of the moments.
      double gi = double(g.data[size_t(i)]);
      m[size_t(i)] = double(float(b1 * m[size_t(i)] + (1 - b1) * gi));
      v[size_t(i)] = double(float(b2 * v[size_t(i)] + (1 - b2) * gi * gi));
      double mhat = m[size_t(i)] / (1 - std::pow(b1, step));
      double vhat = v[size_t(i)] / (1 - std::pow(b2, step));
      ref[size_t(i)] = double(float(1.0 - lr * wd) * float(ref[size_t(i)])) -
                       double(float(lr * mhat / (std::sqrt(vhat) + eps)));
    }
  }
  for (int i = 0; i < n; ++i)
    CHECK(double(p.data[size_t(i)]) == doctest::Approx(ref[size_t(i)]).epsilon(1e-5));
}

TEST_CASE("adamw rejects misaligned inputs") {
  Tensor p({2}), g({3});
  AdamW opt;
  std::vector<Tensor*> ps{&p};
  std::vector<const Tensor*> gs{&g};
  CHECK_THROWS_AS(opt.step(ps, gs, 1e-3), std::invalid_argument);
  CHECK_THROWS_AS(opt.step(ps, {}, 1e-3), std::invalid_argument);
}

TEST_CASE("softmax rows are a distribution") {
  Tape t;
  Tensor x({3, 4});
  Rng rng(1);
  for (auto& v : x.data) v = float(rng.normal());
  auto y = t.softmax_rows(t.constant(x));
  const Tensor& Y = t.value(y);
  for (int64_t r = 0; r < 3; ++r) {
    float s = 0;
    for (int64_t c = 0; c < 4; ++c) {
      CHECK(Y.at(r, c) > 0.0f);
      s += Y.at(r, c);
    }
    CHECK(s == doctest::Approx(1.0f));
  }
}

TEST_CASE("layer norm standardizes rows") {
  Tape t;
  Rng rng(2);
  Tensor x({4, 8});
  for (auto& v : x.data) v = float(2.0 + rng.normal());
  auto y = t.layer_norm(t.constant(x), t.constant(Tensor({8}, 1.0f)),
                        t.constant(Tensor({8}, 0.0f)));
  const Tensor& Y = t.value(y);
  for (int64_t r = 0; r < 4; ++r) {
    double mu = 0, var = 0;
    for (int64_t c = 0; c < 8; ++c) mu += Y.at(r, c);
    mu /= 8;
    for (int64_t c = 0; c < 8; ++c) var += (Y.at(r, c) - mu) * (Y.at(r, c) - mu);
    var /= 8;
    CHECK(mu == doctest::Approx(0.0).epsilon(1e-4));
    CHECK(var == doctest::Approx(1.0).epsilon(1e-2));
  }
}

TEST_CASE("gradients: mlp with gelu, layer norm and mse") {
  Rng rng(5);
  std::vector<DTensor> params;
  params.push_back(random_tensor({3, 4}, rng));   // x
  params.push_back(random_tensor({4, 6}, rng));   // w1
  params.push_back(random_tensor({6}, rng));      // b1
  params.push_back(random_tensor({6}, rng));      // gamma
  params.push_back(random_tensor({6}, rng));      // beta
  params.push_back(random_tensor({6, 2}, rng));   // w2
  DTensor target = random_tensor({3, 2}, rng);

  auto eval = [&](const std::vector<DTensor>& p, std::vector<DTensor>* grads) {
    DTape t;
    std::vector<DTape::Var> vs;
    for (const auto& v : p) vs.push_back(t.param(v));
    auto h = t.gelu(t.linear(vs[0], vs[1], vs[2]));
    h = t.layer_norm(h, vs[3], vs[4]);
    auto out = t.matmul(h, vs[5]);
    auto loss = t.mse(out, target);
    double val = t.value(loss).data[0];
    if (grads) {
      t.backward(loss);
      grads->clear();
      for (auto v : vs) grads->push_back(t.grad(v));
    }
    return val;
  };
  check_gradients(eval, params);
}

TEST_CASE("gradients: ragged attention and segment mean") {
  Rng rng(6);
  std::vector<DTensor> params;
  params.push_back(random_tensor({5, 4}, rng));  // token matrix, samples of 3 and 2
  params.push_back(random_tensor({4, 4}, rng));  // wq
  params.push_back(random_tensor({4, 4}, rng));  // wk
  params.push_back(random_tensor({4, 4}, rng));  // wv
  DTensor target = random_tensor({2, 4}, rng);
  std::vector<int32_t> offsets{0, 3, 5};

  auto eval = [&](const std::vector<DTensor>& p, std::vector<DTensor>* grads) {
    DTape t;
    std::vector<DTape::Var> vs;
    for (const auto& v : p) vs.push_back(t.param(v));
    auto a = t.attention(t.matmul(vs[0], vs[1]), t.matmul(vs[0], vs[2]),
                         t.matmul(vs[0], vs[3]), offsets, 2);
    auto pooled = t.segment_mean(a, offsets);
    auto loss = t.mse(pooled, target);
    double val = t.value(loss).data[0];
    if (grads) {
      t.backward(loss);
      grads->clear();
      for (auto v : vs) grads->push_back(t.grad(v));
    }
    return val;
  };
  check_gradients(eval, params, 1e-5);
}

TEST_CASE("gradients: assemble, gather and cross entropy") {
  Rng rng(7);
  std::vector<DTensor> params;
  params.push_back(random_tensor({3, 4}, rng));  // piece A
  params.push_back(random_tensor({2, 2}, rng));  // piece B (columns 1..2)
  params.push_back(random_tensor({4, 3}, rng));  // classifier
  std::vector<int32_t> targets{0, 2, 1};

  auto eval = [&](const std::vector<DTensor>& p, std::vector<DTensor>* grads) {
    DTape t;
    std::vector<DTape::Var> vs;
    for (const auto& v : p) vs.push_back(t.param(v));
    std::vector<DTape::AssemblePiece> pieces;
    pieces.push_back({vs[0], {0, 1, 2}, {0, 2, 3}, 0});
    pieces.push_back({vs[1], {0, 1}, {1, 2}, 1});
    auto x = t.assemble(4, 4, nullptr, std::move(pieces));
    auto picked = t.gather_rows(x, {0, 2, 3});
    auto logits = t.matmul(picked, vs[2]);
    auto loss = t.cross_entropy_mean(logits, targets);
    double val = t.value(loss).data[0];
    if (grads) {
      t.backward(loss);
      grads->clear();
      for (auto v : vs) grads->push_back(t.grad(v));
    }
    return val;
  };
  check_gradients(eval, params);
}

TEST_CASE("gradients: elementwise ops") {
  Rng rng(8);
  std::vector<DTensor> params;
  params.push_back(random_tensor({2, 3}, rng));
  params.push_back(random_tensor({2, 3}, rng));

  auto eval = [&](const std::vector<DTensor>& p, std::vector<DTensor>* grads) {
    DTape t;
    auto a = t.param(p[0]);
    auto b = t.param(p[1]);
    auto y = t.mul(t.add_scaled(a, b, 0.25), t.scale(b, 3.0));
    auto loss = t.mean_all(t.mul(y, y));
    double val = t.value(loss).data[0];
    if (grads) {
      t.backward(loss);
      *grads = {t.grad(a), t.grad(b)};
    }
    return val;
  };
  check_gradients(eval, params);
}

TEST_CASE("tape rejects shape mismatches") {
  Tape t;
  auto a = t.constant(Tensor({2, 3}));
  auto b = t.constant(Tensor({2, 3}));
  CHECK_THROWS_AS(t.matmul(a, b), std::invalid_argument);
  CHECK_THROWS_AS(t.add(a, t.constant(Tensor({3, 2}))), std::invalid_argument);
  CHECK_THROWS_AS(t.attention(a, a, a, {0, 2}, 2), std::invalid_argument);
  CHECK_THROWS_AS(t.segment_mean(a, {0, 1}), std::invalid_argument);
}

TEST_CASE("backward requires a differentiable scalar") {
  Tape t;
  auto c = t.constant(Tensor({1}, 1.0f));
  CHECK_THROWS_AS(t.backward(c), std::invalid_argument);
  auto p = t.param(Tensor({2, 2}, 1.0f));
  CHECK_THROWS_AS(t.backward(p), std::invalid_argument);
}
