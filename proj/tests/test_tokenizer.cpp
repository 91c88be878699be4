#include <doctest.h>

#include <cmath>

#include "presto/model.hpp"
#include "presto/synth.hpp"
#include "presto/tokenizer.hpp"

using namespace presto;

TEST_CASE("encoding layout splits d_e as quarter half quarter") {
  auto lay = EncodingLayout::for_dim(128);
  CHECK(lay.d_channel == 32);
  CHECK(lay.d_pos == 64);
  CHECK(lay.d_month == 32);
  CHECK(lay.d_e() == 128);
  CHECK_THROWS_AS(EncodingLayout::for_dim(130), std::invalid_argument);
}

TEST_CASE("month encoding identities") {
  auto m0 = month_encoding(0, 8);
  for (int i = 0; i < 8; i += 2) {
    CHECK(m0[size_t(i)] == doctest::Approx(0.0f));
    CHECK(m0[size_t(i) + 1] == doctest::Approx(1.0f));
  }
  for (int m = 0; m < 12; ++m) {
    auto a = month_encoding(m, 8);
    auto b = month_encoding(m + 12, 8);
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]));
  }
  auto m3 = month_encoding(3, 4);
  CHECK(m3[0] == doctest::Approx(1.0f));  // sin(pi/2)
  CHECK(m3[1] == doctest::Approx(0.0f).epsilon(1e-6));
}

TEST_CASE("positional encoding matches the closed form") {
  auto p = positional_encoding(5, 8);
  for (int i = 0; i < 4; ++i) {
    double freq = std::pow(10000.0, -2.0 * i / 8.0);
    CHECK(p[size_t(2 * i)] == doctest::Approx(std::sin(5 * freq)));
    CHECK(p[size_t(2 * i) + 1] == doctest::Approx(std::cos(5 * freq)));
  }
  CHECK_THROWS_AS(positional_encoding(-1, 8), std::invalid_argument);
}

TEST_CASE("token count follows the presence formula") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    PixelSample s;
    s.T = 1 + int(rng.uniform_int(12));
    s.init_storage();
    int64_t dynamic_present = 0;
    for (int t = 0; t < s.T; ++t)
      for (int g = 0; g < kNumDynamic; ++g)
        if (rng.uniform() < 0.3) s.presence_dyn[size_t(t) * kNumDynamic + g] = 0;
        else ++dynamic_present;
    s.presence_tg = rng.uniform() < 0.8;
    auto tokens = build_token_layout(s);
    CHECK(int64_t(tokens.size()) == dynamic_present + (s.presence_tg ? 1 : 0) + 1);
    CHECK(tokens.back().group == Group::Loc);
    CHECK_FALSE(tokens.back().maskable);
  }

  PixelSample full;
  full.init_storage();
  CHECK(build_token_layout(full).size() == 110);  // 12 * 9 + TG + Loc
}

TEST_CASE("static tokens carry zero positional and month slices") {
  PixelSample s;
  s.init_storage();
  auto lay = EncodingLayout::for_dim(32);
  for (const auto& tok : build_token_layout(s)) {
    auto enc = fixed_encoding(tok, lay);
    if (tok.timestep < 0)
      for (float v : enc) CHECK(v == 0.0f);
  }
}

TEST_CASE("reference tokenizer applies encodings except for location") {
  ModelConfig cfg;
  cfg.d_e = 32;
  cfg.depth = 1;
  ParamStore params = init_params(cfg, 1);
  SyntheticWorldConfig sw;
  sw.n_samples = 1;
  Dataset ds = generate_synthetic(sw);
  NormStats st = compute_norm_stats(ds);
  PixelSample n = normalize(ds.samples[0], st);
  auto lay = cfg.enc_layout();
  TokenSequence seq = tokenize(n, params, lay);
  REQUIRE(seq.info.size() == 110);

  // Loc embedding is the bare projection of the cartesian coordinates.
  const auto& loc = seq.info.back();
  const Tensor& w = params.at(proj_w_name(Group::Loc));
  const Tensor& b = params.at(proj_b_name(Group::Loc));
  for (int c = 0; c < seq.d_e; ++c) {
    float expect = b.data[size_t(c)];
    for (int k = 0; k < 3; ++k) expect += loc.values[size_t(k)] * w.at(k, c);
    CHECK(seq.embeddings.at(int64_t(seq.info.size()) - 1, c) == doctest::Approx(expect));
  }

  // A dynamic token carries the sinusoids in the fixed slices.
  const auto& tok0 = seq.info[0];
  auto pos = positional_encoding(tok0.timestep, lay.d_pos);
  const Tensor& w0 = params.at(proj_w_name(tok0.group));
  const Tensor& b0 = params.at(proj_b_name(tok0.group));
  int c = lay.d_channel;  // first positional slot
  float proj = b0.data[size_t(c)];
  for (int k = 0; k < group_spec(tok0.group).width; ++k)
    proj += tok0.values[size_t(k)] * w0.at(k, c);
  CHECK(seq.embeddings.at(0, c) == doctest::Approx(proj + pos[0]));
}

TEST_CASE("batched assembly equals the reference tokenizer") {
  ModelConfig cfg;
  cfg.d_e = 32;
  ParamStore params = init_params(cfg, 2);
  SyntheticWorldConfig sw;
  sw.n_samples = 3;
  sw.dropout = 0.3;
  sw.seed = 5;
  Dataset ds = generate_synthetic(sw);
  NormStats st = compute_norm_stats(ds);

  std::vector<std::vector<TokenInfo>> layouts;
  for (const auto& s : ds.samples)
    layouts.push_back(build_token_layout(normalize(s, st)));

  GraphContext<float> g(params, false);
  std::vector<BatchEntry> batch;
  for (auto& l : layouts) {
    BatchEntry e;
    e.tokens = &l;
    for (size_t i = 0; i < l.size(); ++i) e.encoder_indices.push_back(int32_t(i));
    batch.push_back(std::move(e));
  }
  std::vector<int32_t> offsets;
  auto x = detail::assemble_tokens(g, cfg, batch, cfg.enc_layout(), kChannelEncName,
                                   offsets);
  const Tensor& X = g.tape().value(x);

  int64_t row = 0;
  for (size_t b = 0; b < layouts.size(); ++b) {
    TokenSequence ref = tokenize(normalize(ds.samples[b], st), params, cfg.enc_layout());
    REQUIRE(offsets[b + 1] - offsets[b] == int32_t(ref.info.size()));
    for (size_t i = 0; i < ref.info.size(); ++i, ++row)
      for (int c = 0; c < cfg.d_e; ++c)
        CHECK(X.at(row, c) == doctest::Approx(ref.embeddings.at(int64_t(i), c)).epsilon(1e-5));
  }
}

TEST_CASE("tokenizer rejects NaN inputs") {
  ModelConfig cfg;
  cfg.d_e = 32;
  ParamStore params = init_params(cfg, 3);
  PixelSample s;
  s.init_storage();
  s.chan(0, 0) = std::nanf("");
  CHECK_THROWS_AS(tokenize(s, params, cfg.enc_layout()), std::invalid_argument);
}
