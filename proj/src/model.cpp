#include "presto/model.hpp"

#include <algorithm>

namespace presto {

namespace {

Tensor trunc_normal_tensor(std::vector<int64_t> shape, Rng& rng, double sigma = 0.02) {
  Tensor t(std::move(shape));
  for (auto& v : t.data) v = float(rng.trunc_normal(sigma));
  return t;
}

void add_block(ParamStore& ps, const std::string& prefix, int d, int mlp_ratio, Rng& rng) {
  ps.add(prefix + ".ln1.g", Tensor({d}, 1.0f));
  ps.add(prefix + ".ln1.b", Tensor({d}, 0.0f));
  for (const char* n : {"wq", "wk", "wv", "wo"})
    ps.add(prefix + ".attn." + std::string(n), trunc_normal_tensor({d, d}, rng));
  for (const char* n : {"bq", "bk", "bv", "bo"})
    ps.add(prefix + ".attn." + std::string(n), Tensor({d}, 0.0f));
  ps.add(prefix + ".ln2.g", Tensor({d}, 1.0f));
  ps.add(prefix + ".ln2.b", Tensor({d}, 0.0f));
  ps.add(prefix + ".mlp.w1", trunc_normal_tensor({d, int64_t(mlp_ratio) * d}, rng));
  ps.add(prefix + ".mlp.b1", Tensor({int64_t(mlp_ratio) * d}, 0.0f));
  ps.add(prefix + ".mlp.w2", trunc_normal_tensor({int64_t(mlp_ratio) * d, d}, rng));
  ps.add(prefix + ".mlp.b2", Tensor({d}, 0.0f));
}

}  // namespace

ParamStore init_params(const ModelConfig& cfg, uint64_t seed) {
  cfg.validate();
  Rng rng(seed, 7);
  ParamStore ps;
  const int d = cfg.d_e;
  for (int gi = 0; gi < kNumGroups; ++gi) {
    const auto& spec = group_table()[size_t(gi)];
    if (spec.categorical) continue;
    ps.add(proj_w_name(Group(gi)), trunc_normal_tensor({spec.width, d}, rng));
    ps.add(proj_b_name(Group(gi)), Tensor({d}, 0.0f));
  }
  ps.add(kDwEmbedName, trunc_normal_tensor({cfg.dw_vocab + 1, d}, rng));
  ps.add(kChannelEncName,
         trunc_normal_tensor({kNumGroups - 1, cfg.enc_layout().d_channel}, rng));
  for (int i = 0; i < cfg.depth; ++i)
    add_block(ps, "enc.block" + std::to_string(i), d, cfg.mlp_ratio, rng);
  ps.add("enc.norm.g", Tensor({d}, 1.0f));
  ps.add("enc.norm.b", Tensor({d}, 0.0f));

  const int dd = cfg.d_dec;
  ps.add("enc2dec.w", trunc_normal_tensor({d, dd}, rng));
  ps.add("enc2dec.b", Tensor({dd}, 0.0f));
  ps.add("dec.mask_token", trunc_normal_tensor({1, dd}, rng));
  ps.add(kDecChannelEncName,
         trunc_normal_tensor({kNumGroups - 1, cfg.dec_layout().d_channel}, rng));
  for (int i = 0; i < cfg.dec_depth; ++i)
    add_block(ps, "dec.block" + std::to_string(i), dd, cfg.dec_mlp_ratio, rng);
  ps.add("dec.norm.g", Tensor({dd}, 1.0f));
  ps.add("dec.norm.b", Tensor({dd}, 0.0f));

  for (int gi = 0; gi < kNumGroups; ++gi) {
    const auto& spec = group_table()[size_t(gi)];
    if (int(Group(gi)) == int(Group::Loc)) continue;  // never reconstructed
    if (spec.categorical) {
      ps.add(head_w_name(Group(gi)), trunc_normal_tensor({dd, cfg.dw_vocab}, rng));
      ps.add(head_b_name(Group(gi)), Tensor({cfg.dw_vocab}, 0.0f));
    } else {
      ps.add(head_w_name(Group(gi)), trunc_normal_tensor({dd, spec.width}, rng));
      ps.add(head_b_name(Group(gi)), Tensor({spec.width}, 0.0f));
    }
  }
  return ps;
}

int64_t count_params(const ParamStore& params) { return params.total_elements(); }

int64_t count_params_encoder_side(const ParamStore& params) {
  int64_t n = 0;
  for (const auto& [name, t] : params)
    if (name.rfind("tok.", 0) == 0 || name.rfind("enc.", 0) == 0) n += t.numel();
  return n;
}

FlopCount count_flops(const ModelConfig& cfg, const std::vector<TokenInfo>& enc_tokens,
                      const std::vector<TokenInfo>& dec_tokens) {
  cfg.validate();
  FlopCount f;
  const int64_t d = cfg.d_e;
  const int64_t dd = cfg.d_dec;
  for (const auto& tok : enc_tokens) {
    const auto& spec = group_spec(tok.group);
    if (!spec.categorical) f.tokenizer += int64_t(spec.width) * d;
  }
  // Per token per block: Q,K,V,O projections + the two MLP matmuls.
  const int64_t enc_block = 4 * d * d + 2 * int64_t(cfg.mlp_ratio) * d * d;
  f.encoder = int64_t(enc_tokens.size()) * enc_block * cfg.depth;
  if (!dec_tokens.empty()) {
    f.enc_to_dec = int64_t(enc_tokens.size()) * d * dd;
    const int64_t dec_block = 4 * dd * dd + 2 * int64_t(cfg.dec_mlp_ratio) * dd * dd;
    f.decoder = int64_t(dec_tokens.size()) * dec_block * cfg.dec_depth;
    for (const auto& tok : dec_tokens) {
      const auto& spec = group_spec(tok.group);
      if (tok.group == Group::Loc) continue;
      f.heads += dd * (spec.categorical ? int64_t(cfg.dw_vocab) : int64_t(spec.width));
    }
  }
  return f;
}

std::vector<TokenInfo> full_input_tokens(int T) {
  PixelSample s;
  s.T = T;
  s.init_storage();
  return build_token_layout(s);
}

namespace {

std::vector<TokenInfo> pixel_tokens(const std::vector<Group>& groups) {
  std::vector<TokenInfo> toks;
  for (Group g : groups) {
    TokenInfo t;
    t.group = g;
    t.timestep = 0;
    t.month = 0;
    toks.push_back(t);
  }
  TokenInfo loc;
  loc.group = Group::Loc;
  loc.maskable = false;
  toks.push_back(loc);
  return toks;
}

}  // namespace

std::vector<TokenInfo> ms_pixel_tokens() {
  return pixel_tokens({Group::S2_RGB, Group::S2_RedEdge, Group::S2_NIR10,
                       Group::S2_NIR20, Group::S2_SWIR});
}

std::vector<TokenInfo> rgb_pixel_tokens() { return pixel_tokens({Group::S2_RGB}); }

std::vector<std::vector<float>> encode_pooled(
    const Checkpoint& ckpt, const std::vector<std::vector<TokenInfo>>& samples) {
  std::vector<std::vector<float>> out;
  out.reserve(samples.size());
  const size_t chunk = 512;
  for (size_t begin = 0; begin < samples.size(); begin += chunk) {
    const size_t end = std::min(samples.size(), begin + chunk);
    GraphContext<float> g(ckpt.params, /*trainable=*/false);
    std::vector<BatchEntry> batch;
    for (size_t i = begin; i < end; ++i) {
      BatchEntry e;
      e.tokens = &samples[i];
      e.encoder_indices.resize(samples[i].size());
      for (size_t k = 0; k < samples[i].size(); ++k) e.encoder_indices[k] = int32_t(k);
      batch.push_back(std::move(e));
    }
    auto enc = encode_batch(g, ckpt.config, batch);
    const Tensor& pooled = g.tape().value(enc.pooled);
    for (int64_t r = 0; r < pooled.rows(); ++r)
      out.emplace_back(pooled.data.begin() + r * pooled.cols(),
                       pooled.data.begin() + (r + 1) * pooled.cols());
  }
  return out;
}

}  // namespace presto
