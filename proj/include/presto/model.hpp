#pragma once

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "presto/masking.hpp"
#include "presto/params.hpp"
#include "presto/rng.hpp"
#include "presto/tape.hpp"
#include "presto/tokenizer.hpp"

namespace presto {

// Encoder size varies with the scaling grid; the decoder keeps the base
// configuration (2 layers, width 128) behind an encoder-to-decoder projection.
struct ModelConfig {
  int depth = 2;
  int d_e = 128;
  int n_heads = 8;
  int mlp_ratio = 4;
  int dec_depth = 2;
  int d_dec = 128;
  int dec_heads = 8;
  int dec_mlp_ratio = 4;
  int dw_vocab = kDwClasses;
  int dw_mask_id = kDwClasses;  // model-internal id, never in data files

  EncodingLayout enc_layout() const { return EncodingLayout::for_dim(d_e); }
  EncodingLayout dec_layout() const { return EncodingLayout::for_dim(d_dec); }

  void validate() const {
    if (d_e % n_heads != 0 || d_dec % dec_heads != 0)
      throw std::invalid_argument("config: heads must divide width");
    if (depth <= 0 || dec_depth <= 0) throw std::invalid_argument("config: bad depth");
  }
};

struct Checkpoint {
  ModelConfig config;
  ParamStore params;
  NormStats norm_stats;
};

// Fresh parameters: truncated normal (sigma 0.02) for projections, embeddings,
// encodings and the mask token; zero biases; unit norm scales.
ParamStore init_params(const ModelConfig& cfg, uint64_t seed);

// Parameter totals; encoder_side covers the tokenizer and encoder stack (the
// deployed feature extractor).
int64_t count_params(const ParamStore& params);
int64_t count_params_encoder_side(const ParamStore& params);

// FLOP accounting counts multiply-accumulates of the dense projections
// (tokenizer, attention QKV/output, MLPs, encoder-to-decoder projection and
// reconstruction heads), the convention used by common profilers. Attention
// score/value products are excluded.
struct FlopCount {
  int64_t tokenizer = 0;
  int64_t encoder = 0;
  int64_t enc_to_dec = 0;
  int64_t decoder = 0;
  int64_t heads = 0;
  int64_t total() const { return tokenizer + encoder + enc_to_dec + decoder + heads; }
};

FlopCount count_flops(const ModelConfig& cfg, const std::vector<TokenInfo>& enc_tokens,
                      const std::vector<TokenInfo>& dec_tokens);

// Token presets for the accounting table: a full 12-month sample, a
// single-timestep multispectral pixel (optical groups + location), and a
// single-timestep RGB pixel.
std::vector<TokenInfo> full_input_tokens(int T = kDefaultT);
std::vector<TokenInfo> ms_pixel_tokens();
std::vector<TokenInfo> rgb_pixel_tokens();

// ---- differentiable graph building -----------------------------------------

// One tape plus the parameter nodes registered on it. Gradients are read back
// by parameter name after backward().
template <typename S>
class GraphContext {
 public:
  using Var = typename TapeT<S>::Var;

  explicit GraphContext(const ParamStore& params, bool trainable = true) {
    for (const auto& [name, t] : params) {
      TensorT<S> v = t.template cast<S>();
      vars_[name] = trainable ? tape_.param(std::move(v)) : tape_.constant(std::move(v));
    }
  }

  TapeT<S>& tape() { return tape_; }
  Var p(const std::string& name) const {
    auto it = vars_.find(name);
    if (it == vars_.end()) throw std::out_of_range("graph: no param " + name);
    return it->second;
  }
  const TensorT<S>& grad(const std::string& name) const { return tape_.grad(p(name)); }

 private:
  TapeT<S> tape_;
  std::unordered_map<std::string, typename TapeT<S>::Var> vars_;
};

// One sample's contribution to a batch: its token layout and the subset of
// token indices that enter the encoder (all of them outside pretraining).
struct BatchEntry {
  const std::vector<TokenInfo>* tokens;
  std::vector<int32_t> encoder_indices;
};

template <typename S>
struct EncodedBatch {
  typename TapeT<S>::Var enc_out;  // (R x d_e), final layer norm applied
  typename TapeT<S>::Var pooled;   // (B x d_e), arithmetic mean per sample
  std::vector<int32_t> offsets;    // B + 1 row offsets into enc_out
};

template <typename S>
struct DecodedBatch {
  typename TapeT<S>::Var dec_out;   // (R_all x d_dec)
  std::vector<int32_t> offsets;     // B + 1 offsets over full token lists
};

inline std::string head_w_name(Group g) { return std::string("head.") + group_spec(g).name + ".w"; }
inline std::string head_b_name(Group g) { return std::string("head.") + group_spec(g).name + ".b"; }
constexpr const char* kDecChannelEncName = "dec.channel_enc";

namespace detail {

template <typename S>
typename TapeT<S>::Var transformer_block(GraphContext<S>& g, const std::string& prefix,
                                         typename TapeT<S>::Var x,
                                         const std::vector<int32_t>& offsets, int heads) {
  auto& t = g.tape();
  auto h = t.layer_norm(x, g.p(prefix + ".ln1.g"), g.p(prefix + ".ln1.b"));
  auto q = t.linear(h, g.p(prefix + ".attn.wq"), g.p(prefix + ".attn.bq"));
  auto k = t.linear(h, g.p(prefix + ".attn.wk"), g.p(prefix + ".attn.bk"));
  auto v = t.linear(h, g.p(prefix + ".attn.wv"), g.p(prefix + ".attn.bv"));
  auto a = t.attention(q, k, v, offsets, heads);
  x = t.add(x, t.linear(a, g.p(prefix + ".attn.wo"), g.p(prefix + ".attn.bo")));
  auto m = t.layer_norm(x, g.p(prefix + ".ln2.g"), g.p(prefix + ".ln2.b"));
  m = t.gelu(t.linear(m, g.p(prefix + ".mlp.w1"), g.p(prefix + ".mlp.b1")));
  return t.add(x, t.linear(m, g.p(prefix + ".mlp.w2"), g.p(prefix + ".mlp.b2")));
}

// Assemble the (R x d) token matrix for a list of (tokens, subset) pairs:
// per-group linear projections and the DW lookup scattered into place, learned
// channel encodings added to the channel slice, fixed sinusoids as base.
template <typename S>
typename TapeT<S>::Var assemble_tokens(GraphContext<S>& g, const ModelConfig& cfg,
                                       const std::vector<BatchEntry>& batch,
                                       const EncodingLayout& lay,
                                       const char* chan_enc_name,
                                       std::vector<int32_t>& offsets_out) {
  auto& t = g.tape();
  const int d = lay.d_e();
  offsets_out.assign(1, 0);
  int64_t R = 0;
  for (const auto& e : batch) {
    R += int64_t(e.encoder_indices.size());
    offsets_out.push_back(int32_t(R));
  }

  TensorT<S> base({R, d}, S(0));
  std::array<std::vector<float>, kNumGroups> group_vals;  // packed values
  std::array<std::vector<int32_t>, kNumGroups> group_dst;
  std::vector<int32_t> dw_ids, dw_dst;
  std::vector<int32_t> enc_gids, enc_dst;

  int64_t row = 0;
  for (const auto& e : batch) {
    for (int32_t ti : e.encoder_indices) {
      const TokenInfo& tok = (*e.tokens)[size_t(ti)];
      const auto& spec = group_spec(tok.group);
      if (spec.categorical) {
        dw_ids.push_back(tok.dw_id);
        dw_dst.push_back(int32_t(row));
      } else {
        auto& vals = group_vals[size_t(int(tok.group))];
        for (int b = 0; b < spec.width; ++b) {
          float x = tok.values[size_t(b)];
          if (std::isnan(x)) throw std::invalid_argument("assemble: NaN input value");
          vals.push_back(x);
        }
        group_dst[size_t(int(tok.group))].push_back(int32_t(row));
      }
      if (tok.group != Group::Loc) {
        enc_gids.push_back(int(tok.group));
        enc_dst.push_back(int32_t(row));
        if (tok.timestep >= 0) {
          auto pos = positional_encoding(tok.timestep, lay.d_pos);
          auto mon = month_encoding(tok.month, lay.d_month);
          S* b0 = base.data.data() + row * d + lay.d_channel;
          for (int c = 0; c < lay.d_pos; ++c) b0[c] = S(pos[size_t(c)]);
          for (int c = 0; c < lay.d_month; ++c) b0[lay.d_pos + c] = S(mon[size_t(c)]);
        }
      }
      ++row;
    }
  }

  std::vector<typename TapeT<S>::AssemblePiece> pieces;
  for (int gi = 0; gi < kNumGroups; ++gi) {
    if (group_dst[size_t(gi)].empty()) continue;
    const auto& spec = group_table()[size_t(gi)];
    const int64_t n = int64_t(group_dst[size_t(gi)].size());
    TensorT<S> X({n, spec.width});
    for (size_t i = 0; i < group_vals[size_t(gi)].size(); ++i)
      X.data[i] = S(group_vals[size_t(gi)][i]);
    auto proj = t.linear(t.constant(std::move(X)), g.p(proj_w_name(Group(gi))),
                         g.p(proj_b_name(Group(gi))));
    std::vector<int32_t> src(size_t(n), 0);
    for (int64_t i = 0; i < n; ++i) src[size_t(i)] = int32_t(i);
    pieces.push_back({proj, std::move(src), group_dst[size_t(gi)], 0});
  }
  if (!dw_ids.empty()) {
    auto emb = t.gather_rows(g.p(kDwEmbedName), dw_ids);
    std::vector<int32_t> src(dw_ids.size());
    for (size_t i = 0; i < src.size(); ++i) src[i] = int32_t(i);
    pieces.push_back({emb, std::move(src), std::move(dw_dst), 0});
  }
  if (!enc_gids.empty()) {
    auto ce = t.gather_rows(g.p(chan_enc_name), enc_gids);
    std::vector<int32_t> src(enc_gids.size());
    for (size_t i = 0; i < src.size(); ++i) src[i] = int32_t(i);
    pieces.push_back({ce, std::move(src), std::move(enc_dst), 0});
  }
  (void)cfg;
  return t.assemble(R, d, &base, std::move(pieces));
}

}  // namespace detail

// Encoder forward over a ragged batch of token subsets.
template <typename S>
EncodedBatch<S> encode_batch(GraphContext<S>& g, const ModelConfig& cfg,
                             const std::vector<BatchEntry>& batch) {
  for (const auto& e : batch)
    if (e.encoder_indices.empty())
      throw std::invalid_argument("encode: empty token sequence");
  auto& t = g.tape();
  EncodedBatch<S> out;
  auto x = detail::assemble_tokens(g, cfg, batch, cfg.enc_layout(), kChannelEncName,
                                   out.offsets);
  for (int i = 0; i < cfg.depth; ++i)
    x = detail::transformer_block(g, "enc.block" + std::to_string(i), x, out.offsets,
                                  cfg.n_heads);
  out.enc_out = t.layer_norm(x, g.p("enc.norm.g"), g.p("enc.norm.b"));
  out.pooled = t.segment_mean(out.enc_out, out.offsets);
  return out;
}

// Decoder forward: visible positions carry projected encoder outputs, masked
// positions the shared mask token; both get the decoder's channel encodings
// and fixed sinusoids re-added before the decoder blocks.
template <typename S>
DecodedBatch<S> decode_batch(GraphContext<S>& g, const ModelConfig& cfg,
                             const std::vector<BatchEntry>& batch,
                             const EncodedBatch<S>& enc) {
  auto& t = g.tape();
  const EncodingLayout lay = cfg.dec_layout();
  const int d = cfg.d_dec;

  DecodedBatch<S> out;
  out.offsets.assign(1, 0);
  int64_t R = 0;
  for (const auto& e : batch) {
    R += int64_t(e.tokens->size());
    out.offsets.push_back(int32_t(R));
  }

  TensorT<S> base({R, d}, S(0));
  std::vector<int32_t> vis_src, vis_dst, mask_src, mask_dst, enc_gids, enc_dst;
  int64_t vis_row = 0;
  for (size_t b = 0; b < batch.size(); ++b) {
    const auto& e = batch[b];
    const int64_t row0 = out.offsets[b];
    std::vector<char> visible(e.tokens->size(), 0);
    for (int32_t ti : e.encoder_indices) visible[size_t(ti)] = 1;
    // Visible rows appear in encoder order within the sample.
    for (int32_t ti : e.encoder_indices) {
      vis_src.push_back(int32_t(vis_row++));
      vis_dst.push_back(int32_t(row0 + ti));
    }
    for (size_t ti = 0; ti < e.tokens->size(); ++ti) {
      const TokenInfo& tok = (*e.tokens)[ti];
      const int64_t row = row0 + int64_t(ti);
      if (!visible[ti]) {
        mask_src.push_back(0);
        mask_dst.push_back(int32_t(row));
      }
      if (tok.group != Group::Loc) {
        enc_gids.push_back(int(tok.group));
        enc_dst.push_back(int32_t(row));
        if (tok.timestep >= 0) {
          auto pos = positional_encoding(tok.timestep, lay.d_pos);
          auto mon = month_encoding(tok.month, lay.d_month);
          S* b0 = base.data.data() + row * d + lay.d_channel;
          for (int c = 0; c < lay.d_pos; ++c) b0[c] = S(pos[size_t(c)]);
          for (int c = 0; c < lay.d_month; ++c) b0[lay.d_pos + c] = S(mon[size_t(c)]);
        }
      }
    }
  }

  auto proj = t.linear(enc.enc_out, g.p("enc2dec.w"), g.p("enc2dec.b"));
  std::vector<typename TapeT<S>::AssemblePiece> pieces;
  pieces.push_back({proj, std::move(vis_src), std::move(vis_dst), 0});
  if (!mask_dst.empty())
    pieces.push_back({g.p("dec.mask_token"), std::move(mask_src), std::move(mask_dst), 0});
  if (!enc_gids.empty()) {
    auto ce = t.gather_rows(g.p(kDecChannelEncName), enc_gids);
    std::vector<int32_t> src(enc_gids.size());
    for (size_t i = 0; i < src.size(); ++i) src[i] = int32_t(i);
    pieces.push_back({ce, std::move(src), std::move(enc_dst), 0});
  }
  auto x = t.assemble(R, d, &base, std::move(pieces));
  for (int i = 0; i < cfg.dec_depth; ++i)
    x = detail::transformer_block(g, "dec.block" + std::to_string(i), x, out.offsets,
                                  cfg.dec_heads);
  out.dec_out = t.layer_norm(x, g.p("dec.norm.g"), g.p("dec.norm.b"));
  return out;
}

// Non-differentiable pooled embeddings for a batch of full samples.
std::vector<std::vector<float>> encode_pooled(const Checkpoint& ckpt,
                                              const std::vector<std::vector<TokenInfo>>& samples);

}  // namespace presto
