#include "presto/tokenizer.hpp"

namespace presto {

TokenSequence tokenize(const PixelSample& sample, const ParamStore& weights,
                       const EncodingLayout& layout) {
  const int d_e = layout.d_e();
  auto info = build_token_layout(sample);
  for (const auto& tok : info) {
    const auto& spec = group_spec(tok.group);
    for (int b = 0; b < spec.width && !spec.categorical; ++b)
      if (std::isnan(tok.values[size_t(b)]))
        throw std::invalid_argument("tokenize: NaN input value");
  }

  TokenSequence seq;
  seq.d_e = d_e;
  seq.embeddings = Tensor({int64_t(info.size()), d_e});
  const Tensor& chan_enc = weights.at(kChannelEncName);
  const Tensor& dw_embed = weights.at(kDwEmbedName);
  for (size_t i = 0; i < info.size(); ++i) {
    const TokenInfo& tok = info[i];
    const auto& spec = group_spec(tok.group);
    float* e = seq.embeddings.data.data() + int64_t(i) * d_e;
    if (spec.categorical) {
      for (int c = 0; c < d_e; ++c) e[c] = dw_embed.at(tok.dw_id, c);
    } else {
      const Tensor& w = weights.at(proj_w_name(tok.group));
      const Tensor& b = weights.at(proj_b_name(tok.group));
      for (int c = 0; c < d_e; ++c) {
        float acc = b.data[size_t(c)];
        for (int k = 0; k < spec.width; ++k)
          acc += tok.values[size_t(k)] * w.at(k, c);
        e[c] = acc;
      }
    }
    if (tok.group == Group::Loc) continue;  // e_Loc = h_Loc(s) with no encodings
    auto enc = fixed_encoding(tok, layout);
    for (int c = 0; c < d_e; ++c) e[c] += enc[size_t(c)];
    for (int c = 0; c < layout.d_channel; ++c)
      e[c] += chan_enc.at(int(tok.group), c);
  }
  seq.info = std::move(info);
  return seq;
}

}  // namespace presto
