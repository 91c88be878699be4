#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "presto/data.hpp"
#include "presto/params.hpp"

namespace presto {

// Widths of the three concatenated encoding slices: [channel | positional |
// month]. The channel slice is learned; the other two are fixed sinusoids.
struct EncodingLayout {
  int d_channel;
  int d_pos;
  int d_month;

  int d_e() const { return d_channel + d_pos + d_month; }

  static EncodingLayout for_dim(int d_e) {
    if (d_e % 4 != 0) throw std::invalid_argument("encoding layout: d_e must be divisible by 4");
    return {d_e / 4, d_e / 2, d_e / 4};
  }
};

// Alternating (sin, cos) of 2*pi*month/12, tiled to d_month.
inline std::vector<float> month_encoding(int month, int d_month) {
  if (d_month % 2 != 0) throw std::invalid_argument("month encoding: dim must be even");
  month = ((month % 12) + 12) % 12;  // reduce first so the period is exact
  double a = 2.0 * M_PI * double(month) / 12.0;
  std::vector<float> v(size_t(d_month), 0.0f);
  for (int i = 0; i + 1 < d_month; i += 2) {
    v[size_t(i)] = float(std::sin(a));
    v[size_t(i) + 1] = float(std::cos(a));
  }
  return v;
}

// Standard interleaved sinusoidal position encoding, frequency base 10000.
inline std::vector<float> positional_encoding(int index, int d_pos) {
  if (index < 0) throw std::invalid_argument("positional encoding: negative index");
  if (d_pos % 2 != 0) throw std::invalid_argument("positional encoding: dim must be even");
  std::vector<float> v(size_t(d_pos), 0.0f);
  for (int i = 0; i < d_pos / 2; ++i) {
    double freq = std::pow(10000.0, -2.0 * double(i) / double(d_pos));
    v[size_t(2 * i)] = float(std::sin(index * freq));
    v[size_t(2 * i) + 1] = float(std::cos(index * freq));
  }
  return v;
}

// Structural description of one token before projection. Continuous groups
// carry their channel values; DW carries a class id.
struct TokenInfo {
  Group group;
  int timestep = -1;  // -1 for static tokens
  int month = -1;     // -1 for static tokens
  bool maskable = true;
  std::array<float, 3> values{};  // first group_spec(group).width entries used
  int dw_id = -1;
};

// Per-sample token list in canonical order: per timestep the present dynamic
// groups, then TG, then Loc. Values come from the (normalized) sample.
inline std::vector<TokenInfo> build_token_layout(const PixelSample& s) {
  std::vector<TokenInfo> tokens;
  tokens.reserve(size_t(s.T) * kNumDynamic + 2);
  for (int t = 0; t < s.T; ++t) {
    for (int g = 0; g < kNumDynamic; ++g) {
      if (!s.present(t, g)) continue;
      TokenInfo tok;
      tok.group = Group(g);
      tok.timestep = t;
      tok.month = s.months[size_t(t)];
      const auto& spec = group_table()[size_t(g)];
      if (spec.categorical) {
        tok.dw_id = s.dw[size_t(t)];
      } else {
        for (int b = 0; b < spec.width; ++b)
          tok.values[size_t(b)] = s.chan(t, spec.chan_offset + b);
      }
      tokens.push_back(tok);
    }
  }
  if (s.presence_tg) {
    TokenInfo tg;
    tg.group = Group::TG;
    tg.values = {s.elevation_m, s.slope_deg, 0.0f};
    tokens.push_back(tg);
  }
  TokenInfo loc;
  loc.group = Group::Loc;
  loc.maskable = false;  // coordinates are never masked
  loc.values = location_to_cartesian(s.lat, s.lon);
  tokens.push_back(loc);
  return tokens;
}

// Fixed (non-learned) encoding slices for one token: zeros in the channel
// slice, positional/month sinusoids for dynamic tokens, zeros for statics.
inline std::vector<float> fixed_encoding(const TokenInfo& tok, const EncodingLayout& lay) {
  std::vector<float> enc(size_t(lay.d_e()), 0.0f);
  if (tok.timestep >= 0) {
    auto pos = positional_encoding(tok.timestep, lay.d_pos);
    auto mon = month_encoding(tok.month, lay.d_month);
    std::copy(pos.begin(), pos.end(), enc.begin() + lay.d_channel);
    std::copy(mon.begin(), mon.end(), enc.begin() + lay.d_channel + lay.d_pos);
  }
  return enc;
}

struct TokenSequence {
  std::vector<TokenInfo> info;
  Tensor embeddings;  // (token count) x d_e
  int d_e = 0;
};

// Parameter names used by the tokenizer inside a ParamStore.
inline std::string proj_w_name(Group g) { return std::string("tok.proj.") + group_spec(g).name + ".w"; }
inline std::string proj_b_name(Group g) { return std::string("tok.proj.") + group_spec(g).name + ".b"; }
constexpr const char* kDwEmbedName = "tok.dw_embed";
constexpr const char* kChannelEncName = "tok.channel_enc";  // 10 x d_channel, groups except Loc

// Reference single-sample tokenizer: e = h_g(x) + [channel; pos; month] for
// dynamic and TG tokens, DW via embedding lookup, Loc projection only. The
// batched training path is tested for equality against this.
TokenSequence tokenize(const PixelSample& sample, const ParamStore& weights,
                       const EncodingLayout& layout);

}  // namespace presto
