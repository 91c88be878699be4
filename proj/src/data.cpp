#include "presto/data.hpp"

namespace presto {

namespace {

// Channel index in the 17-wide continuous stats layout for a dynamic column.
constexpr int kElevIdx = kDynContChannels;
constexpr int kSlopeIdx = kDynContChannels + 1;

// The dynamic continuous group owning channel column c.
int owning_dynamic_group(int c) {
  for (int g = 0; g < kNumDynamicCont; ++g) {
    const auto& spec = group_table()[size_t(g)];
    if (c >= spec.chan_offset && c < spec.chan_offset + spec.width) return g;
  }
  throw std::logic_error("bad channel column");
}

}  // namespace

NormStats compute_norm_stats(const Dataset& ds) {
  std::array<double, kContChannels> sum{}, sumsq{};
  std::array<int64_t, kContChannels> n{};
  for (const auto& s : ds.samples) {
    for (int t = 0; t < s.T; ++t) {
      for (int c = 0; c < kDynContChannels; ++c) {
        if (!s.present(t, owning_dynamic_group(c))) continue;
        double v = s.chan(t, c);
        sum[size_t(c)] += v;
        sumsq[size_t(c)] += v * v;
        ++n[size_t(c)];
      }
    }
    if (s.presence_tg) {
      sum[kElevIdx] += s.elevation_m;
      sumsq[kElevIdx] += double(s.elevation_m) * s.elevation_m;
      ++n[kElevIdx];
      sum[kSlopeIdx] += s.slope_deg;
      sumsq[kSlopeIdx] += double(s.slope_deg) * s.slope_deg;
      ++n[kSlopeIdx];
    }
  }
  NormStats st;
  for (int c = 0; c < kContChannels; ++c) {
    double mean = n[size_t(c)] > 0 ? sum[size_t(c)] / double(n[size_t(c)]) : 0.0;
    double var = n[size_t(c)] > 0 ? sumsq[size_t(c)] / double(n[size_t(c)]) - mean * mean : 0.0;
    st.mean[size_t(c)] = float(mean);
    st.std[size_t(c)] = float(std::max(std::sqrt(std::max(var, 0.0)), 1e-6));
  }
  return st;
}

PixelSample normalize(const PixelSample& s, const NormStats& stats) {
  if (!stats.valid()) throw std::invalid_argument("normalize: invalid stats");
  PixelSample out = s;
  for (int t = 0; t < s.T; ++t)
    for (int c = 0; c < kDynContChannels; ++c)
      out.chan(t, c) = (s.chan(t, c) - stats.mean[size_t(c)]) / stats.std[size_t(c)];
  out.elevation_m = (s.elevation_m - stats.mean[kElevIdx]) / stats.std[kElevIdx];
  out.slope_deg = (s.slope_deg - stats.mean[kSlopeIdx]) / stats.std[kSlopeIdx];
  return out;
}

PixelSample denormalize(const PixelSample& s, const NormStats& stats) {
  if (!stats.valid()) throw std::invalid_argument("denormalize: invalid stats");
  PixelSample out = s;
  for (int t = 0; t < s.T; ++t)
    for (int c = 0; c < kDynContChannels; ++c)
      out.chan(t, c) = s.chan(t, c) * stats.std[size_t(c)] + stats.mean[size_t(c)];
  out.elevation_m = s.elevation_m * stats.std[kElevIdx] + stats.mean[kElevIdx];
  out.slope_deg = s.slope_deg * stats.std[kSlopeIdx] + stats.mean[kSlopeIdx];
  return out;
}

Dataset normalize(const Dataset& ds, const NormStats& stats) {
  Dataset out;
  out.labels = ds.labels;
  out.samples.reserve(ds.samples.size());
  for (const auto& s : ds.samples) out.samples.push_back(normalize(s, stats));
  return out;
}

}  // namespace presto
