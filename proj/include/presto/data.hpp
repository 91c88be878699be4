#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace presto {

// Channel groups in canonical order. The first kNumDynamic are dynamic-in-time
// (8 continuous + the categorical DW); TG and Loc are static.
enum class Group : int {
  S1 = 0,
  S2_RGB,
  S2_RedEdge,
  S2_NIR10,
  S2_NIR20,
  S2_SWIR,
  NDVI,
  ERA5,
  DW,
  TG,
  Loc,
};

constexpr int kNumGroups = 11;
constexpr int kNumDynamic = 9;       // S1 .. DW
constexpr int kNumDynamicCont = 8;   // S1 .. ERA5
constexpr int kDynContChannels = 15; // sum of dynamic continuous widths
constexpr int kContChannels = 17;    // + TG's elevation and slope
constexpr int kDwClasses = 9;
constexpr int kDefaultT = 12;

struct ChannelGroupSpec {
  const char* name;
  int width;
  bool categorical;
  bool dynamic;
  int chan_offset;  // column offset into the T x 15 continuous block (-1 n/a)
};

inline const std::array<ChannelGroupSpec, kNumGroups>& group_table() {
  static const std::array<ChannelGroupSpec, kNumGroups> t = {{
      {"S1", 2, false, true, 0},
      {"S2_RGB", 3, false, true, 2},
      {"S2_RedEdge", 3, false, true, 5},
      {"S2_NIR10", 1, false, true, 8},
      {"S2_NIR20", 1, false, true, 9},
      {"S2_SWIR", 2, false, true, 10},
      {"NDVI", 1, false, true, 12},
      {"ERA5", 2, false, true, 13},
      {"DW", 1, true, true, -1},
      {"TG", 2, false, false, -1},
      {"Loc", 3, false, false, -1},
  }};
  return t;
}

inline const ChannelGroupSpec& group_spec(Group g) {
  return group_table()[size_t(int(g))];
}

// One pixel's multi-sensor timeseries plus static context. Continuous data is
// a row-major T x 15 block laid out by group_table() offsets.
struct PixelSample {
  int T = kDefaultT;
  std::vector<float> continuous;    // T x 15
  std::vector<uint8_t> dw;          // T class ids in [0, 9)
  float elevation_m = 0.0f;
  float slope_deg = 0.0f;
  float lat = 0.0f;
  float lon = 0.0f;
  int start_month = 0;
  std::vector<uint8_t> months;      // T entries in [0, 12)
  std::vector<uint8_t> presence_dyn;  // T x kNumDynamic, (t, g) at t*9+g
  bool presence_tg = true;
  // Loc is always present.

  float chan(int t, int c) const { return continuous[size_t(t) * kDynContChannels + c]; }
  float& chan(int t, int c) { return continuous[size_t(t) * kDynContChannels + c]; }
  bool present(int t, int g) const { return presence_dyn[size_t(t) * kNumDynamic + g] != 0; }

  void init_storage() {
    continuous.assign(size_t(T) * kDynContChannels, 0.0f);
    dw.assign(size_t(T), 0);
    months.resize(size_t(T));
    for (int t = 0; t < T; ++t) months[size_t(t)] = uint8_t((start_month + t) % 12);
    presence_dyn.assign(size_t(T) * kNumDynamic, 1);
  }

  void validate() const {
    if (T <= 0) throw std::invalid_argument("sample: T must be positive");
    if (int64_t(continuous.size()) != int64_t(T) * kDynContChannels ||
        dw.size() != size_t(T) || months.size() != size_t(T) ||
        presence_dyn.size() != size_t(T) * kNumDynamic)
      throw std::invalid_argument("sample: inconsistent storage sizes");
    if (start_month < 0 || start_month > 11)
      throw std::invalid_argument("sample: start_month out of range");
    for (int t = 0; t < T; ++t) {
      if (months[size_t(t)] > 11) throw std::invalid_argument("sample: bad month");
      if (dw[size_t(t)] >= kDwClasses) throw std::invalid_argument("sample: DW id out of range");
      float ndvi = chan(t, group_spec(Group::NDVI).chan_offset);
      if (ndvi < -1.0f - 1e-6f || ndvi > 1.0f + 1e-6f)
        throw std::invalid_argument("sample: NDVI out of [-1, 1]");
    }
  }
};

struct Dataset {
  std::vector<PixelSample> samples;
  std::vector<int32_t> labels;  // aligned with samples; -1 = unlabeled

  size_t size() const { return samples.size(); }
};

// Cartesian unit vector from geographic coordinates.
inline std::array<float, 3> location_to_cartesian(double lat_deg, double lon_deg) {
  if (lat_deg < -90.0 || lat_deg > 90.0 || lon_deg < -180.0 || lon_deg > 180.0)
    throw std::out_of_range("location: lat/lon out of range");
  double lat = lat_deg * M_PI / 180.0;
  double lon = lon_deg * M_PI / 180.0;
  return {float(std::cos(lat) * std::cos(lon)), float(std::cos(lat) * std::sin(lon)),
          float(std::sin(lat))};
}

// (b8 - b4) / (b8 + b4), defined as 0 when both bands are zero.
inline float compute_ndvi(float b4, float b8) {
  if (b4 < 0.0f || b8 < 0.0f) throw std::invalid_argument("ndvi: negative band");
  float denom = b8 + b4;
  if (denom == 0.0f) return 0.0f;
  return (b8 - b4) / denom;
}

// Per-channel standardization statistics over the 17 continuous channels
// (15 dynamic + elevation + slope), in that order.
struct NormStats {
  std::array<float, kContChannels> mean{};
  std::array<float, kContChannels> std{};

  bool valid() const {
    for (float s : std)
      if (!(s > 0.0f)) return false;
    return true;
  }
};

// Presence-aware statistics over a training split; std floored at 1e-6.
NormStats compute_norm_stats(const Dataset& ds);

// Standardize continuous channels in place semantics (returns a copy);
// DW, months, and presence are untouched.
PixelSample normalize(const PixelSample& s, const NormStats& stats);
PixelSample denormalize(const PixelSample& s, const NormStats& stats);
Dataset normalize(const Dataset& ds, const NormStats& stats);

}  // namespace presto
