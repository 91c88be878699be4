#include "presto/synth.hpp"

#include <cmath>
#include <stdexcept>

#include "presto/rng.hpp"

namespace presto {

namespace {

std::vector<std::vector<float>> derive_table(Rng rng, int n_classes, float lo, float hi) {
  std::vector<std::vector<float>> t(size_t(n_classes),
                                    std::vector<float>(kDynContChannels, 0.0f));
  for (auto& row : t)
    for (auto& v : row) v = lo + float(rng.uniform()) * (hi - lo);
  return t;
}

}  // namespace

Dataset generate_synthetic(const SyntheticWorldConfig& cfg) {
  if (cfg.n_samples <= 0 || cfg.n_classes <= 0 || cfg.T <= 0)
    throw std::invalid_argument("synth: bad config");
  Rng root(cfg.seed);

  auto base = cfg.base;
  auto amp = cfg.amplitude;
  auto phase = cfg.phase;
  if (base.empty()) base = derive_table(root.split(1), cfg.n_classes, -0.4f, 0.4f);
  if (amp.empty()) amp = derive_table(root.split(2), cfg.n_classes, 0.3f, 1.0f);
  if (phase.empty()) phase = derive_table(root.split(3), cfg.n_classes, 0.0f, 12.0f);
  for (const auto* t : {&base, &amp, &phase})
    if (int(t->size()) != cfg.n_classes || int((*t)[0].size()) != kDynContChannels)
      throw std::invalid_argument("synth: signature table shape mismatch");

  const int ndvi_col = group_spec(Group::NDVI).chan_offset;

  // Round-robin keeps the classes exactly balanced; the shuffle decorrelates
  // labels from sample index so any contiguous or strided split is stratified.
  std::vector<int> assignment(size_t(cfg.n_samples));
  for (int64_t i = 0; i < cfg.n_samples; ++i)
    assignment[size_t(i)] = int(i % cfg.n_classes);
  Rng arng = root.split(4);
  for (size_t i = assignment.size(); i > 1; --i)
    std::swap(assignment[i - 1], assignment[size_t(arng.uniform_int(i))]);

  Dataset ds;
  ds.samples.reserve(size_t(cfg.n_samples));
  ds.labels.reserve(size_t(cfg.n_samples));
  for (int64_t i = 0; i < cfg.n_samples; ++i) {
    const int c = assignment[size_t(i)];
    Rng rs = root.split(100 + uint64_t(i));
    PixelSample s;
    s.T = cfg.T;
    s.start_month = int(rs.uniform_int(12));
    s.init_storage();
    s.lat = float(rs.uniform() * 160.0 - 80.0);
    s.lon = float(rs.uniform() * 360.0 - 180.0);
    s.elevation_m = float(500.0 + 300.0 * rs.normal());
    s.slope_deg = float(std::fabs(5.0 + 3.0 * rs.normal()));

    const double gain = 1.0 + cfg.gain_jitter * (2.0 * rs.uniform() - 1.0);
    const double pj = cfg.phase_jitter * rs.normal();
    for (int t = 0; t < s.T; ++t) {
      const int month = s.months[size_t(t)];
      for (int j = 0; j < kDynContChannels; ++j) {
        double v = base[size_t(c)][size_t(j)] +
                   gain * amp[size_t(c)][size_t(j)] *
                       std::sin(2.0 * M_PI * (month + phase[size_t(c)][size_t(j)] + pj) / 12.0) +
                   cfg.noise_sigma * rs.normal();
        if (j == ndvi_col) v = std::clamp(v, -1.0, 1.0);
        s.chan(t, j) = float(v);
      }
      // DW follows a class- and season-dependent mode part of the time.
      if (rs.uniform() < cfg.dw_match_prob)
        s.dw[size_t(t)] = uint8_t((c * 2 + month / 4) % kDwClasses);
      else
        s.dw[size_t(t)] = uint8_t(rs.uniform_int(kDwClasses));
      if (cfg.dropout > 0.0)
        for (int g = 0; g < kNumDynamic; ++g)
          if (rs.uniform() < cfg.dropout) s.presence_dyn[size_t(t) * kNumDynamic + g] = 0;
    }
    s.validate();
    ds.samples.push_back(std::move(s));
    ds.labels.push_back(c);
  }
  return ds;
}

}  // namespace presto
