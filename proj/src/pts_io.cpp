#include "presto/pts_io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace presto {

namespace {

constexpr char kMagic[8] = {'P', 'R', 'S', 'T', 'D', 'A', 'T', 'A'};
constexpr uint16_t kVersion = 1;

void put_u16(std::string& out, uint16_t v) {
  out.push_back(char(v & 0xff));
  out.push_back(char(v >> 8));
}
void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}
void put_f32(std::string& out, float v) {
  uint32_t u;
  std::memcpy(&u, &v, 4);
  put_u32(out, u);
}

class Reader {
 public:
  Reader(const std::string& buf) : buf_(buf) {}
  size_t pos() const { return pos_; }
  void need(size_t n, int64_t record) {
    if (pos_ + n > buf_.size())
      throw IoError(IoCode::Truncated,
                    record >= 0 ? "pts: truncated at record " + std::to_string(record)
                                : "pts: truncated header",
                    record);
  }
  uint8_t u8(int64_t rec = -1) { need(1, rec); return uint8_t(buf_[pos_++]); }
  uint16_t u16(int64_t rec = -1) {
    need(2, rec);
    uint16_t v = uint16_t(uint8_t(buf_[pos_])) | uint16_t(uint8_t(buf_[pos_ + 1])) << 8;
    pos_ += 2;
    return v;
  }
  uint32_t u32(int64_t rec = -1) {
    need(4, rec);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(uint8_t(buf_[pos_ + size_t(i)])) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32(int64_t rec = -1) {
    uint32_t u = u32(rec);
    float v;
    std::memcpy(&v, &u, 4);
    return v;
  }
  void raw(void* dst, size_t n, int64_t rec = -1) {
    need(n, rec);
    std::memcpy(dst, buf_.data() + pos_, n);
    pos_ += n;
  }

 private:
  const std::string& buf_;
  size_t pos_ = 0;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(IoCode::Corrupt, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void write_pts(const std::string& path, const Dataset& ds) {
  if (ds.labels.size() != ds.samples.size())
    throw std::invalid_argument("pts: labels misaligned with samples");
  const int T = ds.samples.empty() ? kDefaultT : ds.samples[0].T;
  for (const auto& s : ds.samples)
    if (s.T != T) throw std::invalid_argument("pts: mixed T in one file");

  std::string out;
  out.append(kMagic, 8);
  put_u16(out, kVersion);
  out.push_back(char(T));
  out.push_back(char(kNumGroups));
  for (const auto& g : group_table()) {
    out.push_back(char(std::strlen(g.name)));
    out.append(g.name);
    out.push_back(char(g.width));
    out.push_back(char(g.categorical ? 1 : 0));
    out.push_back(char(g.dynamic ? 1 : 0));
  }
  put_u32(out, uint32_t(ds.samples.size()));
  for (size_t i = 0; i < ds.samples.size(); ++i) {
    const auto& s = ds.samples[i];
    put_u32(out, uint32_t(ds.labels[i]));
    put_f32(out, s.lat);
    put_f32(out, s.lon);
    out.push_back(char(s.start_month));
    put_f32(out, s.elevation_m);
    put_f32(out, s.slope_deg);
    out.push_back(char(s.presence_tg ? 1 : 0));
    out.append(reinterpret_cast<const char*>(s.months.data()), s.months.size());
    out.append(reinterpret_cast<const char*>(s.dw.data()), s.dw.size());
    out.append(reinterpret_cast<const char*>(s.presence_dyn.data()), s.presence_dyn.size());
    for (float v : s.continuous) put_f32(out, v);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError(IoCode::Corrupt, "cannot write " + path);
  f.write(out.data(), std::streamsize(out.size()));
  if (!f) throw IoError(IoCode::Corrupt, "short write to " + path);
}

Dataset read_pts(const std::string& path) {
  const std::string buf = slurp(path);
  Reader r(buf);
  char magic[8];
  r.raw(magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0)
    throw IoError(IoCode::BadMagic, "pts: bad magic in " + path);
  uint16_t version = r.u16();
  if (version != kVersion)
    throw IoError(IoCode::BadVersion, "pts: unsupported version " + std::to_string(version));
  const int T = r.u8();
  const int ngroups = r.u8();
  if (T <= 0 || ngroups != kNumGroups)
    throw IoError(IoCode::Corrupt, "pts: bad header");
  for (const auto& g : group_table()) {
    uint8_t len = r.u8();
    std::string name(size_t(len), '\0');
    r.raw(name.data(), len);
    uint8_t width = r.u8(), cat = r.u8(), dyn = r.u8();
    if (name != g.name || width != g.width || bool(cat) != g.categorical ||
        bool(dyn) != g.dynamic)
      throw IoError(IoCode::Corrupt, "pts: group table mismatch at " + name);
  }
  const uint32_t count = r.u32();
  Dataset ds;
  ds.samples.reserve(count);
  ds.labels.reserve(count);
  for (int64_t i = 0; i < int64_t(count); ++i) {
    PixelSample s;
    s.T = T;
    ds.labels.push_back(int32_t(r.u32(i)));
    s.lat = r.f32(i);
    s.lon = r.f32(i);
    s.start_month = r.u8(i);
    s.elevation_m = r.f32(i);
    s.slope_deg = r.f32(i);
    s.presence_tg = r.u8(i) != 0;
    s.months.resize(size_t(T));
    r.raw(s.months.data(), size_t(T), i);
    s.dw.resize(size_t(T));
    r.raw(s.dw.data(), size_t(T), i);
    s.presence_dyn.resize(size_t(T) * kNumDynamic);
    r.raw(s.presence_dyn.data(), s.presence_dyn.size(), i);
    s.continuous.resize(size_t(T) * kDynContChannels);
    for (auto& v : s.continuous) v = r.f32(i);
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

namespace {

std::vector<std::string> continuous_headers() {
  std::vector<std::string> h;
  for (int g = 0; g < kNumDynamicCont; ++g) {
    const auto& spec = group_table()[size_t(g)];
    for (int b = 0; b < spec.width; ++b)
      h.push_back(std::string(spec.name) + "_" + std::to_string(b));
  }
  return h;
}

}  // namespace

void write_csv(const std::string& path, const Dataset& ds) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError(IoCode::Corrupt, "cannot write " + path);
  f << "sample,label,lat,lon,start_month,TG_elevation,TG_slope,presence_TG,timestep,month";
  for (const auto& h : continuous_headers()) f << ',' << h;
  f << ",DW_0";
  for (int g = 0; g < kNumDynamic; ++g) f << ",presence_" << group_table()[size_t(g)].name;
  f << '\n';
  f.precision(9);
  for (size_t i = 0; i < ds.samples.size(); ++i) {
    const auto& s = ds.samples[i];
    for (int t = 0; t < s.T; ++t) {
      f << i << ',' << ds.labels[i] << ',' << s.lat << ',' << s.lon << ','
        << s.start_month << ',' << s.elevation_m << ',' << s.slope_deg << ','
        << int(s.presence_tg) << ',' << t << ',' << int(s.months[size_t(t)]);
      for (int c = 0; c < kDynContChannels; ++c) f << ',' << s.chan(t, c);
      f << ',' << int(s.dw[size_t(t)]);
      for (int g = 0; g < kNumDynamic; ++g) f << ',' << int(s.present(t, g));
      f << '\n';
    }
  }
}

Dataset read_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError(IoCode::Corrupt, "cannot open " + path);
  std::string line;
  if (!std::getline(f, line)) throw IoError(IoCode::Truncated, "csv: empty file");
  Dataset ds;
  int64_t cur_sample = -1;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    const size_t expect = 10 + kDynContChannels + 1 + kNumDynamic;
    if (cells.size() != expect)
      throw IoError(IoCode::Corrupt, "csv: wrong column count", int64_t(ds.samples.size()));
    int64_t sid = std::stoll(cells[0]);
    int t = std::stoi(cells[8]);
    if (sid != cur_sample) {
      if (sid != cur_sample + 1 || t != 0)
        throw IoError(IoCode::Corrupt, "csv: rows out of order", sid);
      cur_sample = sid;
      PixelSample s;
      s.T = 0;  // grows as timestep rows arrive
      s.lat = std::stof(cells[2]);
      s.lon = std::stof(cells[3]);
      s.start_month = std::stoi(cells[4]);
      s.elevation_m = std::stof(cells[5]);
      s.slope_deg = std::stof(cells[6]);
      s.presence_tg = cells[7] != "0";
      ds.samples.push_back(std::move(s));
      ds.labels.push_back(int32_t(std::stol(cells[1])));
    }
    PixelSample& s = ds.samples.back();
    if (t != s.T) throw IoError(IoCode::Corrupt, "csv: non-contiguous timesteps", sid);
    ++s.T;
    s.months.push_back(uint8_t(std::stoi(cells[9])));
    for (int c = 0; c < kDynContChannels; ++c)
      s.continuous.push_back(std::stof(cells[size_t(10 + c)]));
    s.dw.push_back(uint8_t(std::stoi(cells[size_t(10 + kDynContChannels)])));
    for (int g = 0; g < kNumDynamic; ++g)
      s.presence_dyn.push_back(cells[size_t(11 + kDynContChannels + g)] != "0" ? 1 : 0);
  }
  return ds;
}

}  // namespace presto
