#include "presto/checkpoint_io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace presto {

namespace {

constexpr char kMagic[8] = {'P', 'R', 'S', 'T', 'C', 'K', 'P', 'T'};
constexpr uint16_t kVersion = 1;

void put_u16(std::string& out, uint16_t v) {
  out.push_back(char(v & 0xff));
  out.push_back(char(v >> 8));
}
void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}
void put_f32(std::string& out, float v) {
  uint32_t u;
  std::memcpy(&u, &v, 4);
  put_u32(out, u);
}

struct Reader {
  const std::string& buf;
  size_t pos = 0;
  void need(size_t n) {
    if (pos + n > buf.size()) throw IoError(IoCode::Truncated, "checkpoint: truncated");
  }
  uint8_t u8() { need(1); return uint8_t(buf[pos++]); }
  uint16_t u16() {
    need(2);
    uint16_t v = uint16_t(uint8_t(buf[pos])) | uint16_t(uint8_t(buf[pos + 1])) << 8;
    pos += 2;
    return v;
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(uint8_t(buf[pos + size_t(i)])) << (8 * i);
    pos += 4;
    return v;
  }
  uint64_t u64() {
    uint64_t lo = u32(), hi = u32();
    return lo | (hi << 32);
  }
  float f32() {
    uint32_t u = u32();
    float v;
    std::memcpy(&v, &u, 4);
    return v;
  }
  void raw(void* dst, size_t n) {
    need(n);
    std::memcpy(dst, buf.data() + pos, n);
    pos += n;
  }
};

}  // namespace

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::string out;
  out.append(kMagic, 8);
  put_u16(out, kVersion);
  const ModelConfig& c = ckpt.config;
  for (int v : {c.depth, c.d_e, c.n_heads, c.mlp_ratio, c.dec_depth, c.d_dec,
                c.dec_heads, c.dec_mlp_ratio, c.dw_vocab, c.dw_mask_id})
    put_u32(out, uint32_t(v));
  for (float v : ckpt.norm_stats.mean) put_f32(out, v);
  for (float v : ckpt.norm_stats.std) put_f32(out, v);

  put_u32(out, uint32_t(ckpt.params.size()));
  uint64_t offset = 0;
  for (const auto& [name, t] : ckpt.params) {
    put_u16(out, uint16_t(name.size()));
    out.append(name);
    out.push_back(char(t.shape.size()));
    for (int64_t e : t.shape) put_u32(out, uint32_t(e));
    put_u64(out, offset);
    offset += uint64_t(t.numel()) * 4;
  }
  for (const auto& [name, t] : ckpt.params)
    for (float v : t.data) put_f32(out, v);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError(IoCode::Corrupt, "cannot write " + path);
  f.write(out.data(), std::streamsize(out.size()));
  if (!f) throw IoError(IoCode::Corrupt, "short write to " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(IoCode::Corrupt, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string buf = ss.str();
  Reader r{buf};

  char magic[8];
  r.raw(magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0)
    throw IoError(IoCode::BadMagic, "checkpoint: bad magic in " + path);
  uint16_t version = r.u16();
  if (version != kVersion)
    throw IoError(IoCode::BadVersion,
                  "checkpoint: unsupported version " + std::to_string(version));
  Checkpoint ckpt;
  ModelConfig& c = ckpt.config;
  for (int* v : {&c.depth, &c.d_e, &c.n_heads, &c.mlp_ratio, &c.dec_depth, &c.d_dec,
                 &c.dec_heads, &c.dec_mlp_ratio, &c.dw_vocab, &c.dw_mask_id})
    *v = int(r.u32());
  for (float& v : ckpt.norm_stats.mean) v = r.f32();
  for (float& v : ckpt.norm_stats.std) v = r.f32();

  const uint32_t count = r.u32();
  struct Entry {
    std::string name;
    std::vector<int64_t> shape;
    uint64_t offset;
  };
  std::vector<Entry> entries;
  uint64_t expect_offset = 0;
  for (uint32_t i = 0; i < count; ++i) {
    Entry e;
    uint16_t len = r.u16();
    e.name.resize(len);
    r.raw(e.name.data(), len);
    uint8_t ndim = r.u8();
    for (int k = 0; k < ndim; ++k) e.shape.push_back(int64_t(r.u32()));
    e.offset = r.u64();
    if (e.offset != expect_offset)
      throw IoError(IoCode::Corrupt, "checkpoint: non-contiguous payload at " + e.name);
    expect_offset += uint64_t(Tensor::numel_of(e.shape)) * 4;
    entries.push_back(std::move(e));
  }
  for (auto& e : entries) {
    Tensor t(e.shape);
    for (auto& v : t.data) v = r.f32();
    ckpt.params.add(e.name, std::move(t));
  }
  if (r.pos != buf.size())
    throw IoError(IoCode::Corrupt, "checkpoint: trailing bytes in " + path);
  return ckpt;
}

}  // namespace presto
