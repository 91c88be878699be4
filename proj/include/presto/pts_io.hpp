#pragma once

#include <stdexcept>
#include <string>

#include "presto/data.hpp"

namespace presto {

// Distinct failure modes for the binary formats; carried by IoError and
// mapped to CLI exit diagnostics.
enum class IoCode {
  BadMagic,
  BadVersion,
  Truncated,
  Corrupt,
};

class IoError : public std::runtime_error {
 public:
  IoError(IoCode code, const std::string& what, int64_t record = -1)
      : std::runtime_error(what), code_(code), record_(record) {}
  IoCode code() const { return code_; }
  int64_t record() const { return record_; }  // failing record index, -1 n/a

 private:
  IoCode code_;
  int64_t record_;
};

// PTS binary dataset format: magic "PRSTDATA", version u16, little-endian
// header (T, group table, record count) and fixed-stride records.
void write_pts(const std::string& path, const Dataset& ds);
Dataset read_pts(const std::string& path);

// CSV interchange: one row per (sample, timestep) with <group>_<band> columns
// and repeated per-sample static columns.
void write_csv(const std::string& path, const Dataset& ds);
Dataset read_csv(const std::string& path);

}  // namespace presto
