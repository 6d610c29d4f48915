#pragma once

// Binary tensor container.
//
// Layout (little-endian):
//   magic "FTSUMCKP" | u32 version
//   u32 metadata count | { str key | str value }*
//   u32 entry count    | { str name | u32 ndim | u64 dim* | u8 precision | raw values }*
// where str = u32 byte length + bytes. Precision 1 stores IEEE binary32,
// 2 stores binary64. Reading then writing reproduces the input bytes.

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace ftsum {

enum class Precision : std::uint8_t { F32 = 1, F64 = 2 };

struct CheckpointEntry {
  std::string name;
  std::vector<std::uint64_t> shape;
  Precision precision = Precision::F32;
  std::vector<double> values;  // already rounded to `precision`
};

struct Checkpoint {
  std::map<std::string, std::string> metadata;
  std::vector<CheckpointEntry> entries;

  const CheckpointEntry& entry(const std::string& name) const;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ftsum
