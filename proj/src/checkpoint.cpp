#include "ftsum/checkpoint.hpp"

#include "ftsum/error.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace ftsum {

namespace {

constexpr char kMagic[8] = {'F', 'T', 'S', 'U', 'M', 'C', 'K', 'P'};

template <class U>
void put(std::ostream& out, U v) {
  unsigned char buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(buf), sizeof(U));
}

template <class U>
U get(std::istream& in) {
  unsigned char buf[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(U))) throw ParseError("checkpoint truncated");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
  return v;
}

void put_str(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_str(std::istream& in) {
  const auto n = get<std::uint32_t>(in);
  std::string s(n, '\0');
  if (n > 0 && !in.read(s.data(), n)) throw ParseError("checkpoint truncated");
  return s;
}

}  // namespace

const CheckpointEntry& Checkpoint::entry(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return e;
  throw ParseError("checkpoint has no entry '" + name + "'");
}

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.metadata.size()));
  for (const auto& [k, v] : ckpt.metadata) {
    put_str(out, k);
    put_str(out, v);
  }
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.entries.size()));
  for (const auto& e : ckpt.entries) {
    std::uint64_t count = 1;
    for (auto d : e.shape) count *= d;
    if (count != e.values.size()) throw ShapeError("checkpoint entry '" + e.name + "' shape/value mismatch");
    put_str(out, e.name);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.shape.size()));
    for (auto d : e.shape) put<std::uint64_t>(out, d);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(e.precision));
    for (double v : e.values) {
      if (e.precision == Precision::F32)
        put<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
      else
        put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
    }
  }
  if (!out) throw Error("failed writing checkpoint");
}

Checkpoint read_checkpoint(std::istream& in) {
  char magic[sizeof kMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw ParseError("not a checkpoint (bad magic)");
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion) throw ParseError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ckpt;
  const auto nmeta = get<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < nmeta; ++i) {
    auto k = get_str(in);
    ckpt.metadata[k] = get_str(in);
  }
  const auto nentries = get<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < nentries; ++i) {
    CheckpointEntry e;
    e.name = get_str(in);
    const auto ndim = get<std::uint32_t>(in);
    std::uint64_t count = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      e.shape.push_back(get<std::uint64_t>(in));
      count *= e.shape.back();
    }
    const auto tag = get<std::uint8_t>(in);
    if (tag != 1 && tag != 2) throw ParseError("unknown precision tag " + std::to_string(tag));
    e.precision = static_cast<Precision>(tag);
    e.values.reserve(count);
    for (std::uint64_t k = 0; k < count; ++k) {
      if (e.precision == Precision::F32)
        e.values.push_back(std::bit_cast<float>(get<std::uint32_t>(in)));
      else
        e.values.push_back(std::bit_cast<double>(get<std::uint64_t>(in)));
    }
    ckpt.entries.push_back(std::move(e));
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return read_checkpoint(in);
}

}  // namespace ftsum
