#include "core/container.hpp"

#include <cstring>
#include <fstream>
#include <set>

#include "core/error.hpp"

namespace dfrlab {

namespace {

constexpr char kMagic[4] = {'D', 'F', 'R', 'T'};

void put_u32(std::vector<unsigned char>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back((v >> (8 * i)) & 0xFF);
}

void put_u64(std::vector<unsigned char>& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back((v >> (8 * i)) & 0xFF);
}

void put_f64(std::vector<unsigned char>& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

struct Reader {
  std::span<const unsigned char> bytes;
  size_t pos = 0;

  void need(size_t n, const std::string& what) {
    if (pos + n > bytes.size())
      fail(Errc::Format, "container: truncated " + what + " at offset " +
                             std::to_string(pos) + " (need " +
                             std::to_string(n) + " bytes, have " +
                             std::to_string(bytes.size() - pos) + ")");
  }
  uint32_t u32(const std::string& what) {
    need(4, what);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<uint32_t>(bytes[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  uint64_t u64(const std::string& what) {
    need(8, what);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<uint64_t>(bytes[pos + i]) << (8 * i);
    pos += 8;
    return v;
  }
};

}  // namespace

std::vector<unsigned char> encode_container(
    std::span<const TensorEntry> entries) {
  std::set<std::string> seen;
  for (const auto& e : entries)
    if (!seen.insert(e.name).second)
      fail(Errc::InvalidArgument,
           "container: duplicate entry name '" + e.name + "'");

  std::vector<unsigned char> out;
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u32(out, kContainerVersion);
  put_u32(out, static_cast<uint32_t>(entries.size()));
  for (const auto& e : entries) {
    put_u32(out, static_cast<uint32_t>(e.name.size()));
    out.insert(out.end(), e.name.begin(), e.name.end());
    put_u32(out, static_cast<uint32_t>(e.tensor.rank()));
    for (size_t d : e.tensor.shape()) put_u64(out, d);
    for (double v : e.tensor.values()) put_f64(out, v);
  }
  return out;
}

std::vector<TensorEntry> decode_container(
    std::span<const unsigned char> bytes) {
  Reader r{bytes};
  r.need(4, "magic");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0)
    fail(Errc::Format, "container: bad magic at offset 0");
  r.pos = 4;
  const uint32_t version = r.u32("version");
  if (version != kContainerVersion)
    fail(Errc::Format, "container: unsupported format version " +
                           std::to_string(version) + " at offset 4");
  const uint32_t count = r.u32("entry count");

  std::vector<TensorEntry> out;
  std::set<std::string> seen;
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t name_len = r.u32("name length");
    r.need(name_len, "name");
    std::string name(reinterpret_cast<const char*>(bytes.data() + r.pos),
                     name_len);
    r.pos += name_len;
    if (!seen.insert(name).second)
      fail(Errc::Format, "container: duplicate entry name '" + name + "'");
    const uint32_t rank = r.u32("rank");
    std::vector<size_t> shape;
    uint64_t total = 1;
    for (uint32_t d = 0; d < rank; ++d) {
      const uint64_t dim = r.u64("dims");
      shape.push_back(static_cast<size_t>(dim));
      total *= dim;
    }
    r.need(total * 8, "payload of entry '" + name + "'");
    std::vector<double> values(total);
    for (uint64_t v = 0; v < total; ++v) {
      uint64_t bits = 0;
      for (int b = 0; b < 8; ++b)
        bits |= static_cast<uint64_t>(bytes[r.pos + b]) << (8 * b);
      r.pos += 8;
      std::memcpy(&values[v], &bits, 8);
    }
    out.push_back({std::move(name), Tensor(std::move(shape), std::move(values))});
  }
  if (r.pos != bytes.size())
    fail(Errc::Format, "container: trailing bytes at offset " +
                           std::to_string(r.pos));
  return out;
}

void save_container(const std::string& path,
                    std::span<const TensorEntry> entries) {
  const auto bytes = encode_container(entries);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(Errc::Io, "container: cannot open '" + path + "' for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) fail(Errc::Io, "container: write to '" + path + "' failed");
}

std::vector<TensorEntry> load_container(const std::string& path) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) fail(Errc::Io, "container: cannot open '" + path + "'");
  const std::streamsize n = f.tellg();
  f.seekg(0);
  std::vector<unsigned char> bytes(static_cast<size_t>(n));
  f.read(reinterpret_cast<char*>(bytes.data()), n);
  if (!f) fail(Errc::Io, "container: read from '" + path + "' failed");
  return decode_container(bytes);
}

}  // namespace dfrlab
