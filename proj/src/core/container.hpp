#pragma once

#include <span>
#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace dfrlab {

// Binary tensor container ("DFRT"): magic, u32 LE format version, u32 LE
// entry count, then per entry a u32 LE name length, the UTF-8 name, a u32
// LE rank, u64 LE dims, and the payload as row-major 64-bit LE IEEE-754
// doubles. Round-trips are bitwise lossless.
inline constexpr uint32_t kContainerVersion = 1;

struct TensorEntry {
  std::string name;
  Tensor tensor;
};

void save_container(const std::string& path,
                    std::span<const TensorEntry> entries);
std::vector<TensorEntry> load_container(const std::string& path);

// In-memory forms used by the tests and the file functions alike.
std::vector<unsigned char> encode_container(
    std::span<const TensorEntry> entries);
std::vector<TensorEntry> decode_container(std::span<const unsigned char> bytes);

}  // namespace dfrlab
