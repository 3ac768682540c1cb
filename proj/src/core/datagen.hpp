#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "core/tensor.hpp"

namespace dfrlab {

// Parameters of the synthetic benchmark: two classes defined by a core
// shape (class 0 = filled disk, class 1 = diagonal cross), an optional
// solid patch in one image corner as the spurious attribute, and a
// controllable train-time correlation between patch and class.
struct DatasetSpec {
  uint32_t image_size = 32;
  uint32_t channels = 3;
  uint32_t n_train_per_class = 500;
  uint32_t n_val_per_class = 100;
  uint32_t n_test_per_class = 250;
  // Fraction of class-0 training images carrying the patch; class 1 carries
  // it at (1 - train_correlation). Validation/test rates are fixed at 0.5.
  double train_correlation = 0.95;
  uint32_t patch_size = 6;
  double noise_sigma = 0.35;
  uint64_t seed = 42;
};

// Throws Errc::InvalidSpec naming the violated field.
void validate(const DatasetSpec& spec);

struct GroupId {
  uint8_t label = 0;          // {0,1}
  uint8_t spurious_flag = 0;  // 0 = absent, 1 = present
  int index() const { return label * 2 + spurious_flag; }
  bool operator==(const GroupId&) const = default;
};

// index = label*2 + flag; out-of-range arguments throw.
GroupId group_of(int label, int spurious_flag);

enum class Split { Train = 0, Valid = 1, Test = 2 };
inline const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Valid: return "valid";
    default: return "test";
  }
}

struct Sample {
  Tensor image;  // [channels, image_size, image_size], values in [0,1]
  uint8_t label = 0;
  GroupId group;
  // Row-major image_size*image_size boolean maps; disjoint by construction.
  std::vector<uint8_t> core_mask;
  std::vector<uint8_t> spurious_mask;
};

// counts[split][group.index()]
using SplitCounts = std::array<std::array<uint64_t, 4>, 3>;

SplitCounts split_counts(const DatasetSpec& spec);

struct GroupedDataset {
  DatasetSpec spec;
  std::vector<Sample> train;
  std::vector<Sample> valid;
  std::vector<Sample> test;

  const std::vector<Sample>& split(Split s) const {
    switch (s) {
      case Split::Train: return train;
      case Split::Valid: return valid;
      default: return test;
    }
  }
  std::vector<Sample>& split(Split s) {
    switch (s) {
      case Split::Train: return train;
      case Split::Valid: return valid;
      default: return test;
    }
  }
};

// Pure function of the spec (including its seed); regeneration is
// byte-identical. Samples within a split are laid out group-contiguously
// in group-index order.
GroupedDataset generate_dataset(const DatasetSpec& spec);

}  // namespace dfrlab
