#include "core/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace dfrlab {

namespace {

constexpr double kBackground = 0.25;
constexpr uint64_t kSampleTagBase = 0x5A11D00000000000ull;

// Room the core shape needs after the patch margin is reserved on every
// side (shapes never enter a corner patch area, so core and spurious masks
// are disjoint no matter which corner is drawn).
int usable_span(const DatasetSpec& spec) {
  return static_cast<int>(spec.image_size) -
         2 * (static_cast<int>(spec.patch_size) + 1);
}

struct ShapeParams {
  double intensity;
  double cx, cy;
  double size;       // disk radius or cross half-extent
  double thickness;  // cross stroke half-width
};

ShapeParams draw_shape_params(Rng& rng, const DatasetSpec& spec, int label) {
  const int margin = static_cast<int>(spec.patch_size) + 1;
  const double span = usable_span(spec);
  ShapeParams p{};
  p.intensity = rng.next_uniform(0.55, 0.85);
  if (label == 0) {
    p.size = rng.next_uniform(std::max(1.5, 0.15 * span),
                              std::max(2.0, 0.28 * span));
  } else {
    p.size = rng.next_uniform(std::max(2.0, 0.20 * span),
                              std::max(2.5, 0.35 * span));
    p.thickness = std::max(0.9, 0.08 * span);
  }
  p.size = std::min(p.size, 0.5 * span - 0.5);
  const double lo = margin + p.size;
  const double hi = spec.image_size - 1 - margin - p.size;
  p.cx = rng.next_uniform(lo, std::max(lo, hi));
  p.cy = rng.next_uniform(lo, std::max(lo, hi));
  return p;
}

bool inside_disk(const ShapeParams& p, int y, int x) {
  const double dx = x - p.cx;
  const double dy = y - p.cy;
  return dx * dx + dy * dy <= p.size * p.size;
}

bool inside_cross(const ShapeParams& p, int y, int x) {
  const double dx = x - p.cx;
  const double dy = y - p.cy;
  if (std::max(std::abs(dx), std::abs(dy)) > p.size) return false;
  return std::abs(dx - dy) <= p.thickness || std::abs(dx + dy) <= p.thickness;
}

Sample make_sample(const DatasetSpec& spec, Split split, size_t index,
                   int label, int flag) {
  const uint32_t s = spec.image_size;
  const uint32_t c = spec.channels;
  Rng rng = Rng::substream(spec.seed,
                           kSampleTagBase + static_cast<uint64_t>(split),
                           index);

  Sample out;
  out.label = static_cast<uint8_t>(label);
  out.group = group_of(label, flag);
  out.image = Tensor({c, s, s});
  out.core_mask.assign(static_cast<size_t>(s) * s, 0);
  out.spurious_mask.assign(static_cast<size_t>(s) * s, 0);

  const ShapeParams p = draw_shape_params(rng, spec, label);
  for (uint32_t y = 0; y < s; ++y) {
    for (uint32_t x = 0; x < s; ++x) {
      const bool hit = (label == 0) ? inside_disk(p, y, x)
                                    : inside_cross(p, y, x);
      if (hit) out.core_mask[y * s + x] = 1;
      const double v = hit ? p.intensity : kBackground;
      for (uint32_t ch = 0; ch < c; ++ch) out.image(ch, y, x) = v;
    }
  }

  // Additive Gaussian pixel noise, clamped to [0,1].
  for (uint32_t ch = 0; ch < c; ++ch) {
    for (uint32_t y = 0; y < s; ++y) {
      for (uint32_t x = 0; x < s; ++x) {
        double v = out.image(ch, y, x) + spec.noise_sigma * rng.next_gaussian();
        out.image(ch, y, x) = std::min(1.0, std::max(0.0, v));
      }
    }
  }

  // The patch is drawn last and solid: a saturated primary-color square
  // flush in a uniformly chosen corner.
  if (flag == 1) {
    const uint32_t ps = spec.patch_size;
    const uint64_t corner = rng.next_below(4);
    const uint32_t y0 = (corner & 1) ? s - ps : 0;
    const uint32_t x0 = (corner & 2) ? s - ps : 0;
    for (uint32_t y = y0; y < y0 + ps; ++y) {
      for (uint32_t x = x0; x < x0 + ps; ++x) {
        out.spurious_mask[y * s + x] = 1;
        out.image(0, y, x) = 1.0;
        for (uint32_t ch = 1; ch < c; ++ch) out.image(ch, y, x) = 0.0;
      }
    }
  }
  return out;
}

}  // namespace

void validate(const DatasetSpec& spec) {
  if (spec.image_size == 0)
    fail(Errc::InvalidSpec, "dataset spec: image_size must be positive");
  if (spec.channels == 0)
    fail(Errc::InvalidSpec, "dataset spec: channels must be positive");
  if (!(spec.train_correlation >= 0.0 && spec.train_correlation <= 1.0))
    fail(Errc::InvalidSpec,
         "dataset spec: train_correlation must lie in [0,1], got " +
             std::to_string(spec.train_correlation));
  if (spec.patch_size == 0)
    fail(Errc::InvalidSpec, "dataset spec: patch_size must be positive");
  if (spec.patch_size * 2 >= spec.image_size)
    fail(Errc::InvalidSpec,
         "dataset spec: patch_size must be smaller than image_size/2 (got " +
             std::to_string(spec.patch_size) + " for image_size " +
             std::to_string(spec.image_size) + ")");
  if (usable_span(spec) < 4)
    fail(Errc::InvalidSpec,
         "dataset spec: patch_size leaves no room for the core shape "
         "(image_size - 2*(patch_size+1) must be >= 4)");
  if (!(spec.noise_sigma >= 0.0))
    fail(Errc::InvalidSpec, "dataset spec: noise_sigma must be >= 0");
}

GroupId group_of(int label, int spurious_flag) {
  if (label != 0 && label != 1)
    fail(Errc::InvalidArgument,
         "group_of: label must be 0 or 1, got " + std::to_string(label));
  if (spurious_flag != 0 && spurious_flag != 1)
    fail(Errc::InvalidArgument, "group_of: spurious_flag must be 0 or 1, got " +
                                    std::to_string(spurious_flag));
  return GroupId{static_cast<uint8_t>(label),
                 static_cast<uint8_t>(spurious_flag)};
}

SplitCounts split_counts(const DatasetSpec& spec) {
  validate(spec);
  SplitCounts counts{};
  // Train: class 0 carries the patch at train_correlation, class 1 at its
  // complement; the with-patch count is round(n * rate).
  {
    const uint64_t n = spec.n_train_per_class;
    const auto with0 = static_cast<uint64_t>(
        std::llround(static_cast<double>(n) * spec.train_correlation));
    const auto with1 = static_cast<uint64_t>(std::llround(
        static_cast<double>(n) * (1.0 - spec.train_correlation)));
    counts[0][group_of(0, 1).index()] = with0;
    counts[0][group_of(0, 0).index()] = n - with0;
    counts[0][group_of(1, 1).index()] = with1;
    counts[0][group_of(1, 0).index()] = n - with1;
  }
  // Valid/test: 0.5 per class, floor rounding, remainder to the no-patch
  // group.
  const uint64_t per_class[2] = {spec.n_val_per_class, spec.n_test_per_class};
  for (int s = 0; s < 2; ++s) {
    const uint64_t n = per_class[s];
    const uint64_t with = n / 2;
    for (int label = 0; label < 2; ++label) {
      counts[s + 1][group_of(label, 1).index()] = with;
      counts[s + 1][group_of(label, 0).index()] = n - with;
    }
  }
  return counts;
}

GroupedDataset generate_dataset(const DatasetSpec& spec) {
  const SplitCounts counts = split_counts(spec);
  GroupedDataset ds;
  ds.spec = spec;
  for (Split split : {Split::Train, Split::Valid, Split::Test}) {
    auto& samples = ds.split(split);
    size_t index = 0;
    for (int g = 0; g < 4; ++g) {
      const int label = g / 2;
      const int flag = g % 2;
      const uint64_t n = counts[static_cast<int>(split)][g];
      for (uint64_t i = 0; i < n; ++i, ++index) {
        samples.push_back(make_sample(spec, split, index, label, flag));
      }
    }
  }
  return ds;
}

}  // namespace dfrlab
