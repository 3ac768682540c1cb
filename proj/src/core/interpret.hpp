#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "core/datagen.hpp"
#include "core/nn.hpp"

namespace dfrlab {

enum class MapSpace { Feature, Input };

struct Heatmap {
  size_t h = 0;
  size_t w = 0;
  std::vector<double> values;  // row-major
  MapSpace space = MapSpace::Feature;

  double& at(size_t y, size_t x) { return values[y * w + x]; }
  double at(size_t y, size_t x) const { return values[y * w + x]; }
};

// Head-weighted sum of the encoder's final spatial maps, upsampled to the
// input resolution. Signed.
Heatmap cam(const TrainedModel& model, const Tensor& image);

// Upsampled activation map of a single feature channel; nonnegative since
// the channels are post-ReLU.
Heatmap neuron_map(const TrainedModel& model, const Tensor& image, size_t k);

// Align-corners bilinear interpolation; exact at the four corners. Output
// dims must be >= input dims.
Heatmap upsample_bilinear(const Heatmap& map, size_t out_h, size_t out_w);

struct RegionScore {
  double score = 0.0;
  bool empty_mass = false;  // total positive mass was zero
};

// Fraction of the map's positive mass (ReLU of values) inside the mask.
RegionScore region_score(const Heatmap& map, std::span<const uint8_t> mask);

enum class NeuronKind { SpuriousOnly, CoreOnly, Mixed, Inactive };
const char* neuron_kind_name(NeuronKind kind);

struct TaxonomyThresholds {
  double tau_hi = 0.5;
  double tau_lo = 0.2;
  double eps_act = 1e-6;
};

struct NeuronReport {
  size_t k = 0;
  double w_erm = 0.0;
  double w_dfr = 0.0;  // NaN when no retrained head was supplied
  double core_score = 0.0;
  double spurious_score = 0.0;
  double mean_activation_mass = 0.0;
  NeuronKind kind = NeuronKind::Inactive;
};

// Core score averages region_score against core masks over all probe
// samples; spurious score averages against spurious masks over the
// patch-present probes (at least one is required).
NeuronReport classify_neuron(const TrainedModel& model,
                             std::span<const Sample> probe, size_t k,
                             const TaxonomyThresholds& thresholds = {});

// Reports for all feature channels, with the retrained head's weights
// filled in alongside the ERM ones.
std::vector<NeuronReport> neuron_taxonomy(
    const TrainedModel& erm_model, const Head& dfr_head,
    std::span<const Sample> probe, const TaxonomyThresholds& thresholds = {});

// Row-major reshape of the head weights into (d / grid_w) x grid_w.
Heatmap weight_heatmap(const Head& head, size_t grid_w);

}  // namespace dfrlab
