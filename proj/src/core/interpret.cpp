#include "core/interpret.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "core/error.hpp"

namespace dfrlab {

namespace {

Heatmap upsample_to_input(const Heatmap& feature_map, size_t side) {
  Heatmap up = upsample_bilinear(feature_map, side, side);
  up.space = MapSpace::Input;
  return up;
}

}  // namespace

Heatmap cam(const TrainedModel& model, const Tensor& image) {
  const ForwardResult fr = forward(model.encoder, image);
  const size_t d = fr.spatial_maps.shape()[0];
  if (model.head.weights.size() != d)
    fail(Errc::ShapeMismatch, "cam: head/encoder dimension mismatch");
  const size_t h = fr.spatial_maps.shape()[1];
  const size_t w = fr.spatial_maps.shape()[2];

  Heatmap m;
  m.h = h;
  m.w = w;
  m.space = MapSpace::Feature;
  m.values.assign(h * w, 0.0);
  for (size_t k = 0; k < d; ++k) {
    const double wk = model.head.weights[k];
    const double* src = &fr.spatial_maps.values()[k * h * w];
    for (size_t i = 0; i < h * w; ++i) m.values[i] += wk * src[i];
  }
  return upsample_to_input(m, image.shape()[1]);
}

Heatmap neuron_map(const TrainedModel& model, const Tensor& image, size_t k) {
  const ForwardResult fr = forward(model.encoder, image);
  const size_t d = fr.spatial_maps.shape()[0];
  if (k >= d)
    fail(Errc::InvalidArgument, "neuron_map: channel " + std::to_string(k) +
                                    " out of range (d=" + std::to_string(d) +
                                    ")");
  const size_t h = fr.spatial_maps.shape()[1];
  const size_t w = fr.spatial_maps.shape()[2];
  Heatmap m;
  m.h = h;
  m.w = w;
  m.space = MapSpace::Feature;
  const double* src = &fr.spatial_maps.values()[k * h * w];
  m.values.assign(src, src + h * w);
  return upsample_to_input(m, image.shape()[1]);
}

Heatmap upsample_bilinear(const Heatmap& map, size_t out_h, size_t out_w) {
  if (map.h == 0 || map.w == 0)
    fail(Errc::InvalidArgument, "upsample_bilinear: empty input map");
  if (out_h < map.h || out_w < map.w)
    fail(Errc::InvalidArgument,
         "upsample_bilinear: output dims must be >= input dims");

  Heatmap out;
  out.h = out_h;
  out.w = out_w;
  out.space = map.space;
  out.values.assign(out_h * out_w, 0.0);

  for (size_t oy = 0; oy < out_h; ++oy) {
    double fy = 0.0;
    if (out_h > 1 && map.h > 1)
      fy = static_cast<double>(oy * (map.h - 1)) /
           static_cast<double>(out_h - 1);
    size_t y0 = static_cast<size_t>(fy);
    if (y0 >= map.h - 1) y0 = map.h - 1;
    const size_t y1 = std::min(y0 + 1, map.h - 1);
    const double ty = fy - static_cast<double>(y0);
    for (size_t ox = 0; ox < out_w; ++ox) {
      double fx = 0.0;
      if (out_w > 1 && map.w > 1)
        fx = static_cast<double>(ox * (map.w - 1)) /
             static_cast<double>(out_w - 1);
      size_t x0 = static_cast<size_t>(fx);
      if (x0 >= map.w - 1) x0 = map.w - 1;
      const size_t x1 = std::min(x0 + 1, map.w - 1);
      const double tx = fx - static_cast<double>(x0);
      const double a = map.at(y0, x0);
      const double b = map.at(y0, x1);
      const double c = map.at(y1, x0);
      const double d = map.at(y1, x1);
      out.at(oy, ox) = (1.0 - ty) * ((1.0 - tx) * a + tx * b) +
                       ty * ((1.0 - tx) * c + tx * d);
    }
  }
  return out;
}

RegionScore region_score(const Heatmap& map, std::span<const uint8_t> mask) {
  if (mask.size() != map.values.size())
    fail(Errc::ShapeMismatch,
         "region_score: mask has " + std::to_string(mask.size()) +
             " pixels, map has " + std::to_string(map.values.size()));
  double total = 0.0;
  double inside = 0.0;
  for (size_t i = 0; i < mask.size(); ++i) {
    const double v = map.values[i] > 0.0 ? map.values[i] : 0.0;
    total += v;
    if (mask[i]) inside += v;
  }
  if (total == 0.0) return {0.0, true};
  return {inside / total, false};
}

const char* neuron_kind_name(NeuronKind kind) {
  switch (kind) {
    case NeuronKind::SpuriousOnly: return "spurious_only";
    case NeuronKind::CoreOnly: return "core_only";
    case NeuronKind::Mixed: return "mixed";
    default: return "inactive";
  }
}

NeuronReport classify_neuron(const TrainedModel& model,
                             std::span<const Sample> probe, size_t k,
                             const TaxonomyThresholds& thresholds) {
  if (probe.empty())
    fail(Errc::Probe, "classify_neuron: empty probe set");
  size_t n_patch = 0;
  for (const Sample& s : probe)
    if (s.group.spurious_flag) ++n_patch;
  if (n_patch == 0)
    fail(Errc::Probe,
         "classify_neuron: probe set has no patch-present samples");

  NeuronReport rep;
  rep.k = k;
  rep.w_erm = k < model.head.weights.size() ? model.head.weights[k] : 0.0;
  rep.w_dfr = std::numeric_limits<double>::quiet_NaN();

  double core_sum = 0.0;
  double spur_sum = 0.0;
  double mass_sum = 0.0;
  for (const Sample& s : probe) {
    const Heatmap m = neuron_map(model, s.image, k);
    double mass = 0.0;
    for (double v : m.values) mass += v > 0.0 ? v : 0.0;
    mass_sum += mass;
    core_sum += region_score(m, s.core_mask).score;
    if (s.group.spurious_flag)
      spur_sum += region_score(m, s.spurious_mask).score;
  }
  rep.core_score = core_sum / static_cast<double>(probe.size());
  rep.spurious_score = spur_sum / static_cast<double>(n_patch);
  rep.mean_activation_mass = mass_sum / static_cast<double>(probe.size());

  if (rep.mean_activation_mass < thresholds.eps_act) {
    rep.kind = NeuronKind::Inactive;
  } else if (rep.core_score >= thresholds.tau_hi &&
             rep.spurious_score <= thresholds.tau_lo) {
    rep.kind = NeuronKind::CoreOnly;
  } else if (rep.spurious_score >= thresholds.tau_hi &&
             rep.core_score <= thresholds.tau_lo) {
    rep.kind = NeuronKind::SpuriousOnly;
  } else {
    rep.kind = NeuronKind::Mixed;
  }
  return rep;
}

std::vector<NeuronReport> neuron_taxonomy(const TrainedModel& erm_model,
                                          const Head& dfr_head,
                                          std::span<const Sample> probe,
                                          const TaxonomyThresholds& thresholds) {
  const size_t d = erm_model.encoder.feature_dim();
  if (dfr_head.weights.size() != d)
    fail(Errc::ShapeMismatch, "neuron_taxonomy: head dimension mismatch");
  std::vector<NeuronReport> out;
  out.reserve(d);
  for (size_t k = 0; k < d; ++k) {
    NeuronReport rep = classify_neuron(erm_model, probe, k, thresholds);
    rep.w_dfr = dfr_head.weights[k];
    out.push_back(rep);
  }
  return out;
}

Heatmap weight_heatmap(const Head& head, size_t grid_w) {
  const size_t d = head.weights.size();
  if (grid_w == 0 || d % grid_w != 0)
    fail(Errc::InvalidArgument,
         "weight_heatmap: grid width " + std::to_string(grid_w) +
             " does not divide d=" + std::to_string(d));
  Heatmap m;
  m.w = grid_w;
  m.h = d / grid_w;
  m.space = MapSpace::Feature;
  m.values = head.weights;
  return m;
}

}  // namespace dfrlab
