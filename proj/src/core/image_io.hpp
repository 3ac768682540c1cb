#pragma once

#include <string>
#include <vector>

#include "core/interpret.hpp"
#include "core/tensor.hpp"

namespace dfrlab {

enum class HeatmapStyle { Gray, Diverging };

struct ExportInfo {
  // Constant (zero-range) maps export as all-zero gray / all-white
  // diverging pixels and are flagged.
  bool degenerate = false;
};

// Gray: binary PGM (P5, maxval 255) with per-image min-max scaling.
// Diverging: binary PPM (P6) through a blue-white-red palette symmetric
// around zero, scaled by max|v|; negating the map swaps the red and blue
// channels.
std::vector<unsigned char> encode_pgm(const Heatmap& map, ExportInfo* info);
std::vector<unsigned char> encode_ppm_diverging(const Heatmap& map,
                                                ExportInfo* info);

ExportInfo export_heatmap(const Heatmap& map, const std::string& path,
                          HeatmapStyle style);

// [0,1]-valued [C,H,W] image as PPM (3 channels) or PGM (1 channel).
void export_image(const Tensor& image, const std::string& path);

void write_bytes(const std::string& path,
                 const std::vector<unsigned char>& bytes);

}  // namespace dfrlab
