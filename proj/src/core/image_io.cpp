#include "core/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "core/error.hpp"

namespace dfrlab {

namespace {

void require_input_space(const Heatmap& map, const char* who) {
  if (map.space != MapSpace::Input)
    fail(Errc::InvalidArgument,
         std::string(who) + ": expected an input-space map");
  if (map.h == 0 || map.w == 0)
    fail(Errc::InvalidArgument, std::string(who) + ": empty map");
}

void append_header(std::vector<unsigned char>& out, const char* magic,
                   size_t w, size_t h) {
  const std::string header = std::string(magic) + "\n" + std::to_string(w) +
                             " " + std::to_string(h) + "\n255\n";
  out.insert(out.end(), header.begin(), header.end());
}

unsigned char to_byte(double unit) {
  const double v = std::min(1.0, std::max(0.0, unit));
  return static_cast<unsigned char>(std::lround(v * 255.0));
}

}  // namespace

std::vector<unsigned char> encode_pgm(const Heatmap& map, ExportInfo* info) {
  require_input_space(map, "encode_pgm");
  const auto [mn_it, mx_it] =
      std::minmax_element(map.values.begin(), map.values.end());
  const double mn = *mn_it;
  const double range = *mx_it - mn;

  std::vector<unsigned char> out;
  append_header(out, "P5", map.w, map.h);
  if (range == 0.0) {
    if (info) info->degenerate = true;
    out.insert(out.end(), map.values.size(), 0);
    return out;
  }
  if (info) info->degenerate = false;
  for (double v : map.values) out.push_back(to_byte((v - mn) / range));
  return out;
}

std::vector<unsigned char> encode_ppm_diverging(const Heatmap& map,
                                                ExportInfo* info) {
  require_input_space(map, "encode_ppm_diverging");
  double amax = 0.0;
  for (double v : map.values) amax = std::max(amax, std::abs(v));

  std::vector<unsigned char> out;
  append_header(out, "P6", map.w, map.h);
  if (amax == 0.0) {
    if (info) info->degenerate = true;
    out.insert(out.end(), map.values.size() * 3, 255);
    return out;
  }
  if (info) info->degenerate = false;
  for (double v : map.values) {
    const double t = v / amax;  // [-1, 1]
    unsigned char r, g, b;
    if (t >= 0.0) {
      r = 255;
      g = b = to_byte(1.0 - t);
    } else {
      b = 255;
      r = g = to_byte(1.0 + t);
    }
    out.push_back(r);
    out.push_back(g);
    out.push_back(b);
  }
  return out;
}

ExportInfo export_heatmap(const Heatmap& map, const std::string& path,
                          HeatmapStyle style) {
  ExportInfo info;
  const auto bytes = style == HeatmapStyle::Gray
                         ? encode_pgm(map, &info)
                         : encode_ppm_diverging(map, &info);
  write_bytes(path, bytes);
  return info;
}

void export_image(const Tensor& image, const std::string& path) {
  if (image.rank() != 3)
    fail(Errc::InvalidArgument, "export_image: expected a [C,H,W] tensor");
  const size_t c = image.shape()[0];
  const size_t h = image.shape()[1];
  const size_t w = image.shape()[2];
  std::vector<unsigned char> out;
  if (c == 1) {
    append_header(out, "P5", w, h);
    for (size_t i = 0; i < h * w; ++i) out.push_back(to_byte(image[i]));
  } else if (c == 3) {
    append_header(out, "P6", w, h);
    for (size_t y = 0; y < h; ++y)
      for (size_t x = 0; x < w; ++x)
        for (size_t ch = 0; ch < 3; ++ch)
          out.push_back(to_byte(image(ch, y, x)));
  } else {
    fail(Errc::InvalidArgument,
         "export_image: supported channel counts are 1 and 3, got " +
             std::to_string(c));
  }
  write_bytes(path, out);
}

void write_bytes(const std::string& path,
                 const std::vector<unsigned char>& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(Errc::Io, "cannot open '" + path + "' for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) fail(Errc::Io, "write to '" + path + "' failed");
}

}  // namespace dfrlab
