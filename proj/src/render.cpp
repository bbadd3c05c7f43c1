#include "agrsst/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace agrsst {

Rgb ramp_color(double t) {
  if (!(t > 0.0)) return kRampStops.front();
  if (t >= 1.0) return kRampStops.back();
  const double pos = t * static_cast<double>(kRampStops.size() - 1);
  const auto seg = static_cast<std::size_t>(pos);
  const double f = pos - static_cast<double>(seg);
  const Rgb& a = kRampStops[seg];
  const Rgb& b = kRampStops[seg + 1];
  auto mix = [f](std::uint8_t x, std::uint8_t y) {
    return static_cast<std::uint8_t>(std::lround(x + f * (static_cast<double>(y) - x)));
  };
  return {mix(a.r, b.r), mix(a.g, b.g), mix(a.b, b.b)};
}

double ramp_position(double v, double lo, double hi, RampScale scale) {
  const double range = hi - lo;
  if (!(range > 0.0)) return 0.0;
  const double u = std::clamp(v - lo, 0.0, range);
  if (scale == RampScale::Linear) return u / range;
  const double s = 1e-3 * range;
  return std::log1p(u / s) / std::log1p(range / s);
}

Image render_raster(const RasterLayer& layer, RampScale scale) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : layer.cells) {
    if (layer.is_nodata(v)) continue;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  Image img{layer.ncols, layer.nrows, {}};
  img.pixels.reserve(layer.cells.size());
  for (double v : layer.cells) {
    img.pixels.push_back(layer.is_nodata(v) ? kNodataColor : ramp_color(ramp_position(v, lo, hi, scale)));
  }
  return img;
}

std::string encode_ppm(const Image& image) {
  std::string out = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  out.reserve(out.size() + 3 * image.pixels.size());
  for (const Rgb& p : image.pixels) {
    out += static_cast<char>(p.r);
    out += static_cast<char>(p.g);
    out += static_cast<char>(p.b);
  }
  return out;
}

} // namespace agrsst
