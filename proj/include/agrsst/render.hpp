#pragma once

#include "agrsst/raster.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace agrsst {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Five-stop sequential ramp at t = 0, 0.25, 0.5, 0.75, 1, linearly
/// interpolated per channel and rounded to the nearest integer.
inline constexpr std::array<Rgb, 5> kRampStops{{
    {0, 0, 4}, {87, 16, 110}, {188, 55, 84}, {249, 142, 9}, {252, 255, 164}}};
inline constexpr Rgb kNodataColor{128, 128, 128};

enum class RampScale { Linear, PseudoLog };

/// t is clamped to [0, 1].
Rgb ramp_color(double t);

/// Position of v on the ramp given the data range [lo, hi]. Linear:
/// (v - lo) / (hi - lo). PseudoLog: log1p(u / s) / log1p(r / s) with
/// u = v - lo, r = hi - lo and s = 1e-3 r. A flat range maps to 0.
double ramp_position(double v, double lo, double hi, RampScale scale);

struct Image {
  std::size_t width = 0, height = 0;
  std::vector<Rgb> pixels; // row-major, top row first
};

/// One pixel per raster cell, range taken over the non-nodata cells.
Image render_raster(const RasterLayer& layer, RampScale scale);

/// Binary PPM (P6, maxval 255).
std::string encode_ppm(const Image& image);

} // namespace agrsst
