#include "agrsst/render.hpp"

#include <doctest.h>

#include <cmath>

using namespace agrsst;

namespace {

RasterLayer cells(std::size_t ncols, std::size_t nrows, std::vector<double> v) {
  RasterLayer l;
  l.ncols = ncols;
  l.nrows = nrows;
  l.cells = std::move(v);
  return l;
}

double luma(Rgb c) { return 0.299 * c.r + 0.587 * c.g + 0.114 * c.b; }

} // namespace

TEST_CASE("ramp table") {
  for (std::size_t k = 0; k < 5; ++k) CHECK(ramp_color(0.25 * static_cast<double>(k)) == kRampStops[k]);
  // Halfway between the first two stops: (43.5, 8, 57) rounds half away from zero.
  CHECK(ramp_color(0.125) == Rgb{44, 8, 57});
  CHECK(ramp_color(-1.0) == kRampStops[0]);
  CHECK(ramp_color(2.0) == kRampStops[4]);
}

TEST_CASE("2x2 fixture renders to the documented ramp stops") {
  const auto img = render_raster(cells(2, 2, {0, 1, 2, 4}), RampScale::Linear);
  REQUIRE(img.pixels.size() == 4);
  CHECK(img.pixels[0] == Rgb{0, 0, 4});
  CHECK(img.pixels[1] == Rgb{87, 16, 110});
  CHECK(img.pixels[2] == Rgb{188, 55, 84});
  CHECK(img.pixels[3] == Rgb{252, 255, 164});
  const std::string ppm = encode_ppm(img);
  CHECK(ppm.substr(0, 11) == "P6\n2 2\n255\n");
  CHECK(ppm.size() == 11 + 12);
  CHECK(static_cast<unsigned char>(ppm[11 + 3]) == 87);
}

TEST_CASE("pseudo-log position") {
  // log1p(u / 1e-3) / log1p(1000) = 1/2 at u = 1e-3 (sqrt(1001) - 1).
  const double u = 1e-3 * (std::sqrt(1001.0) - 1.0);
  CHECK(ramp_position(u, 0.0, 1.0, RampScale::PseudoLog) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(ramp_color(ramp_position(u, 0.0, 1.0, RampScale::PseudoLog)) == kRampStops[2]);
  CHECK(ramp_position(1.0, 0.0, 1.0, RampScale::PseudoLog) == 1.0);
  CHECK(ramp_position(0.0, 0.0, 1.0, RampScale::PseudoLog) == 0.0);
  CHECK(ramp_position(0.1, 0.0, 1.0, RampScale::PseudoLog) > ramp_position(0.1, 0.0, 1.0, RampScale::Linear));
}

TEST_CASE("constant field gives a constant image") {
  const auto img = render_raster(cells(3, 2, std::vector<double>(6, 0.7)), RampScale::Linear);
  for (const auto& p : img.pixels) CHECK(p == img.pixels[0]);
  const auto logimg = render_raster(cells(3, 2, std::vector<double>(6, 0.7)), RampScale::PseudoLog);
  for (const auto& p : logimg.pixels) CHECK(p == logimg.pixels[0]);
}

TEST_CASE("monotone field gives monotone luminance") {
  std::vector<double> v(16);
  for (std::size_t i = 0; i < 16; ++i) v[i] = 0.5 * static_cast<double>(i * i) + 0.01;
  for (auto scale : {RampScale::Linear, RampScale::PseudoLog}) {
    const auto img = render_raster(cells(16, 1, v), scale);
    for (std::size_t i = 1; i < 16; ++i) CHECK(luma(img.pixels[i]) > luma(img.pixels[i - 1]));
  }
}

TEST_CASE("nodata renders gray and does not enter the range") {
  const auto img = render_raster(cells(3, 1, {-9999, 1, 3}), RampScale::Linear);
  CHECK(img.pixels[0] == kNodataColor);
  CHECK(img.pixels[1] == kRampStops[0]);
  CHECK(img.pixels[2] == kRampStops[4]);
}
