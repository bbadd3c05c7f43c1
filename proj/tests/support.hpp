#pragma once

#include "agrsst/geometry.hpp"
#include "agrsst/rng.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace agrsst::test {

inline Polygon rect(double x0, double y0, double x1, double y1) {
  return {{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}, {}};
}

inline Area rect_area(std::string id, double x0, double y0, double x1, double y1) {
  return {std::move(id), {rect(x0, y0, x1, y1)}, 0.0, {}};
}

inline RegionSystem unit_square() { return RegionSystem({rect_area("A", 0, 0, 1, 1)}); }

inline RegionSystem twin_squares() {
  return RegionSystem({rect_area("L", 0, 0, 1, 1), rect_area("R", 1, 0, 2, 1)});
}

inline constexpr const char* kTwinSquaresGeoJson = R"({
  "type": "FeatureCollection",
  "features": [
    {"type": "Feature", "properties": {"id": "L"},
     "geometry": {"type": "Polygon", "coordinates": [[[0,0],[1,0],[1,1],[0,1],[0,0]]]}},
    {"type": "Feature", "properties": {"id": "R"},
     "geometry": {"type": "Polygon", "coordinates": [[[1,0],[2,0],[2,1],[1,1],[1,0]]]}}
  ]
})";

/// Direct double-loop product-Gaussian KDE, unnormalized.
inline std::vector<double> brute_kde(std::span<const GeoPoint> pts, double hx, double hy, const Lattice& lat) {
  std::vector<double> out(lat.size(), 0.0);
  const double k = 1.0 / (2.0 * std::numbers::pi * static_cast<double>(pts.size()) * hx * hy);
  for (std::size_t j = 0; j < lat.size(); ++j) {
    const GeoPoint g = lat.centroid(j);
    double s = 0.0;
    for (const auto& p : pts) {
      const double u = (g.x - p.x) / hx, v = (g.y - p.y) / hy;
      s += std::exp(-0.5 * (u * u + v * v));
    }
    out[j] = k * s;
  }
  return out;
}

inline double rel_sup_diff(std::span<const double> a, std::span<const double> b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, std::abs(a[i] - b[i]));
    den = std::max(den, std::abs(b[i]));
  }
  return num / den;
}

/// Upper-tail p-value of Pearson's chi-square statistic.
inline double chi_square_p(std::span<const std::size_t> observed, std::span<const double> probs) {
  double total = 0.0;
  for (auto o : observed) total += static_cast<double>(o);
  double stat = 0.0;
  std::size_t cells = 0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    const double e = total * probs[i];
    stat += (static_cast<double>(observed[i]) - e) * (static_cast<double>(observed[i]) - e) / e;
    ++cells;
  }
  const boost::math::chi_squared dist(static_cast<double>(cells - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

class TempDir {
public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("agrsst_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  std::string write(const std::string& name, const std::string& text) const {
    std::ofstream(path_ / name, std::ios::binary) << text;
    return file(name);
  }

private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace agrsst::test
