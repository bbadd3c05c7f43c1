#pragma once

#include "agrsst/density.hpp"
#include "agrsst/kde.hpp"
#include "agrsst/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace agrsst {

/// Number of units observed per area, in region-system order.
class AreaCounts {
public:
  AreaCounts() = default;
  explicit AreaCounts(std::vector<std::uint64_t> counts);

  std::size_t size() const { return counts_.size(); }
  std::uint64_t operator[](std::size_t d) const { return counts_[d]; }
  std::span<const std::uint64_t> values() const { return counts_; }
  std::uint64_t total() const { return total_; }

  friend bool operator==(const AreaCounts&, const AreaCounts&) = default;

private:
  std::vector<std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

/// Parses `area_id,count` CSV. Unknown ids are errors, missing areas count 0.
AreaCounts parse_counts(std::string_view csv, const RegionSystem& regions);
AreaCounts load_counts(const std::filesystem::path& path, const RegionSystem& regions);
std::string counts_to_csv(const AreaCounts& counts, const RegionSystem& regions);

/// Tallies grid indices per assigned area; indices outside the mask are
/// rejected.
AreaCounts aggregate(std::span<const std::size_t> grid_indices, const EvaluationGrid& grid);

struct ChainConfig {
  std::size_t burnin = 30;
  std::size_t keep = 20;
  double smoothing = 1e-10;  // c, added to the S-step weights inside each area
  double pilot_scale = 3.0;  // pilot bandwidth multiplier
  std::uint64_t seed = 0;
  std::vector<std::size_t> probes; // empty: pick high/median/low after iteration 1
  std::size_t threads = 1;

  std::size_t iterations() const { return burnin + keep; }
  void validate() const;
};

struct KdeFit {
  Bandwidth bandwidth;
  DensityField density;
};

/// Density at the probe points and the bandwidth, for the pilot (index 0)
/// and each of the iterations that follow.
struct ChainTrace {
  std::vector<std::size_t> probes;
  std::vector<std::vector<double>> values; // [iteration][probe]
  std::vector<Bandwidth> bandwidths;

  std::size_t length() const { return values.size(); }
  std::string to_csv() const;
};

struct GrsstResult {
  DensityField density;
  ChainTrace trace;
};

/// Uniform draws of c_d centroids inside each area, KDE with the reference
/// bandwidth times pilot_scale.
KdeFit pilot_estimate(const AreaCounts& counts, const GridPtr& grid, const ChainConfig& cfg, Rng& rng);

/// One stochastic step: c_d grid indices per area drawn with weight
/// prev + smoothing over the area's own grid points, concatenated in area order.
std::vector<std::size_t> s_step_indices(const DensityField& prev, const AreaCounts& counts,
                                        double smoothing, Rng& rng);
std::vector<GeoPoint> s_step(const DensityField& prev, const AreaCounts& counts, double smoothing,
                             Rng& rng);

KdeFit m_step(std::span<const GeoPoint> samples, const GridPtr& grid, std::size_t threads = 1);

GrsstResult run_grsst(const AreaCounts& counts, const RegionSystem& regions, const GridPtr& grid,
                      const ChainConfig& cfg);

} // namespace agrsst
