#pragma once

#include "agrsst/density.hpp"
#include "agrsst/grsst.hpp"
#include "agrsst/kde.hpp"
#include "agrsst/rng.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace agrsst {

/// One representative value per area.
using AreaMeans = std::vector<double>;

/// Mean of the field over the grid points assigned to each area of `grid`.
/// `grid` may carry a different region system than the field, as long as the
/// lattice is the same.
AreaMeans area_mean_density(const DensityField& field, const EvaluationGrid& grid);
inline AreaMeans area_mean_density(const DensityField& field) {
  return area_mean_density(field, field.grid());
}

/// Counts divided by the planar area size: c_d / size(A_d).
AreaMeans grsst_input_means(const AreaCounts& counts, const RegionSystem& regions);

/// Pearson correlation. Throws DegenerateCorrelation for fewer than 3 areas
/// or a constant vector.
double correlation_weight(std::span<const double> m_aux, std::span<const double> m_grsst);

/// (max - v), renormalized. Throws ConstantField when the field is flat over
/// the mask.
DensityField invert_density(const DensityField& field);

/// gamma * aux + (1 - gamma) * grsst, pointwise.
DensityField convex_combine(double gamma, const DensityField& aux, const DensityField& grsst);

/// Full-grid sampling weights used for benchmarking: temp restricted to the
/// areas with a positive count, no smoothing constant. An area whose temp
/// values are all zero falls back to uniform weights and adds a warning.
std::vector<double> benchmark_weights(const DensityField& temp, const AreaCounts& counts,
                                      std::vector<std::string>* warnings = nullptr);

struct BenchmarkResult {
  DensityField density;
  Bandwidth bandwidth;
  std::vector<double> weights;
  std::vector<std::size_t> draws; // grid indices, area by area
  std::vector<std::string> warnings;
};

/// Draws exactly c_d centroids per area from temp and fits a KDE on the pool.
BenchmarkResult benchmark_sample(const DensityField& temp, const AreaCounts& counts, Rng& rng,
                                 std::size_t threads = 1);

enum class FusionMode { Agrsst, Agrsst1 };

struct FusionReport {
  double gamma_hat = std::numeric_limits<double>::quiet_NaN();
  bool inverted = false;
  double weight_used = 0.0;
  FusionMode mode = FusionMode::Agrsst;
  std::vector<std::string> warnings;

  /// Flat key=value block.
  std::string to_text() const;
};

struct FusionOptions {
  /// Overrides the correlation-derived weight (gamma is still reported).
  std::optional<double> forced_weight;
  std::size_t threads = 1;
};

struct FusionResult {
  DensityField density;
  FusionReport report;
  std::vector<double> sampling_weights;
  std::vector<std::size_t> draws;
};

FusionResult run_agrsst(const DensityField& grsst, const DensityField& aux, const AreaCounts& counts,
                        const RegionSystem& regions, Rng& rng, const FusionOptions& options = {});

FusionResult run_agrsst1(const DensityField& aux, const AreaCounts& counts, const RegionSystem& regions,
                         Rng& rng, const FusionOptions& options = {});

} // namespace agrsst
