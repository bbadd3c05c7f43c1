#pragma once

#include "agrsst/augment.hpp"
#include "agrsst/density.hpp"
#include "agrsst/grsst.hpp"
#include "agrsst/rng.hpp"

#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

namespace agrsst {

struct MixtureComponent {
  GeoPoint center;
  double sigma_x = 1.0;
  double sigma_y = 1.0;
  double weight = 1.0;
};

/// Gaussian mixture with diagonal covariances.
struct MixtureSpec {
  std::vector<MixtureComponent> components;

  void validate() const;
};

/// K centers drawn without replacement from the in-mask centroids; each
/// sigma drawn uniformly from [sigma_lo, sigma_hi] times the diagonal of the
/// region bounding box; equal weights 1/K.
MixtureSpec draw_mixture(const EvaluationGrid& grid, std::size_t k, Rng& rng, double sigma_lo = 0.01,
                         double sigma_hi = 0.05);

/// Mixture density at every centroid, renormalized over the mask.
DensityField eval_mixture(const MixtureSpec& spec, const GridPtr& grid);

struct Population {
  std::vector<std::size_t> cells; // grid index of every unit
  AreaCounts counts;              // per area of the field's grid

  std::vector<GeoPoint> points(const EvaluationGrid& grid) const;
};

/// n centroids drawn with the truth as weight (in-mask only), aggregated to
/// the areas of the truth's grid.
Population sample_population(const DensityField& truth, std::size_t n, Rng& rng);

/// Mean truth density per fine area (`fine_grid` shares the truth's lattice).
AreaMeans municipal_means(const DensityField& truth, const EvaluationGrid& fine_grid);

/// Adds N(0, (d * mu_p / sum mu)^2) noise per area and clamps at zero.
/// d == 0 returns the input unchanged.
AreaMeans distort_means(std::span<const double> means, double d, Rng& rng);

/// Per-grid-point sampling weight equal to the mean of the fine area the
/// point belongs to (0 outside the fine system).
std::vector<double> municipal_weights(std::span<const double> means, const EvaluationGrid& fine_grid);

/// sqrt(mean over the mask of (est - truth)^2).
double rmise(const DensityField& est, const DensityField& truth);
/// Same with the pixel area inside the root: sqrt(mean((est - truth)^2) * delta^2).
double rmise_pixel_weighted(const DensityField& est, const DensityField& truth);
/// Value-level form used by both accessors.
double rmise_values(std::span<const double> est, std::span<const double> truth,
                    std::span<const std::size_t> mask);

enum class Estimator { Grsst, Aux, Agrsst, Agrsst1 };
std::string_view estimator_name(Estimator e);
Estimator estimator_from_name(std::string_view name);

/// Synthetic rectangular map or a pair of region files.
struct MapSpec {
  double width = 10.0;
  double height = 10.0;
  std::size_t coarse_nx = 4, coarse_ny = 4;
  std::size_t fine_nx = 8, fine_ny = 8;
  std::string coarse_path; // GeoJSON; when set, overrides the synthetic map
  std::string fine_path;
  std::string id_property = "id";
};

struct SimulationConfig {
  std::size_t runs = 400;
  std::size_t population = 250000;
  std::size_t aux_sample_size = 0; // 0: same as population
  std::size_t components = 80;
  double sigma_lo = 0.01;
  double sigma_hi = 0.05;
  std::vector<double> distortions{0.0, 0.5, 1.0, 2.5, 5.0, 10.0, 15.0, 20.0};
  std::vector<Estimator> estimators{Estimator::Grsst, Estimator::Aux, Estimator::Agrsst, Estimator::Agrsst1};
  ChainConfig chain;
  double cellsize = 0.125;
  std::uint64_t seed = 1;
  std::size_t threads = 1; // run-level workers; 0 = default_threads()
  bool timing = false;     // fill the seconds column
  MapSpec map;

  void validate() const;
};

/// Named presets: "paper-bavaria", "desk-small", "desk-acceptance".
SimulationConfig simulation_preset(std::string_view name);
/// Preset (optional "preset" key) overlaid with the JSON fields. Parse errors
/// report the byte position.
SimulationConfig parse_simulation_config(std::string_view json_text);
std::string simulation_config_to_json(const SimulationConfig& cfg);

struct SimulationRecord {
  std::size_t run = 0; // 1-based
  double distortion = 0.0;
  Estimator estimator = Estimator::Grsst;
  double rmise = 0.0;
  double gamma_hat = std::numeric_limits<double>::quiet_NaN();
  double seconds = std::numeric_limits<double>::quiet_NaN();
};

struct SimulationResult {
  std::vector<SimulationRecord> records; // ordered by (run, distortion, estimator)

  /// Header `run,distortion,estimator,rmise,gamma_hat,seconds`.
  std::string to_csv() const;
};

struct SimulationMaps {
  RegionSystem coarse;
  RegionSystem fine;
  GridPtr grid;      // lattice assigned to the coarse system
  GridPtr fine_grid; // same lattice, fine system
};

SimulationMaps build_simulation_maps(const SimulationConfig& cfg);

/// Monte-Carlo protocol. Every (run, distortion) pair draws from its own
/// substream so records do not depend on the worker count.
SimulationResult run_monte_carlo(const SimulationConfig& cfg, const SimulationMaps& maps);

/// One run of the protocol, exposed for tests and bindings.
std::vector<SimulationRecord> run_single(const SimulationConfig& cfg, const SimulationMaps& maps,
                                         std::size_t run);

} // namespace agrsst
