#include "agrsst/auxiliary.hpp"

#include "agrsst/error.hpp"
#include "agrsst/kde.hpp"

#include <cmath>

namespace agrsst {

RasterLayer ndvi(const RasterLayer& nir, const RasterLayer& red) {
  if (!nir.same_georef(red))
    throw Error(ErrorKind::GridMismatch, "NIR and RED rasters are not identically georeferenced");
  RasterLayer out = nir;
  out.nodata = -9999.0;
  for (std::size_t i = 0; i < out.cells.size(); ++i) {
    const double n = nir.cells[i], r = red.cells[i];
    const double sum = n + r;
    if (nir.is_nodata(n) || red.is_nodata(r) || sum == 0.0) {
      out.cells[i] = out.nodata;
    } else {
      out.cells[i] = (n - r) / sum;
    }
  }
  return out;
}

RasterLayer cellwise_mean(std::span<const RasterLayer> layers) {
  if (layers.empty()) throw Error(ErrorKind::InvalidInput, "no rasters to average");
  RasterLayer out = layers.front();
  for (const auto& layer : layers) {
    if (!layer.same_georef(out))
      throw Error(ErrorKind::GridMismatch, "rasters to average are not identically georeferenced");
  }
  out.nodata = -9999.0;
  for (std::size_t i = 0; i < out.cells.size(); ++i) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& layer : layers) {
      const double v = layer.cells[i];
      if (layer.is_nodata(v)) continue;
      sum += v;
      ++n;
    }
    out.cells[i] = n == 0 ? out.nodata : sum / static_cast<double>(n);
  }
  return out;
}

GridWeights raster_to_grid_weights(const RasterLayer& raster, const EvaluationGrid& grid) {
  GridWeights result;
  std::size_t covered = 0;
  result.weights = sample_raster_on_grid(raster, grid, &covered);
  result.uncovered = grid.mask_count() - covered;
  if (result.uncovered > 0) {
    result.warnings.push_back(std::to_string(result.uncovered) +
                              " grid points fall outside the raster or on nodata cells");
  }
  double total = 0.0;
  for (double w : result.weights) total += w;
  if (!(total > 0.0)) throw Error(ErrorKind::AllZeroWeights, "raster yields no positive weight on the grid");
  for (double& w : result.weights) w /= total;
  return result;
}

DensityField aux_density_from_raster(const RasterLayer& raster, const GridPtr& grid,
                                     std::size_t sample_size, Rng& rng, std::size_t threads) {
  if (sample_size < 2) throw Error(ErrorKind::InvalidInput, "auxiliary sample size must be at least 2");
  const auto weights = raster_to_grid_weights(raster, *grid);
  const auto points = weighted_sample_grid(weights.weights, sample_size, *grid, rng);
  const Bandwidth bw = select_bandwidth(points);
  return evaluate_kde(points, bw, grid, {.threads = threads});
}

DensityField aux_density_from_aggregates(const AreaCounts& fine_counts, const RegionSystem& fine_regions,
                                         const GridPtr& grid, const ChainConfig& cfg) {
  return aux_density_from_aggregates(fine_counts, fine_regions,
                                     share(EvaluationGrid(grid->lattice(), fine_regions)), grid, cfg);
}

DensityField aux_density_from_aggregates(const AreaCounts& fine_counts, const RegionSystem& fine_regions,
                                         const GridPtr& fine_grid, const GridPtr& grid,
                                         const ChainConfig& cfg) {
  if (!(fine_grid->lattice() == grid->lattice()))
    throw Error(ErrorKind::GridMismatch, "fine grid does not share the analysis lattice");
  auto result = run_grsst(fine_counts, fine_regions, fine_grid, cfg);
  std::vector<double> values(result.density.values().begin(), result.density.values().end());
  const auto mode = fine_grid->compatible(*grid) ? DensityField::Normalize::Verify
                                                 : DensityField::Normalize::Rescale;
  return DensityField(grid, std::move(values), mode);
}

} // namespace agrsst
