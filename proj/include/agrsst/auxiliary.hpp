#pragma once

#include "agrsst/density.hpp"
#include "agrsst/grsst.hpp"
#include "agrsst/raster.hpp"
#include "agrsst/rng.hpp"

#include <span>
#include <string>
#include <vector>

namespace agrsst {

/// Cellwise (nir - red) / (nir + red). Nodata where either input is nodata or
/// the denominator is zero. Throws GridMismatch on differing georeferencing.
RasterLayer ndvi(const RasterLayer& nir, const RasterLayer& red);

/// Cellwise mean over the non-nodata values of identically georeferenced
/// rasters; nodata where every input is nodata.
RasterLayer cellwise_mean(std::span<const RasterLayer> layers);

struct GridWeights {
  std::vector<double> weights; // one per grid point, sums to 1 over the mask
  std::size_t uncovered = 0;   // in-mask points without a data cell
  std::vector<std::string> warnings;
};

/// Raster value of the cell under each in-mask centroid, negatives clamped
/// to 0, normalized to sum 1. Throws AllZeroWeights if nothing is left.
GridWeights raster_to_grid_weights(const RasterLayer& raster, const EvaluationGrid& grid);

/// Weighted draw of `sample_size` centroids from the raster weights followed
/// by a reference-bandwidth KDE.
DensityField aux_density_from_raster(const RasterLayer& raster, const GridPtr& grid,
                                     std::size_t sample_size, Rng& rng, std::size_t threads = 1);

/// GRSST on a finer region system, returned on `grid`. The fine system is
/// laid onto the same lattice as `grid`.
DensityField aux_density_from_aggregates(const AreaCounts& fine_counts, const RegionSystem& fine_regions,
                                         const GridPtr& grid, const ChainConfig& cfg);

/// Same, with the fine system already laid onto the lattice of `grid`.
DensityField aux_density_from_aggregates(const AreaCounts& fine_counts, const RegionSystem& fine_regions,
                                         const GridPtr& fine_grid, const GridPtr& grid,
                                         const ChainConfig& cfg);

} // namespace agrsst
