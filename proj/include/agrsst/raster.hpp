#pragma once

#include "agrsst/density.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace agrsst {

/// Georeferenced cell grid as stored in an ESRI ASCII file. Cells are
/// row-major with the northernmost row first.
struct RasterLayer {
  std::size_t ncols = 0;
  std::size_t nrows = 0;
  double xllcorner = 0.0;
  double yllcorner = 0.0;
  double cellsize = 1.0;
  double nodata = -9999.0;
  std::vector<double> cells;

  double at(std::size_t row, std::size_t col) const { return cells[row * ncols + col]; }
  bool is_nodata(double v) const { return v == nodata; }
  bool same_georef(const RasterLayer& other) const;
  /// Cell holding p (row counted from the top), or nullopt outside the extent.
  std::optional<std::size_t> cell_at(GeoPoint p) const;
};

/// ESRI ASCII grid parser. Accepts either-case keys, xllcenter/yllcenter and
/// a missing NODATA_value (defaults to -9999). Errors carry line numbers.
RasterLayer parse_raster(std::string_view text);
RasterLayer load_raster(const std::filesystem::path& path);

/// Canonical writer: lower-case keys, shortest round-trip number formatting.
std::string format_raster(const RasterLayer& layer);
void write_raster(const std::filesystem::path& path, const RasterLayer& layer);

/// Lays a density out as a raster over its lattice; out-of-mask cells become
/// nodata.
RasterLayer density_to_raster(const DensityField& field, double nodata = -9999.0);

/// Nearest-cell lookup of raster values at the grid centroids, restricted to
/// the mask. Nodata, uncovered and negative values become 0. `covered`
/// receives the number of in-mask points that hit a data cell.
std::vector<double> sample_raster_on_grid(const RasterLayer& raster, const EvaluationGrid& grid,
                                          std::size_t* covered = nullptr);

} // namespace agrsst
