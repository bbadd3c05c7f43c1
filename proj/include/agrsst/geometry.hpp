#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace agrsst {

/// Planar map coordinate (projected CRS, map units).
struct GeoPoint {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

struct BoundingBox {
  double xmin = 0.0, ymin = 0.0, xmax = 0.0, ymax = 0.0;

  double width() const { return xmax - xmin; }
  double height() const { return ymax - ymin; }
  bool contains(GeoPoint p) const {
    return p.x >= xmin && p.x <= xmax && p.y >= ymin && p.y <= ymax;
  }
  void extend(const BoundingBox& other);
};

using Ring = std::vector<GeoPoint>;

/// One polygon: an exterior ring plus optional holes. Rings are stored open
/// (the closing vertex of GeoJSON is dropped).
struct Polygon {
  Ring exterior;
  std::vector<Ring> holes;
};

struct Area {
  std::string id;
  std::vector<Polygon> parts;
  double size = 0.0;
  BoundingBox bounds;
};

/// Signed shoelace area; positive for counter-clockwise rings.
double signed_ring_area(std::span<const GeoPoint> ring);

/// |exterior| minus |holes|, summed over parts.
double planar_area(std::span<const Polygon> parts);

enum class PointClass { Outside, Inside, Boundary };

/// Even-odd classification against every ring of the area. Points lying on a
/// ring edge report Boundary.
PointClass classify(const Area& area, GeoPoint p);

/// Index value returned for points that fall in no area.
inline constexpr int kOutside = -1;

/// Ordered, interior-disjoint set of polygonal areas.
class RegionSystem {
public:
  RegionSystem() = default;
  /// Validates ids and polygons and computes sizes and bounds.
  explicit RegionSystem(std::vector<Area> areas);

  std::size_t size() const { return areas_.size(); }
  const Area& operator[](std::size_t d) const { return areas_[d]; }
  const std::vector<Area>& areas() const { return areas_; }
  const BoundingBox& bounds() const { return bounds_; }
  std::optional<std::size_t> find(std::string_view id) const;

private:
  std::vector<Area> areas_;
  BoundingBox bounds_;
};

/// Parses a GeoJSON FeatureCollection of Polygon/MultiPolygon features.
RegionSystem parse_regions(std::string_view geojson, std::string_view id_property = "id");
RegionSystem load_regions(const std::filesystem::path& path, std::string_view id_property = "id");

/// Serializes a region system back to GeoJSON (used by tools and tests).
std::string regions_to_geojson(const RegionSystem& regions, std::string_view id_property = "id");

/// nx by ny equal rectangles tiling `box`, listed row by row from the
/// lower-left corner, with ids "<prefix><row>_<col>".
RegionSystem rectangular_partition(const BoundingBox& box, std::size_t nx, std::size_t ny,
                                   std::string_view prefix = "");

/// Samples interior points of every area and checks that no other area
/// claims them. Cheap smoke check, not a topology proof.
bool interiors_disjoint(const RegionSystem& regions, std::size_t samples_per_area = 32);

/// Index of the first area (in list order) whose closed geometry holds p.
int locate(GeoPoint p, const RegionSystem& regions);

/// Regular lattice of square pixels; cell (r, c) has its lower-left corner at
/// origin + (c, r) * delta. Row 0 is the southernmost row.
struct Lattice {
  GeoPoint origin;
  double delta = 1.0;
  std::size_t ncols = 0;
  std::size_t nrows = 0;

  std::size_t size() const { return ncols * nrows; }
  std::size_t index(std::size_t row, std::size_t col) const { return row * ncols + col; }
  std::size_t row(std::size_t j) const { return j / ncols; }
  std::size_t col(std::size_t j) const { return j % ncols; }
  GeoPoint centroid(std::size_t j) const {
    return {origin.x + (static_cast<double>(col(j)) + 0.5) * delta,
            origin.y + (static_cast<double>(row(j)) + 0.5) * delta};
  }
  double cell_area() const { return delta * delta; }

  friend bool operator==(const Lattice&, const Lattice&) = default;
};

/// Evaluation grid: a lattice plus the assignment of every centroid to an
/// area of one region system.
class EvaluationGrid {
public:
  EvaluationGrid() = default;

  /// Assigns the centroids of an existing lattice to `regions`. Throws
  /// EmptyAreaAtResolution if an area holds no centroid in its interior.
  EvaluationGrid(const Lattice& lattice, const RegionSystem& regions);

  const Lattice& lattice() const { return lattice_; }
  std::size_t size() const { return assignment_.size(); }
  std::size_t area_count() const { return members_.size(); }
  GeoPoint centroid(std::size_t j) const { return lattice_.centroid(j); }
  int assignment(std::size_t j) const { return assignment_[j]; }
  bool in_mask(std::size_t j) const { return assignment_[j] != kOutside; }
  std::span<const int> assignments() const { return assignment_; }
  /// Grid indices assigned to area d, ascending.
  std::span<const std::size_t> members(std::size_t d) const { return members_[d]; }
  /// All in-mask grid indices, ascending.
  std::span<const std::size_t> mask() const { return mask_; }
  std::size_t mask_count() const { return mask_.size(); }
  /// Bounding box of the region system the grid was built from.
  const BoundingBox& region_bounds() const { return region_bounds_; }

  /// Same lattice and same mask.
  bool compatible(const EvaluationGrid& other) const;

  /// Snaps p to the lattice index of the pixel containing it, or nullopt if
  /// p lies outside the lattice.
  std::optional<std::size_t> cell_of(GeoPoint p) const;

private:
  Lattice lattice_;
  std::vector<int> assignment_;
  std::vector<std::vector<std::size_t>> members_;
  std::vector<std::size_t> mask_;
  BoundingBox region_bounds_;
};

/// Lattice over the bounding box of `regions` grown by one delta on each side.
Lattice covering_lattice(const RegionSystem& regions, double delta);

EvaluationGrid build_grid(const RegionSystem& regions, double delta);

} // namespace agrsst
