#include "agrsst/geometry.hpp"

#include "agrsst/error.hpp"
#include "agrsst/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_set>

namespace agrsst {

using nlohmann::json;

void BoundingBox::extend(const BoundingBox& other) {
  xmin = std::min(xmin, other.xmin);
  ymin = std::min(ymin, other.ymin);
  xmax = std::max(xmax, other.xmax);
  ymax = std::max(ymax, other.ymax);
}

double signed_ring_area(std::span<const GeoPoint> ring) {
  const std::size_t n = ring.size();
  if (n < 3) return 0.0;
  // Shift to the first vertex to limit cancellation for large coordinates.
  const GeoPoint o = ring[0];
  double twice = 0.0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double ax = ring[i].x - o.x, ay = ring[i].y - o.y;
    const double bx = ring[i + 1].x - o.x, by = ring[i + 1].y - o.y;
    twice += ax * by - bx * ay;
  }
  return 0.5 * twice;
}

double planar_area(std::span<const Polygon> parts) {
  double total = 0.0;
  for (const auto& part : parts) {
    total += std::abs(signed_ring_area(part.exterior));
    for (const auto& hole : part.holes) total -= std::abs(signed_ring_area(hole));
  }
  return total;
}

namespace {

bool on_segment(GeoPoint p, GeoPoint a, GeoPoint b) {
  const double scale = 1.0 + std::max({std::abs(a.x), std::abs(a.y), std::abs(b.x), std::abs(b.y)});
  const double tol = 1e-12 * scale;
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len = std::hypot(dx, dy);
  const double cross = dx * (p.y - a.y) - dy * (p.x - a.x);
  if (std::abs(cross) > tol * std::max(len, 1.0)) return false;
  const double dot = (p.x - a.x) * dx + (p.y - a.y) * dy;
  return dot >= -tol * len && dot <= len * len + tol * len;
}

// Returns true if p is on the ring; otherwise toggles `inside` per crossing.
bool scan_ring(const Ring& ring, GeoPoint p, bool& inside) {
  const std::size_t n = ring.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const GeoPoint a = ring[i], b = ring[j];
    if (on_segment(p, a, b)) return true;
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x_cross = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
      if (p.x < x_cross) inside = !inside;
    }
  }
  return false;
}

BoundingBox ring_bounds(const Ring& ring) {
  BoundingBox box{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
                  -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const auto& p : ring) {
    box.xmin = std::min(box.xmin, p.x);
    box.ymin = std::min(box.ymin, p.y);
    box.xmax = std::max(box.xmax, p.x);
    box.ymax = std::max(box.ymax, p.y);
  }
  return box;
}

} // namespace

PointClass classify(const Area& area, GeoPoint p) {
  if (!area.bounds.contains(p)) return PointClass::Outside;
  bool inside = false;
  for (const auto& part : area.parts) {
    if (scan_ring(part.exterior, p, inside)) return PointClass::Boundary;
    for (const auto& hole : part.holes) {
      if (scan_ring(hole, p, inside)) return PointClass::Boundary;
    }
  }
  return inside ? PointClass::Inside : PointClass::Outside;
}

RegionSystem::RegionSystem(std::vector<Area> areas) : areas_(std::move(areas)) {
  if (areas_.empty()) throw Error(ErrorKind::InvalidInput, "region system has no areas");
  std::unordered_set<std::string> seen;
  bool first = true;
  for (auto& area : areas_) {
    if (!seen.insert(area.id).second)
      throw Error(ErrorKind::InvalidInput, "duplicate area id '" + area.id + "'");
    if (area.parts.empty())
      throw Error(ErrorKind::InvalidInput, "area '" + area.id + "' has no polygon");
    for (auto& part : area.parts) {
      auto check_ring = [&](const Ring& ring) {
        if (ring.size() < 3)
          throw Error(ErrorKind::InvalidInput, "area '" + area.id + "' has a ring with fewer than 3 vertices");
        for (const auto& p : ring) {
          if (!std::isfinite(p.x) || !std::isfinite(p.y))
            throw Error(ErrorKind::InvalidInput, "area '" + area.id + "' has a non-finite coordinate");
        }
      };
      check_ring(part.exterior);
      for (const auto& hole : part.holes) check_ring(hole);
    }
    area.size = planar_area(area.parts);
    if (!(area.size > 0.0))
      throw Error(ErrorKind::InvalidInput, "area '" + area.id + "' has zero area");
    area.bounds = ring_bounds(area.parts.front().exterior);
    for (const auto& part : area.parts) area.bounds.extend(ring_bounds(part.exterior));
    if (first) {
      bounds_ = area.bounds;
      first = false;
    } else {
      bounds_.extend(area.bounds);
    }
  }
}

std::optional<std::size_t> RegionSystem::find(std::string_view id) const {
  for (std::size_t d = 0; d < areas_.size(); ++d) {
    if (areas_[d].id == id) return d;
  }
  return std::nullopt;
}

namespace {

Ring parse_ring(const json& coords, const std::string& id) {
  if (!coords.is_array())
    throw Error(ErrorKind::InvalidInput, "area '" + id + "': ring is not an array");
  Ring ring;
  ring.reserve(coords.size());
  for (const auto& pos : coords) {
    if (!pos.is_array() || pos.size() < 2 || !pos[0].is_number() || !pos[1].is_number())
      throw Error(ErrorKind::InvalidInput, "area '" + id + "': bad position");
    ring.push_back({pos[0].get<double>(), pos[1].get<double>()});
  }
  if (ring.size() >= 2 && ring.front() == ring.back()) ring.pop_back();
  return ring;
}

Polygon parse_polygon(const json& rings, const std::string& id) {
  if (!rings.is_array() || rings.empty())
    throw Error(ErrorKind::InvalidInput, "area '" + id + "': polygon has no rings");
  Polygon poly;
  poly.exterior = parse_ring(rings[0], id);
  for (std::size_t i = 1; i < rings.size(); ++i) poly.holes.push_back(parse_ring(rings[i], id));
  return poly;
}

std::string id_to_string(const json& value) {
  if (value.is_string()) return value.get<std::string>();
  if (value.is_number_integer() || value.is_number_unsigned()) return value.dump();
  if (value.is_number_float()) return value.dump();
  throw Error(ErrorKind::InvalidInput, "area id must be a string or number");
}

} // namespace

RegionSystem parse_regions(std::string_view geojson, std::string_view id_property) {
  json doc;
  try {
    doc = json::parse(geojson);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::InvalidInput, std::string("malformed GeoJSON: ") + e.what());
  }
  if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" || !doc.contains("features") ||
      !doc["features"].is_array())
    throw Error(ErrorKind::InvalidInput, "malformed GeoJSON: expected a FeatureCollection");

  std::vector<Area> areas;
  std::size_t index = 0;
  for (const auto& feature : doc["features"]) {
    const std::string where = "feature " + std::to_string(index++);
    if (!feature.is_object() || !feature.contains("properties") || !feature["properties"].is_object())
      throw Error(ErrorKind::InvalidInput, where + " has no properties");
    const auto& props = feature["properties"];
    const std::string key(id_property);
    if (!props.contains(key) || props[key].is_null())
      throw Error(ErrorKind::InvalidInput, where + " is missing id property '" + key + "'");
    Area area;
    area.id = id_to_string(props[key]);

    if (!feature.contains("geometry") || !feature["geometry"].is_object())
      throw Error(ErrorKind::InvalidInput, "area '" + area.id + "' has no geometry");
    const auto& geom = feature["geometry"];
    const std::string type = geom.value("type", "");
    if (!geom.contains("coordinates"))
      throw Error(ErrorKind::InvalidInput, "area '" + area.id + "' geometry has no coordinates");
    if (type == "Polygon") {
      area.parts.push_back(parse_polygon(geom["coordinates"], area.id));
    } else if (type == "MultiPolygon") {
      if (!geom["coordinates"].is_array())
        throw Error(ErrorKind::InvalidInput, "area '" + area.id + "': bad MultiPolygon");
      for (const auto& rings : geom["coordinates"]) area.parts.push_back(parse_polygon(rings, area.id));
    } else {
      throw Error(ErrorKind::InvalidInput,
                  "area '" + area.id + "' has non-polygonal geometry '" + type + "'");
    }
    areas.push_back(std::move(area));
  }
  RegionSystem regions(std::move(areas));
  if (!interiors_disjoint(regions))
    throw Error(ErrorKind::InvalidInput, "region geometries overlap");
  return regions;
}

RegionSystem load_regions(const std::filesystem::path& path, std::string_view id_property) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::InvalidInput, "cannot open regions file '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_regions(buffer.str(), id_property);
}

std::string regions_to_geojson(const RegionSystem& regions, std::string_view id_property) {
  auto ring_json = [](const Ring& ring) {
    json out = json::array();
    for (const auto& p : ring) out.push_back({p.x, p.y});
    out.push_back({ring.front().x, ring.front().y});
    return out;
  };
  json features = json::array();
  for (const auto& area : regions.areas()) {
    json coords = json::array();
    for (const auto& part : area.parts) {
      json rings = json::array({ring_json(part.exterior)});
      for (const auto& hole : part.holes) rings.push_back(ring_json(hole));
      coords.push_back(std::move(rings));
    }
    json geometry = area.parts.size() == 1
                        ? json{{"type", "Polygon"}, {"coordinates", coords[0]}}
                        : json{{"type", "MultiPolygon"}, {"coordinates", coords}};
    features.push_back({{"type", "Feature"},
                        {"properties", {{std::string(id_property), area.id}}},
                        {"geometry", std::move(geometry)}});
  }
  return json{{"type", "FeatureCollection"}, {"features", std::move(features)}}.dump();
}

RegionSystem rectangular_partition(const BoundingBox& box, std::size_t nx, std::size_t ny,
                                   std::string_view prefix) {
  if (nx == 0 || ny == 0 || !(box.width() > 0.0) || !(box.height() > 0.0))
    throw Error(ErrorKind::InvalidInput, "rectangular partition needs a non-empty box and counts");
  const double w = box.width() / static_cast<double>(nx);
  const double h = box.height() / static_cast<double>(ny);
  std::vector<Area> areas;
  areas.reserve(nx * ny);
  for (std::size_t r = 0; r < ny; ++r) {
    for (std::size_t c = 0; c < nx; ++c) {
      const double x0 = box.xmin + static_cast<double>(c) * w;
      const double y0 = box.ymin + static_cast<double>(r) * h;
      const double x1 = c + 1 == nx ? box.xmax : x0 + w;
      const double y1 = r + 1 == ny ? box.ymax : y0 + h;
      Area area;
      area.id = std::string(prefix) + std::to_string(r) + "_" + std::to_string(c);
      area.parts.push_back(Polygon{{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}, {}});
      areas.push_back(std::move(area));
    }
  }
  return RegionSystem(std::move(areas));
}

bool interiors_disjoint(const RegionSystem& regions, std::size_t samples_per_area) {
  Rng rng(0x5eedULL);
  for (std::size_t d = 0; d < regions.size(); ++d) {
    const Area& area = regions[d];
    std::size_t found = 0;
    for (std::size_t attempt = 0; attempt < samples_per_area * 64 && found < samples_per_area; ++attempt) {
      const GeoPoint p{area.bounds.xmin + rng.uniform() * area.bounds.width(),
                       area.bounds.ymin + rng.uniform() * area.bounds.height()};
      if (classify(area, p) != PointClass::Inside) continue;
      ++found;
      for (std::size_t e = 0; e < regions.size(); ++e) {
        if (e != d && classify(regions[e], p) == PointClass::Inside) return false;
      }
    }
  }
  return true;
}

int locate(GeoPoint p, const RegionSystem& regions) {
  for (std::size_t d = 0; d < regions.size(); ++d) {
    if (classify(regions[d], p) != PointClass::Outside) return static_cast<int>(d);
  }
  return kOutside;
}

Lattice covering_lattice(const RegionSystem& regions, double delta) {
  if (!(delta > 0.0) || !std::isfinite(delta))
    throw Error(ErrorKind::InvalidInput, "grid cell size must be positive");
  const BoundingBox& b = regions.bounds();
  Lattice lat;
  lat.delta = delta;
  lat.origin = {b.xmin - delta, b.ymin - delta};
  lat.ncols = static_cast<std::size_t>(std::ceil((b.width() + 2.0 * delta) / delta - 1e-9));
  lat.nrows = static_cast<std::size_t>(std::ceil((b.height() + 2.0 * delta) / delta - 1e-9));
  return lat;
}

EvaluationGrid::EvaluationGrid(const Lattice& lattice, const RegionSystem& regions)
    : lattice_(lattice), assignment_(lattice.size(), kOutside), members_(regions.size()),
      region_bounds_(regions.bounds()) {
  const double delta = lattice.delta;
  auto clamp_index = [](double v, std::size_t n) -> std::size_t {
    if (v < 0.0) return 0;
    if (v > static_cast<double>(n - 1)) return n - 1;
    return static_cast<std::size_t>(v);
  };
  std::vector<std::size_t> interior(regions.size(), 0);
  // Areas claim centroids in list order, which realizes the first-listed
  // tie-break for shared boundaries.
  for (std::size_t d = 0; d < regions.size(); ++d) {
    const Area& area = regions[d];
    const double c0 = std::floor((area.bounds.xmin - lattice.origin.x) / delta - 0.5);
    const double c1 = std::ceil((area.bounds.xmax - lattice.origin.x) / delta - 0.5);
    const double r0 = std::floor((area.bounds.ymin - lattice.origin.y) / delta - 0.5);
    const double r1 = std::ceil((area.bounds.ymax - lattice.origin.y) / delta - 0.5);
    if (c1 < 0.0 || r1 < 0.0 || c0 > static_cast<double>(lattice.ncols - 1) ||
        r0 > static_cast<double>(lattice.nrows - 1))
      continue;
    const std::size_t cb = clamp_index(c0, lattice.ncols), ce = clamp_index(c1, lattice.ncols);
    const std::size_t rb = clamp_index(r0, lattice.nrows), re = clamp_index(r1, lattice.nrows);
    for (std::size_t r = rb; r <= re; ++r) {
      for (std::size_t c = cb; c <= ce; ++c) {
        const std::size_t j = lattice.index(r, c);
        if (assignment_[j] != kOutside) continue;
        const PointClass cls = classify(area, lattice.centroid(j));
        if (cls == PointClass::Outside) continue;
        assignment_[j] = static_cast<int>(d);
        if (cls == PointClass::Inside) ++interior[d];
      }
    }
  }
  for (std::size_t d = 0; d < regions.size(); ++d) {
    if (interior[d] == 0)
      throw Error(ErrorKind::EmptyAreaAtResolution,
                  "area '" + regions[d].id + "' captures no grid centroid at cell size " +
                      std::to_string(delta));
  }
  for (std::size_t j = 0; j < assignment_.size(); ++j) {
    if (assignment_[j] == kOutside) continue;
    members_[static_cast<std::size_t>(assignment_[j])].push_back(j);
    mask_.push_back(j);
  }
}

bool EvaluationGrid::compatible(const EvaluationGrid& other) const {
  if (this == &other) return true;
  if (!(lattice_ == other.lattice_)) return false;
  if (mask_.size() != other.mask_.size()) return false;
  return std::equal(mask_.begin(), mask_.end(), other.mask_.begin());
}

std::optional<std::size_t> EvaluationGrid::cell_of(GeoPoint p) const {
  const double fc = std::floor((p.x - lattice_.origin.x) / lattice_.delta);
  const double fr = std::floor((p.y - lattice_.origin.y) / lattice_.delta);
  if (fc < 0.0 || fr < 0.0 || fc >= static_cast<double>(lattice_.ncols) ||
      fr >= static_cast<double>(lattice_.nrows))
    return std::nullopt;
  return lattice_.index(static_cast<std::size_t>(fr), static_cast<std::size_t>(fc));
}

EvaluationGrid build_grid(const RegionSystem& regions, double delta) {
  return EvaluationGrid(covering_lattice(regions, delta), regions);
}

} // namespace agrsst
