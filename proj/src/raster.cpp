#include "agrsst/raster.hpp"

#include "agrsst/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace agrsst {

bool RasterLayer::same_georef(const RasterLayer& other) const {
  return ncols == other.ncols && nrows == other.nrows && xllcorner == other.xllcorner &&
         yllcorner == other.yllcorner && cellsize == other.cellsize;
}

std::optional<std::size_t> RasterLayer::cell_at(GeoPoint p) const {
  const double fc = std::floor((p.x - xllcorner) / cellsize);
  const double fr = std::floor((p.y - yllcorner) / cellsize);
  if (fc < 0.0 || fr < 0.0 || fc >= static_cast<double>(ncols) || fr >= static_cast<double>(nrows))
    return std::nullopt;
  const auto row_from_top = nrows - 1 - static_cast<std::size_t>(fr);
  return row_from_top * ncols + static_cast<std::size_t>(fc);
}

namespace {

struct Cursor {
  std::string_view text;
  std::size_t pos = 0;
  std::size_t line = 1;

  // Next whitespace-delimited token; empty at end of input.
  std::string_view next(std::size_t& token_line) {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) {
      if (text[pos] == '\n') ++line;
      ++pos;
    }
    token_line = line;
    const std::size_t start = pos;
    while (pos < text.size() && !std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    return text.substr(start, pos - start);
  }
};

[[noreturn]] void fail(std::size_t line, const std::string& message) {
  throw Error(ErrorKind::InvalidInput, "raster line " + std::to_string(line) + ": " + message);
}

double to_double(std::string_view token, std::size_t line) {
  double v = 0.0;
  const char* first = token.data();
  if (!token.empty() && token.front() == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size())
    fail(line, "expected a number, got '" + std::string(token) + "'");
  return v;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

void append_number(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

} // namespace

RasterLayer parse_raster(std::string_view text) {
  Cursor cur{text};
  RasterLayer layer;
  bool have_cols = false, have_rows = false, have_x = false, have_y = false, have_size = false;
  bool x_center = false, y_center = false;

  std::size_t line = 0;
  std::string_view token = cur.next(line);
  while (!token.empty() && std::isalpha(static_cast<unsigned char>(token.front()))) {
    const std::string key = lower(token);
    std::size_t value_line = 0;
    const std::string_view value = cur.next(value_line);
    if (value.empty()) fail(line, "missing value for '" + key + "'");
    if (key == "ncols" || key == "nrows") {
      const double v = to_double(value, value_line);
      if (!(v >= 1.0) || v != std::floor(v)) fail(value_line, key + " must be a positive integer");
      (key == "ncols" ? layer.ncols : layer.nrows) = static_cast<std::size_t>(v);
      (key == "ncols" ? have_cols : have_rows) = true;
    } else if (key == "xllcorner" || key == "xllcenter") {
      layer.xllcorner = to_double(value, value_line);
      x_center = key == "xllcenter";
      have_x = true;
    } else if (key == "yllcorner" || key == "yllcenter") {
      layer.yllcorner = to_double(value, value_line);
      y_center = key == "yllcenter";
      have_y = true;
    } else if (key == "cellsize") {
      layer.cellsize = to_double(value, value_line);
      if (!(layer.cellsize > 0.0) || !std::isfinite(layer.cellsize)) fail(value_line, "cellsize must be positive");
      have_size = true;
    } else if (key == "nodata_value") {
      layer.nodata = to_double(value, value_line);
    } else {
      fail(line, "unknown header key '" + std::string(token) + "'");
    }
    token = cur.next(line);
  }
  if (!have_cols) fail(line, "missing ncols");
  if (!have_rows) fail(line, "missing nrows");
  if (!have_x) fail(line, "missing xllcorner");
  if (!have_y) fail(line, "missing yllcorner");
  if (!have_size) fail(line, "missing cellsize");
  if (x_center) layer.xllcorner -= 0.5 * layer.cellsize;
  if (y_center) layer.yllcorner -= 0.5 * layer.cellsize;

  const std::size_t expected = layer.ncols * layer.nrows;
  layer.cells.reserve(expected);
  while (!token.empty()) {
    if (layer.cells.size() == expected) fail(line, "more values than ncols * nrows");
    const double v = to_double(token, line);
    if (v != layer.nodata && !std::isfinite(v)) fail(line, "non-finite cell value");
    layer.cells.push_back(v);
    token = cur.next(line);
  }
  if (layer.cells.size() != expected)
    fail(line, "expected " + std::to_string(expected) + " values, found " + std::to_string(layer.cells.size()));
  return layer;
}

RasterLayer load_raster(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::InvalidInput, "cannot open raster '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_raster(buffer.str());
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

std::string format_raster(const RasterLayer& layer) {
  std::string out;
  out.reserve(64 + layer.cells.size() * 12);
  out += "ncols " + std::to_string(layer.ncols) + "\n";
  out += "nrows " + std::to_string(layer.nrows) + "\n";
  out += "xllcorner ";
  append_number(out, layer.xllcorner);
  out += "\nyllcorner ";
  append_number(out, layer.yllcorner);
  out += "\ncellsize ";
  append_number(out, layer.cellsize);
  out += "\nNODATA_value ";
  append_number(out, layer.nodata);
  out += '\n';
  for (std::size_t r = 0; r < layer.nrows; ++r) {
    for (std::size_t c = 0; c < layer.ncols; ++c) {
      if (c) out += ' ';
      append_number(out, layer.at(r, c));
    }
    out += '\n';
  }
  return out;
}

void write_raster(const std::filesystem::path& path, const RasterLayer& layer) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::InvalidInput, "cannot write raster '" + path.string() + "'");
  const std::string text = format_raster(layer);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

RasterLayer density_to_raster(const DensityField& field, double nodata) {
  const Lattice& lat = field.grid().lattice();
  RasterLayer layer;
  layer.ncols = lat.ncols;
  layer.nrows = lat.nrows;
  layer.xllcorner = lat.origin.x;
  layer.yllcorner = lat.origin.y;
  layer.cellsize = lat.delta;
  layer.nodata = nodata;
  layer.cells.resize(lat.size());
  for (std::size_t r = 0; r < lat.nrows; ++r) {
    const std::size_t src_row = lat.nrows - 1 - r;
    for (std::size_t c = 0; c < lat.ncols; ++c) {
      const std::size_t j = lat.index(src_row, c);
      layer.cells[r * lat.ncols + c] = field.grid().in_mask(j) ? field[j] : nodata;
    }
  }
  return layer;
}

std::vector<double> sample_raster_on_grid(const RasterLayer& raster, const EvaluationGrid& grid,
                                          std::size_t* covered) {
  std::vector<double> values(grid.size(), 0.0);
  std::size_t hits = 0;
  for (std::size_t j : grid.mask()) {
    const auto cell = raster.cell_at(grid.centroid(j));
    if (!cell) continue;
    const double v = raster.cells[*cell];
    if (raster.is_nodata(v)) continue;
    ++hits;
    values[j] = std::max(0.0, v);
  }
  if (covered) *covered = hits;
  return values;
}

} // namespace agrsst
