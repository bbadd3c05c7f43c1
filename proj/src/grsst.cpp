#include "agrsst/grsst.hpp"

#include "agrsst/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace agrsst {

AreaCounts::AreaCounts(std::vector<std::uint64_t> counts) : counts_(std::move(counts)) {
  total_ = std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      out.push_back(trim(line.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

} // namespace

AreaCounts parse_counts(std::string_view csv, const RegionSystem& regions) {
  if (csv.size() >= 3 && csv.substr(0, 3) == "\xEF\xBB\xBF") csv.remove_prefix(3);
  std::vector<std::uint64_t> counts(regions.size(), 0);
  std::vector<bool> seen(regions.size(), false);
  std::size_t id_col = 0, count_col = 0;
  bool header_done = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= csv.size()) {
    const std::size_t end = std::min(csv.find('\n', pos), csv.size());
    const std::string_view line = csv.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (trim(line).empty()) {
      if (end == csv.size()) break;
      continue;
    }
    const auto fields = split_fields(line);
    if (!header_done) {
      auto column = [&](std::string_view name) {
        const auto it = std::find(fields.begin(), fields.end(), name);
        if (it == fields.end())
          throw Error(ErrorKind::InvalidInput, "counts CSV is missing column '" + std::string(name) + "'");
        return static_cast<std::size_t>(it - fields.begin());
      };
      id_col = column("area_id");
      count_col = column("count");
      header_done = true;
      continue;
    }
    const std::string where = "counts CSV line " + std::to_string(line_no);
    if (fields.size() <= std::max(id_col, count_col))
      throw Error(ErrorKind::InvalidInput, where + ": too few fields");
    const auto d = regions.find(fields[id_col]);
    if (!d) throw Error(ErrorKind::InvalidInput, where + ": unknown area_id '" + std::string(fields[id_col]) + "'");
    if (seen[*d]) throw Error(ErrorKind::InvalidInput, where + ": duplicate area_id '" + std::string(fields[id_col]) + "'");
    seen[*d] = true;
    const std::string_view text = fields[count_col];
    std::uint64_t value = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size())
      throw Error(ErrorKind::InvalidInput, where + ": count '" + std::string(text) + "' is not a nonnegative integer");
    counts[*d] = value;
    if (end == csv.size()) break;
  }
  if (!header_done) throw Error(ErrorKind::InvalidInput, "counts CSV is empty");
  AreaCounts out(std::move(counts));
  if (out.total() == 0) throw Error(ErrorKind::InvalidInput, "counts CSV has a total count of zero");
  return out;
}

AreaCounts load_counts(const std::filesystem::path& path, const RegionSystem& regions) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::InvalidInput, "cannot open counts file '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_counts(buffer.str(), regions);
}

std::string counts_to_csv(const AreaCounts& counts, const RegionSystem& regions) {
  std::string out = "area_id,count\n";
  for (std::size_t d = 0; d < counts.size(); ++d) {
    out += regions[d].id;
    out += ',';
    out += std::to_string(counts[d]);
    out += '\n';
  }
  return out;
}

AreaCounts aggregate(std::span<const std::size_t> grid_indices, const EvaluationGrid& grid) {
  std::vector<std::uint64_t> counts(grid.area_count(), 0);
  for (std::size_t j : grid_indices) {
    const int d = grid.assignment(j);
    if (d == kOutside) throw Error(ErrorKind::InvalidInput, "sample outside every area");
    ++counts[static_cast<std::size_t>(d)];
  }
  return AreaCounts(std::move(counts));
}

void ChainConfig::validate() const {
  if (keep < 1) throw Error(ErrorKind::InvalidInput, "chain must keep at least one iteration");
  if (!(smoothing >= 0.0) || !std::isfinite(smoothing))
    throw Error(ErrorKind::InvalidInput, "smoothing constant must be nonnegative");
  if (!(pilot_scale > 0.0) || !std::isfinite(pilot_scale))
    throw Error(ErrorKind::InvalidInput, "pilot scale must be positive");
}

std::string ChainTrace::to_csv() const {
  std::string out = "iteration,hx,hy";
  for (std::size_t p : probes) out += ",probe_" + std::to_string(p);
  out += '\n';
  char buf[32];
  auto put = [&](double v) {
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, res.ptr);
  };
  for (std::size_t l = 0; l < values.size(); ++l) {
    out += std::to_string(l);
    out += ',';
    put(bandwidths[l].hx);
    out += ',';
    put(bandwidths[l].hy);
    for (double v : values[l]) {
      out += ',';
      put(v);
    }
    out += '\n';
  }
  return out;
}

namespace {

void check_counts(const AreaCounts& counts, const EvaluationGrid& grid) {
  if (counts.size() != grid.area_count())
    throw Error(ErrorKind::InvalidInput, "counts and grid disagree on the number of areas");
  if (counts.total() == 0) throw Error(ErrorKind::InvalidInput, "counts total is zero");
  for (std::size_t d = 0; d < counts.size(); ++d) {
    if (counts[d] > 0 && grid.members(d).empty())
      throw Error(ErrorKind::EmptyAreaAtResolution,
                  "area " + std::to_string(d) + " has counts but no grid points");
  }
}

std::vector<GeoPoint> centroids(const EvaluationGrid& grid, std::span<const std::size_t> indices) {
  std::vector<GeoPoint> out;
  out.reserve(indices.size());
  for (std::size_t j : indices) out.push_back(grid.centroid(j));
  return out;
}

} // namespace

KdeFit pilot_estimate(const AreaCounts& counts, const GridPtr& grid, const ChainConfig& cfg, Rng& rng) {
  check_counts(counts, *grid);
  std::vector<std::size_t> draws;
  draws.reserve(counts.total());
  for (std::size_t d = 0; d < counts.size(); ++d) {
    const auto members = grid->members(d);
    for (std::uint64_t i = 0; i < counts[d]; ++i) draws.push_back(members[rng.below(members.size())]);
  }
  const auto points = centroids(*grid, draws);
  const Bandwidth bw = select_bandwidth(points).scaled(cfg.pilot_scale);
  return {bw, evaluate_kde(points, bw, grid, {.threads = cfg.threads})};
}

std::vector<std::size_t> s_step_indices(const DensityField& prev, const AreaCounts& counts,
                                        double smoothing, Rng& rng) {
  const EvaluationGrid& grid = prev.grid();
  check_counts(counts, grid);
  std::vector<std::size_t> draws;
  draws.reserve(counts.total());
  std::vector<double> weights;
  for (std::size_t d = 0; d < counts.size(); ++d) {
    if (counts[d] == 0) continue;
    const auto members = grid.members(d);
    weights.resize(members.size());
    for (std::size_t k = 0; k < members.size(); ++k) weights[k] = prev[members[k]] + smoothing;
    const AliasTable table(weights);
    for (std::uint64_t i = 0; i < counts[d]; ++i) draws.push_back(members[table(rng)]);
  }
  return draws;
}

std::vector<GeoPoint> s_step(const DensityField& prev, const AreaCounts& counts, double smoothing,
                             Rng& rng) {
  return centroids(prev.grid(), s_step_indices(prev, counts, smoothing, rng));
}

KdeFit m_step(std::span<const GeoPoint> samples, const GridPtr& grid, std::size_t threads) {
  const Bandwidth bw = select_bandwidth(samples);
  return {bw, evaluate_kde(samples, bw, grid, {.threads = threads})};
}

GrsstResult run_grsst(const AreaCounts& counts, const RegionSystem& regions, const GridPtr& grid,
                      const ChainConfig& cfg) {
  cfg.validate();
  if (counts.size() != regions.size())
    throw Error(ErrorKind::InvalidInput, "counts and regions disagree on the number of areas");
  check_counts(counts, *grid);
  for (std::size_t p : cfg.probes) {
    if (p >= grid->size()) throw Error(ErrorKind::InvalidInput, "probe index outside the grid");
  }

  Rng rng(cfg.seed);
  KdeFit current = pilot_estimate(counts, grid, cfg, rng);

  ChainTrace trace;
  trace.probes = cfg.probes;
  trace.bandwidths.push_back(current.bandwidth);
  std::vector<double> pilot_values;
  if (trace.probes.empty()) {
    pilot_values.assign(current.density.values().begin(), current.density.values().end());
  } else {
    std::vector<double> row;
    for (std::size_t p : trace.probes) row.push_back(current.density[p]);
    trace.values.push_back(std::move(row));
  }

  const std::size_t total = cfg.iterations();
  std::vector<double> sum(grid->size(), 0.0);
  for (std::size_t l = 1; l <= total; ++l) {
    const auto draws = s_step_indices(current.density, counts, cfg.smoothing, rng);
    if (!(aggregate(draws, *grid) == counts))
      throw std::logic_error("S-step sample does not reproduce the area counts");
    const auto points = centroids(*grid, draws);
    current = m_step(points, grid, cfg.threads);

    if (trace.probes.empty()) {
      // Fix probes at the highest, median and lowest in-mask density of the
      // first iteration, then backfill the pilot row.
      std::vector<std::size_t> order(grid->mask().begin(), grid->mask().end());
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return current.density[a] > current.density[b];
      });
      trace.probes = {order.front(), order[order.size() / 2], order.back()};
      std::vector<double> row;
      for (std::size_t p : trace.probes) row.push_back(pilot_values[p]);
      trace.values.push_back(std::move(row));
      pilot_values.clear();
      pilot_values.shrink_to_fit();
    }
    std::vector<double> row;
    for (std::size_t p : trace.probes) row.push_back(current.density[p]);
    trace.values.push_back(std::move(row));
    trace.bandwidths.push_back(current.bandwidth);

    if (l > cfg.burnin) {
      const auto values = current.density.values();
      for (std::size_t j = 0; j < sum.size(); ++j) sum[j] += values[j];
    }
  }
  const double inv = 1.0 / static_cast<double>(cfg.keep);
  for (double& v : sum) v *= inv;
  return {DensityField(grid, std::move(sum)), std::move(trace)};
}

} // namespace agrsst
