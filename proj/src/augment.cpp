#include "agrsst/augment.hpp"

#include "agrsst/error.hpp"

#include <algorithm>
#include <charconv>
#include <stdexcept>

namespace agrsst {

AreaMeans area_mean_density(const DensityField& field, const EvaluationGrid& grid) {
  if (!(field.grid().lattice() == grid.lattice()))
    throw Error(ErrorKind::GridMismatch, "field and area grid use different lattices");
  AreaMeans means(grid.area_count(), 0.0);
  for (std::size_t d = 0; d < grid.area_count(); ++d) {
    const auto members = grid.members(d);
    if (members.empty())
      throw Error(ErrorKind::EmptyAreaAtResolution, "area " + std::to_string(d) + " has no grid points");
    double sum = 0.0;
    for (std::size_t j : members) sum += field[j];
    means[d] = sum / static_cast<double>(members.size());
  }
  return means;
}

AreaMeans grsst_input_means(const AreaCounts& counts, const RegionSystem& regions) {
  if (counts.size() != regions.size())
    throw Error(ErrorKind::InvalidInput, "counts and regions disagree on the number of areas");
  AreaMeans means(counts.size());
  for (std::size_t d = 0; d < counts.size(); ++d)
    means[d] = static_cast<double>(counts[d]) / regions[d].size;
  return means;
}

double correlation_weight(std::span<const double> m_aux, std::span<const double> m_grsst) {
  const std::size_t n = m_aux.size();
  if (n != m_grsst.size()) throw Error(ErrorKind::InvalidInput, "area mean vectors differ in length");
  if (n < 3) throw Error(ErrorKind::DegenerateCorrelation, "correlation needs at least 3 areas");
  double ma = 0.0, mg = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += m_aux[i];
    mg += m_grsst[i];
  }
  ma /= static_cast<double>(n);
  mg /= static_cast<double>(n);
  double saa = 0.0, sgg = 0.0, sag = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = m_aux[i] - ma, g = m_grsst[i] - mg;
    saa += a * a;
    sgg += g * g;
    sag += a * g;
  }
  if (!(saa > 0.0) || !(sgg > 0.0))
    throw Error(ErrorKind::DegenerateCorrelation, "area means have zero variance");
  const double r = sag / std::sqrt(saa * sgg);
  if (!std::isfinite(r)) throw Error(ErrorKind::DegenerateCorrelation, "correlation is not finite");
  return std::clamp(r, -1.0, 1.0);
}

DensityField invert_density(const DensityField& field) {
  const auto& grid = field.grid();
  double hi = -std::numeric_limits<double>::infinity();
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t j : grid.mask()) {
    hi = std::max(hi, field[j]);
    lo = std::min(lo, field[j]);
  }
  if (!(hi > lo)) throw Error(ErrorKind::ConstantField, "cannot invert a constant density");
  std::vector<double> values(field.size());
  for (std::size_t j = 0; j < values.size(); ++j) values[j] = std::max(0.0, hi - field[j]);
  return DensityField(field.grid_ptr(), std::move(values));
}

DensityField convex_combine(double gamma, const DensityField& aux, const DensityField& grsst) {
  require_same_grid(aux, grsst);
  if (!(gamma >= 0.0 && gamma <= 1.0))
    throw Error(ErrorKind::InvalidInput, "convex weight must lie in [0, 1]");
  if (gamma == 0.0) return grsst;
  if (gamma == 1.0) return aux;
  std::vector<double> values(aux.size());
  for (std::size_t j = 0; j < values.size(); ++j) values[j] = gamma * aux[j] + (1.0 - gamma) * grsst[j];
  return DensityField(grsst.grid_ptr(), std::move(values), DensityField::Normalize::Verify);
}

std::vector<double> benchmark_weights(const DensityField& temp, const AreaCounts& counts,
                                      std::vector<std::string>* warnings) {
  const auto& grid = temp.grid();
  if (counts.size() != grid.area_count())
    throw Error(ErrorKind::InvalidInput, "counts and grid disagree on the number of areas");
  std::vector<double> weights(grid.size(), 0.0);
  for (std::size_t d = 0; d < counts.size(); ++d) {
    if (counts[d] == 0) continue;
    const auto members = grid.members(d);
    double total = 0.0;
    for (std::size_t j : members) {
      weights[j] = temp[j];
      total += temp[j];
    }
    if (!(total > 0.0)) {
      for (std::size_t j : members) weights[j] = 1.0;
      if (warnings) warnings->push_back("area " + std::to_string(d) + " has zero benchmark weight; sampled uniformly");
    }
  }
  return weights;
}

BenchmarkResult benchmark_sample(const DensityField& temp, const AreaCounts& counts, Rng& rng,
                                 std::size_t threads) {
  const auto& grid = temp.grid();
  std::vector<std::string> warnings;
  auto weights = benchmark_weights(temp, counts, &warnings);

  std::vector<std::size_t> draws;
  draws.reserve(counts.total());
  std::vector<double> local;
  for (std::size_t d = 0; d < counts.size(); ++d) {
    if (counts[d] == 0) continue;
    const auto members = grid.members(d);
    local.resize(members.size());
    for (std::size_t k = 0; k < members.size(); ++k) local[k] = weights[members[k]];
    const AliasTable table(local);
    for (std::uint64_t i = 0; i < counts[d]; ++i) draws.push_back(members[table(rng)]);
  }
  if (!(aggregate(draws, grid) == counts))
    throw std::logic_error("benchmark sample does not reproduce the area counts");

  std::vector<GeoPoint> points;
  points.reserve(draws.size());
  for (std::size_t j : draws) points.push_back(grid.centroid(j));
  const Bandwidth bw = select_bandwidth(points);
  return {evaluate_kde(points, bw, temp.grid_ptr(), {.threads = threads}), bw, std::move(weights),
          std::move(draws), std::move(warnings)};
}

std::string FusionReport::to_text() const {
  auto number = [](double v) {
    if (!std::isfinite(v)) return std::string("NA");
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
  };
  std::string out;
  out += "mode=" + std::string(mode == FusionMode::Agrsst ? "AGRSST" : "AGRSST1") + "\n";
  out += "gamma_hat=" + number(gamma_hat) + "\n";
  out += "inverted=" + std::string(inverted ? "true" : "false") + "\n";
  out += "weight_used=" + number(weight_used) + "\n";
  out += "warnings=";
  for (std::size_t i = 0; i < warnings.size(); ++i) {
    if (i) out += "; ";
    out += warnings[i];
  }
  out += "\n";
  return out;
}

namespace {

void check_fusion_inputs(const DensityField& aux, const AreaCounts& counts, const RegionSystem& regions) {
  if (counts.size() != regions.size() || regions.size() != aux.grid().area_count())
    throw Error(ErrorKind::InvalidInput, "counts, regions and grid disagree on the number of areas");
}

} // namespace

FusionResult run_agrsst(const DensityField& grsst, const DensityField& aux, const AreaCounts& counts,
                        const RegionSystem& regions, Rng& rng, const FusionOptions& options) {
  require_same_grid(grsst, aux);
  check_fusion_inputs(aux, counts, regions);

  FusionReport report;
  report.mode = FusionMode::Agrsst;
  double weight = 0.0;
  try {
    const auto m_aux = area_mean_density(aux);
    const auto m_grsst = grsst_input_means(counts, regions);
    report.gamma_hat = correlation_weight(m_aux, m_grsst);
    weight = std::abs(report.gamma_hat);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::DegenerateCorrelation) throw;
    report.warnings.push_back(std::string("degenerate correlation, using the GRSST estimate alone: ") + e.what());
  }

  const bool invert = std::isfinite(report.gamma_hat) && report.gamma_hat < 0.0;
  if (options.forced_weight) {
    weight = *options.forced_weight;
    if (!(weight >= 0.0 && weight <= 1.0))
      throw Error(ErrorKind::InvalidInput, "forced fusion weight must lie in [0, 1]");
  }
  report.weight_used = weight;

  std::optional<DensityField> inverted;
  if (invert && weight > 0.0) {
    try {
      inverted = invert_density(aux);
      report.inverted = true;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::ConstantField) throw;
      report.warnings.push_back("auxiliary density is constant; inversion skipped");
    }
  }
  const DensityField temp = convex_combine(weight, inverted ? *inverted : aux, grsst);
  auto bench = benchmark_sample(temp, counts, rng, options.threads);
  for (auto& w : bench.warnings) report.warnings.push_back(std::move(w));
  return {std::move(bench.density), std::move(report), std::move(bench.weights), std::move(bench.draws)};
}

FusionResult run_agrsst1(const DensityField& aux, const AreaCounts& counts, const RegionSystem& regions,
                         Rng& rng, const FusionOptions& options) {
  check_fusion_inputs(aux, counts, regions);
  FusionReport report;
  report.mode = FusionMode::Agrsst1;
  report.weight_used = 1.0;
  try {
    report.gamma_hat = correlation_weight(area_mean_density(aux), grsst_input_means(counts, regions));
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::DegenerateCorrelation) throw;
  }
  auto bench = benchmark_sample(aux, counts, rng, options.threads);
  report.warnings = std::move(bench.warnings);
  return {std::move(bench.density), std::move(report), std::move(bench.weights), std::move(bench.draws)};
}

} // namespace agrsst
