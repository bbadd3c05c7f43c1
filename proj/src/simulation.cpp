#include "agrsst/simulation.hpp"

#include "agrsst/auxiliary.hpp"
#include "agrsst/error.hpp"
#include "agrsst/kde.hpp"
#include "agrsst/parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <charconv>
#include <chrono>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace agrsst {

using nlohmann::json;

void MixtureSpec::validate() const {
  if (components.empty()) throw Error(ErrorKind::InvalidInput, "mixture has no components");
  double total = 0.0;
  for (const auto& c : components) {
    if (!(c.sigma_x > 0.0) || !(c.sigma_y > 0.0))
      throw Error(ErrorKind::InvalidInput, "mixture sigmas must be positive");
    if (!(c.weight >= 0.0)) throw Error(ErrorKind::InvalidInput, "mixture weights must be nonnegative");
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-12) throw Error(ErrorKind::InvalidInput, "mixture weights must sum to 1");
}

MixtureSpec draw_mixture(const EvaluationGrid& grid, std::size_t k, Rng& rng, double sigma_lo,
                         double sigma_hi) {
  if (k == 0) throw Error(ErrorKind::InvalidInput, "mixture needs at least one component");
  if (grid.mask_count() < k)
    throw Error(ErrorKind::TooFewGridPoints, "grid has fewer in-mask points than mixture components");
  if (!(sigma_lo > 0.0) || !(sigma_hi >= sigma_lo))
    throw Error(ErrorKind::InvalidInput, "invalid mixture sigma range");
  const BoundingBox& b = grid.region_bounds();
  const double diag = std::hypot(b.width(), b.height());

  // Partial Fisher-Yates over the mask for draws without replacement.
  std::vector<std::size_t> pool(grid.mask().begin(), grid.mask().end());
  MixtureSpec spec;
  spec.components.reserve(k);
  const double weight = 1.0 / static_cast<double>(k);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t pick = i + static_cast<std::size_t>(rng.below(pool.size() - i));
    std::swap(pool[i], pool[pick]);
    MixtureComponent comp;
    comp.center = grid.centroid(pool[i]);
    comp.sigma_x = diag * (sigma_lo + (sigma_hi - sigma_lo) * rng.uniform());
    comp.sigma_y = diag * (sigma_lo + (sigma_hi - sigma_lo) * rng.uniform());
    comp.weight = weight;
    spec.components.push_back(comp);
  }
  // Absorb rounding so the weights sum to one.
  double total = 0.0;
  for (const auto& c : spec.components) total += c.weight;
  spec.components.back().weight += 1.0 - total;
  return spec;
}

DensityField eval_mixture(const MixtureSpec& spec, const GridPtr& grid) {
  spec.validate();
  const Lattice& lat = grid->lattice();
  std::vector<double> values(lat.size(), 0.0);
  const double inv2pi = 0.5 * std::numbers::inv_pi;
  for (const auto& c : spec.components) {
    const double norm = c.weight * inv2pi / (c.sigma_x * c.sigma_y);
    for (std::size_t j = 0; j < values.size(); ++j) {
      const GeoPoint g = lat.centroid(j);
      const double u = (g.x - c.center.x) / c.sigma_x;
      const double v = (g.y - c.center.y) / c.sigma_y;
      values[j] += norm * std::exp(-0.5 * (u * u + v * v));
    }
  }
  return DensityField(grid, std::move(values));
}

std::vector<GeoPoint> Population::points(const EvaluationGrid& grid) const {
  std::vector<GeoPoint> out;
  out.reserve(cells.size());
  for (std::size_t j : cells) out.push_back(grid.centroid(j));
  return out;
}

Population sample_population(const DensityField& truth, std::size_t n, Rng& rng) {
  const auto& grid = truth.grid();
  std::vector<double> weights(grid.size(), 0.0);
  for (std::size_t j : grid.mask()) weights[j] = truth[j];
  Population pop;
  pop.cells = weighted_sample_indices(weights, n, rng);
  pop.counts = aggregate(pop.cells, grid);
  return pop;
}

AreaMeans municipal_means(const DensityField& truth, const EvaluationGrid& fine_grid) {
  return area_mean_density(truth, fine_grid);
}

AreaMeans distort_means(std::span<const double> means, double d, Rng& rng) {
  if (!(d >= 0.0) || !std::isfinite(d)) throw Error(ErrorKind::InvalidInput, "distortion must be nonnegative");
  AreaMeans out(means.begin(), means.end());
  if (d == 0.0) return out;
  double total = 0.0;
  for (double m : means) total += m;
  if (!(total > 0.0)) throw Error(ErrorKind::InvalidInput, "municipal means sum to zero");
  for (double& m : out) {
    const double sd = d * m / total;
    m = std::max(0.0, m + sd * rng.normal());
  }
  return out;
}

std::vector<double> municipal_weights(std::span<const double> means, const EvaluationGrid& fine_grid) {
  if (means.size() != fine_grid.area_count())
    throw Error(ErrorKind::InvalidInput, "one mean per fine area is required");
  std::vector<double> weights(fine_grid.size(), 0.0);
  for (std::size_t p = 0; p < means.size(); ++p) {
    for (std::size_t j : fine_grid.members(p)) weights[j] = means[p];
  }
  return weights;
}

double rmise_values(std::span<const double> est, std::span<const double> truth,
                    std::span<const std::size_t> mask) {
  if (est.size() != truth.size()) throw Error(ErrorKind::GridMismatch, "RMISE inputs differ in size");
  if (mask.empty()) throw Error(ErrorKind::InvalidInput, "RMISE over an empty mask");
  double sum = 0.0;
  for (std::size_t j : mask) {
    const double diff = truth[j] - est[j];
    sum += diff * diff;
  }
  return std::sqrt(sum / static_cast<double>(mask.size()));
}

double rmise(const DensityField& est, const DensityField& truth) {
  require_same_grid(est, truth);
  return rmise_values(est.values(), truth.values(), truth.grid().mask());
}

double rmise_pixel_weighted(const DensityField& est, const DensityField& truth) {
  return rmise(est, truth) * truth.grid().lattice().delta;
}

std::string_view estimator_name(Estimator e) {
  switch (e) {
  case Estimator::Grsst: return "GRSST";
  case Estimator::Aux: return "AUX";
  case Estimator::Agrsst: return "AGRSST";
  case Estimator::Agrsst1: return "AGRSST1";
  }
  return "?";
}

Estimator estimator_from_name(std::string_view name) {
  for (auto e : {Estimator::Grsst, Estimator::Aux, Estimator::Agrsst, Estimator::Agrsst1}) {
    if (estimator_name(e) == name) return e;
  }
  throw Error(ErrorKind::InvalidInput, "unknown estimator '" + std::string(name) + "'");
}

void SimulationConfig::validate() const {
  if (runs < 1) throw Error(ErrorKind::InvalidInput, "runs must be at least 1");
  if (population < 2) throw Error(ErrorKind::InvalidInput, "population must be at least 2");
  if (components < 1) throw Error(ErrorKind::InvalidInput, "components must be at least 1");
  if (distortions.empty()) throw Error(ErrorKind::InvalidInput, "at least one distortion level is required");
  for (double d : distortions) {
    if (!(d >= 0.0) || !std::isfinite(d)) throw Error(ErrorKind::InvalidInput, "distortions must be nonnegative");
  }
  if (estimators.empty()) throw Error(ErrorKind::InvalidInput, "at least one estimator is required");
  if (!(cellsize > 0.0)) throw Error(ErrorKind::InvalidInput, "cellsize must be positive");
  chain.validate();
}

SimulationConfig simulation_preset(std::string_view name) {
  SimulationConfig cfg;
  if (name == "paper-bavaria") {
    // Protocol scale: T = 400, n = 250 000, K = 80, eight distortion levels,
    // B = 30, L = 20. Expects coarse/fine region files in the map section.
    return cfg;
  }
  if (name == "desk-small") {
    cfg.runs = 4;
    cfg.population = 5000;
    cfg.components = 10;
    cfg.distortions = {0.0, 1.0, 5.0, 20.0};
    cfg.chain.burnin = 5;
    cfg.chain.keep = 5;
    cfg.cellsize = 0.25;
    return cfg;
  }
  if (name == "desk-acceptance") {
    cfg.runs = 50;
    cfg.population = 20000;
    cfg.components = 10;
    cfg.distortions = {0.0, 1.0, 5.0, 20.0};
    cfg.chain.burnin = 10;
    cfg.chain.keep = 10;
    cfg.cellsize = 0.125;
    return cfg;
  }
  throw Error(ErrorKind::InvalidInput, "unknown simulation preset '" + std::string(name) + "'");
}

namespace {

template <class T>
T get_field(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidInput, std::string("config field '") + key + "': " + e.what());
  }
}

std::pair<std::size_t, std::size_t> get_pair(const json& j, const char* key) {
  const auto v = get_field<std::vector<std::size_t>>(j, key);
  if (v.size() != 2) throw Error(ErrorKind::InvalidInput, std::string("config field '") + key + "' needs [nx, ny]");
  return {v[0], v[1]};
}

} // namespace

SimulationConfig parse_simulation_config(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::InvalidInput,
                "invalid JSON at byte " + std::to_string(e.byte) + ": " + std::string(e.what()));
  }
  if (!doc.is_object()) throw Error(ErrorKind::InvalidInput, "simulation config must be a JSON object");

  SimulationConfig cfg = doc.contains("preset") ? simulation_preset(get_field<std::string>(doc, "preset"))
                                                : SimulationConfig{};
  for (const auto& [key, value] : doc.items()) {
    if (key == "preset") continue;
    else if (key == "runs") cfg.runs = get_field<std::size_t>(doc, "runs");
    else if (key == "population") cfg.population = get_field<std::size_t>(doc, "population");
    else if (key == "aux_sample_size") cfg.aux_sample_size = get_field<std::size_t>(doc, "aux_sample_size");
    else if (key == "components") cfg.components = get_field<std::size_t>(doc, "components");
    else if (key == "sigma_range") {
      const auto r = get_field<std::vector<double>>(doc, "sigma_range");
      if (r.size() != 2) throw Error(ErrorKind::InvalidInput, "config field 'sigma_range' needs [lo, hi]");
      cfg.sigma_lo = r[0];
      cfg.sigma_hi = r[1];
    } else if (key == "distortions") cfg.distortions = get_field<std::vector<double>>(doc, "distortions");
    else if (key == "estimators") {
      cfg.estimators.clear();
      for (const auto& name : get_field<std::vector<std::string>>(doc, "estimators"))
        cfg.estimators.push_back(estimator_from_name(name));
    } else if (key == "burnin") cfg.chain.burnin = get_field<std::size_t>(doc, "burnin");
    else if (key == "keep") cfg.chain.keep = get_field<std::size_t>(doc, "keep");
    else if (key == "smoothing_c") cfg.chain.smoothing = get_field<double>(doc, "smoothing_c");
    else if (key == "pilot_scale") cfg.chain.pilot_scale = get_field<double>(doc, "pilot_scale");
    else if (key == "cellsize") cfg.cellsize = get_field<double>(doc, "cellsize");
    else if (key == "seed") cfg.seed = get_field<std::uint64_t>(doc, "seed");
    else if (key == "threads") cfg.threads = get_field<std::size_t>(doc, "threads");
    else if (key == "timing") cfg.timing = get_field<bool>(doc, "timing");
    else if (key == "map") {
      if (!value.is_object()) throw Error(ErrorKind::InvalidInput, "config field 'map' must be an object");
      for (const auto& [mkey, mvalue] : value.items()) {
        if (mkey == "width") cfg.map.width = get_field<double>(value, "width");
        else if (mkey == "height") cfg.map.height = get_field<double>(value, "height");
        else if (mkey == "coarse") std::tie(cfg.map.coarse_nx, cfg.map.coarse_ny) = get_pair(value, "coarse");
        else if (mkey == "fine") std::tie(cfg.map.fine_nx, cfg.map.fine_ny) = get_pair(value, "fine");
        else if (mkey == "coarse_regions") cfg.map.coarse_path = get_field<std::string>(value, "coarse_regions");
        else if (mkey == "fine_regions") cfg.map.fine_path = get_field<std::string>(value, "fine_regions");
        else if (mkey == "id_property") cfg.map.id_property = get_field<std::string>(value, "id_property");
        else throw Error(ErrorKind::InvalidInput, "unknown config field 'map." + mkey + "'");
      }
    } else {
      throw Error(ErrorKind::InvalidInput, "unknown config field '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

std::string simulation_config_to_json(const SimulationConfig& cfg) {
  json estimators = json::array();
  for (auto e : cfg.estimators) estimators.push_back(std::string(estimator_name(e)));
  json map = {{"width", cfg.map.width},
              {"height", cfg.map.height},
              {"coarse", {cfg.map.coarse_nx, cfg.map.coarse_ny}},
              {"fine", {cfg.map.fine_nx, cfg.map.fine_ny}},
              {"id_property", cfg.map.id_property}};
  if (!cfg.map.coarse_path.empty()) map["coarse_regions"] = cfg.map.coarse_path;
  if (!cfg.map.fine_path.empty()) map["fine_regions"] = cfg.map.fine_path;
  return json{{"runs", cfg.runs},
              {"population", cfg.population},
              {"aux_sample_size", cfg.aux_sample_size},
              {"components", cfg.components},
              {"sigma_range", {cfg.sigma_lo, cfg.sigma_hi}},
              {"distortions", cfg.distortions},
              {"estimators", estimators},
              {"burnin", cfg.chain.burnin},
              {"keep", cfg.chain.keep},
              {"smoothing_c", cfg.chain.smoothing},
              {"pilot_scale", cfg.chain.pilot_scale},
              {"cellsize", cfg.cellsize},
              {"seed", cfg.seed},
              {"threads", cfg.threads},
              {"timing", cfg.timing},
              {"map", map}}
      .dump(2);
}

std::string SimulationResult::to_csv() const {
  std::string out = "run,distortion,estimator,rmise,gamma_hat,seconds\n";
  char buf[32];
  auto put = [&](double v) {
    if (!std::isfinite(v)) return;
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, res.ptr);
  };
  for (const auto& r : records) {
    out += std::to_string(r.run);
    out += ',';
    put(r.distortion);
    out += ',';
    out += estimator_name(r.estimator);
    out += ',';
    put(r.rmise);
    out += ',';
    put(r.gamma_hat);
    out += ',';
    put(r.seconds);
    out += '\n';
  }
  return out;
}

SimulationMaps build_simulation_maps(const SimulationConfig& cfg) {
  SimulationMaps maps;
  if (!cfg.map.coarse_path.empty() || !cfg.map.fine_path.empty()) {
    if (cfg.map.coarse_path.empty() || cfg.map.fine_path.empty())
      throw Error(ErrorKind::InvalidInput, "map needs both coarse_regions and fine_regions");
    maps.coarse = load_regions(cfg.map.coarse_path, cfg.map.id_property);
    maps.fine = load_regions(cfg.map.fine_path, cfg.map.id_property);
  } else {
    const BoundingBox box{0.0, 0.0, cfg.map.width, cfg.map.height};
    maps.coarse = rectangular_partition(box, cfg.map.coarse_nx, cfg.map.coarse_ny, "A");
    maps.fine = rectangular_partition(box, cfg.map.fine_nx, cfg.map.fine_ny, "Q");
  }
  maps.grid = share(build_grid(maps.coarse, cfg.cellsize));
  maps.fine_grid = share(EvaluationGrid(maps.grid->lattice(), maps.fine));
  return maps;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

bool wants(const SimulationConfig& cfg, Estimator e) {
  return std::find(cfg.estimators.begin(), cfg.estimators.end(), e) != cfg.estimators.end();
}

} // namespace

std::vector<SimulationRecord> run_single(const SimulationConfig& cfg, const SimulationMaps& maps,
                                         std::size_t run) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const std::uint64_t t = run;
  std::vector<SimulationRecord> records;
  double current_d = nan;
  try {
    Rng base(derive_seed(cfg.seed, {t, 0}));
    const auto spec = draw_mixture(*maps.grid, cfg.components, base, cfg.sigma_lo, cfg.sigma_hi);
    const DensityField truth = eval_mixture(spec, maps.grid);
    const Population pop = sample_population(truth, cfg.population, base);

    auto start = Clock::now();
    ChainConfig chain = cfg.chain;
    chain.threads = 1;
    chain.seed = derive_seed(cfg.seed, {t, 1});
    const DensityField grsst = run_grsst(pop.counts, maps.coarse, maps.grid, chain).density;
    const double grsst_seconds = seconds_since(start);
    const double grsst_rmise = rmise(grsst, truth);

    const AreaMeans means = municipal_means(truth, *maps.fine_grid);
    const std::size_t aux_n = cfg.aux_sample_size == 0 ? cfg.population : cfg.aux_sample_size;

    for (double d : cfg.distortions) {
      current_d = d;
      const std::uint64_t dbits = std::bit_cast<std::uint64_t>(d);
      Rng rng(derive_seed(cfg.seed, {t, 2, dbits}));

      start = Clock::now();
      const AreaMeans distorted = distort_means(means, d, rng);
      if (d == 0.0 && !std::equal(distorted.begin(), distorted.end(), means.begin(), means.end()))
        throw std::logic_error("zero distortion altered the municipal means");
      const auto weights = municipal_weights(distorted, *maps.fine_grid);
      const auto cells = weighted_sample_indices(weights, aux_n, rng);
      const AreaCounts fine_counts = aggregate(cells, *maps.fine_grid);
      ChainConfig fine_chain = chain;
      fine_chain.seed = derive_seed(cfg.seed, {t, 3, dbits});
      const DensityField aux =
          aux_density_from_aggregates(fine_counts, maps.fine, maps.fine_grid, maps.grid, fine_chain);
      const double aux_seconds = seconds_since(start);

      auto emit = [&](Estimator e, double value, double gamma, double secs) {
        if (!wants(cfg, e)) return;
        records.push_back({run, d, e, value, gamma, cfg.timing ? secs : nan});
      };
      emit(Estimator::Grsst, grsst_rmise, nan, grsst_seconds);
      emit(Estimator::Aux, rmise(aux, truth), nan, aux_seconds);

      if (wants(cfg, Estimator::Agrsst)) {
        start = Clock::now();
        const auto fused = run_agrsst(grsst, aux, pop.counts, maps.coarse, rng);
        emit(Estimator::Agrsst, rmise(fused.density, truth), fused.report.gamma_hat, seconds_since(start));
      }
      if (wants(cfg, Estimator::Agrsst1)) {
        start = Clock::now();
        const auto fused = run_agrsst1(aux, pop.counts, maps.coarse, rng);
        emit(Estimator::Agrsst1, rmise(fused.density, truth), fused.report.gamma_hat, seconds_since(start));
      }
    }
  } catch (const Error& e) {
    std::string where = "run " + std::to_string(run);
    if (std::isfinite(current_d)) where += ", distortion " + std::to_string(current_d);
    throw Error(e.kind(), where + ": " + e.what());
  }
  // Keep (distortion, estimator) order independent of the configured list order.
  std::stable_sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
    return static_cast<int>(a.estimator) < static_cast<int>(b.estimator);
  });
  std::stable_sort(records.begin(), records.end(),
                   [](const auto& a, const auto& b) { return a.distortion < b.distortion; });
  return records;
}

SimulationResult run_monte_carlo(const SimulationConfig& cfg, const SimulationMaps& maps) {
  cfg.validate();
  std::vector<std::vector<SimulationRecord>> per_run(cfg.runs);
  parallel_for(cfg.runs, cfg.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) per_run[i] = run_single(cfg, maps, i + 1);
  });
  SimulationResult result;
  for (auto& recs : per_run) {
    for (auto& r : recs) result.records.push_back(r);
  }
  return result;
}

} // namespace agrsst
