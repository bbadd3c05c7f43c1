#include "agrsst/cli.hpp"

#include "agrsst/augment.hpp"
#include "agrsst/auxiliary.hpp"
#include "agrsst/error.hpp"
#include "agrsst/grsst.hpp"
#include "agrsst/parallel.hpp"
#include "agrsst/raster.hpp"
#include "agrsst/render.hpp"
#include "agrsst/simulation.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

namespace agrsst::cli {

using nlohmann::json;
namespace fs = std::filesystem;

std::string manifest_path(const std::string& output) { return output + ".manifest.json"; }

std::string file_sha256(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::InvalidInput, "cannot open '" + path + "'");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 initialization failed");
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

namespace {

// Options naming input files (digested in the manifest) and output files
// (redirected by `replay --out-dir`).
const std::set<std::string> kInputOptions{"regions", "counts",       "aux",         "raster", "ndvi-nir",
                                          "ndvi-red", "fine-regions", "fine-counts", "config", "in",
                                          "est",      "truth"};
const std::set<std::string> kOutputOptions{"out", "trace-out", "report-out"};

struct Streams {
  std::ostream& out;
  std::ostream& err;
};

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::InvalidInput, "cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::InvalidInput, "cannot write '" + path + "'");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorKind::InvalidInput, "failed writing '" + path + "'");
}

std::string number(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void warn(Streams io, const std::string& message) { io.err << "agrsst: warning: " << message << "\n"; }

struct GrsstArgs {
  std::string regions, id_property = "id", counts, out, trace_out;
  double cellsize = 0.0;
  std::size_t burnin = 30, keep = 20;
  double smoothing = 1e-10, pilot_scale = 3.0;
  std::uint64_t seed = 1;
};

void add_region_options(CLI::App* sub, GrsstArgs& a) {
  sub->add_option("--regions", a.regions, "GeoJSON FeatureCollection of areas")->required();
  sub->add_option("--id-property", a.id_property, "feature property holding the area id");
  sub->add_option("--cellsize", a.cellsize, "grid spacing in map units")->required();
  sub->add_option("--seed", a.seed, "root seed");
}

void add_chain_options(CLI::App* sub, GrsstArgs& a) {
  sub->add_option("--burnin", a.burnin, "discarded iterations B");
  sub->add_option("--keep", a.keep, "averaged iterations L");
  sub->add_option("--smoothing-c", a.smoothing, "S-step smoothing constant c");
  sub->add_option("--pilot-scale", a.pilot_scale, "pilot bandwidth multiplier");
}

ChainConfig chain_config(const GrsstArgs& a, std::uint64_t seed, std::size_t threads) {
  ChainConfig cfg;
  cfg.burnin = a.burnin;
  cfg.keep = a.keep;
  cfg.smoothing = a.smoothing;
  cfg.pilot_scale = a.pilot_scale;
  cfg.seed = seed;
  cfg.threads = threads;
  cfg.validate();
  return cfg;
}

struct Analysis {
  RegionSystem regions;
  GridPtr grid;
};

Analysis load_analysis(const GrsstArgs& a) {
  if (!(a.cellsize > 0.0)) throw Error(ErrorKind::InvalidInput, "--cellsize must be positive");
  Analysis an{load_regions(a.regions, a.id_property), nullptr};
  an.grid = share(build_grid(an.regions, a.cellsize));
  return an;
}

void write_density(const std::string& path, const DensityField& field) {
  write_text(path, format_raster(density_to_raster(field)));
}

// Auxiliary density read from an .asc file and laid onto the analysis grid by
// nearest-cell lookup. Less than 99% coverage of the mask is an input error.
DensityField load_aux_field(const std::string& path, const GridPtr& grid, Streams io) {
  const RasterLayer raster = load_raster(path);
  const Lattice& lat = grid->lattice();
  const bool aligned = raster.ncols == lat.ncols && raster.nrows == lat.nrows &&
                       raster.xllcorner == lat.origin.x && raster.yllcorner == lat.origin.y &&
                       raster.cellsize == lat.delta;
  std::size_t covered = 0;
  auto values = sample_raster_on_grid(raster, *grid, &covered);
  const double coverage = static_cast<double>(covered) / static_cast<double>(grid->mask_count());
  if (coverage < 0.99)
    throw Error(ErrorKind::GridMismatch, "auxiliary raster covers only " + number(100.0 * coverage) +
                                             "% of the grid points (at least 99% required)");
  if (!aligned) warn(io, "auxiliary raster resampled to the analysis grid by nearest cell");
  if (covered < grid->mask_count())
    warn(io, std::to_string(grid->mask_count() - covered) + " grid points have no auxiliary value");
  return DensityField(grid, std::move(values));
}

// Collected after a successful command: what the manifest records.
struct Outcome {
  std::string primary_output; // empty: no manifest
  json extra = json::object();
};

Outcome cmd_grsst(const GrsstArgs& a, std::size_t threads, Streams) {
  const Analysis an = load_analysis(a);
  const AreaCounts counts = load_counts(a.counts, an.regions);
  const auto result = run_grsst(counts, an.regions, an.grid, chain_config(a, a.seed, threads));
  write_density(a.out, result.density);
  if (!a.trace_out.empty()) write_text(a.trace_out, result.trace.to_csv());
  return {a.out};
}

struct AgrsstArgs {
  GrsstArgs g;
  std::string aux, mode = "agrsst", report_out;
  std::optional<double> weight;
};

Outcome cmd_agrsst(const AgrsstArgs& a, std::size_t threads, Streams io) {
  const Analysis an = load_analysis(a.g);
  const AreaCounts counts = load_counts(a.g.counts, an.regions);
  const DensityField aux = load_aux_field(a.aux, an.grid, io);
  Rng rng(derive_seed(a.g.seed, {2}));
  FusionOptions opts;
  opts.forced_weight = a.weight;
  opts.threads = threads;

  std::optional<FusionResult> fused;
  if (a.mode == "agrsst") {
    const auto grsst = run_grsst(counts, an.regions, an.grid, chain_config(a.g, derive_seed(a.g.seed, {1}), threads));
    fused = run_agrsst(grsst.density, aux, counts, an.regions, rng, opts);
  } else {
    if (a.weight) throw Error(ErrorKind::InvalidInput, "--weight applies to --mode agrsst only");
    fused = run_agrsst1(aux, counts, an.regions, rng, opts);
  }
  for (const auto& w : fused->report.warnings) warn(io, w);
  write_density(a.g.out, fused->density);
  const std::string report = a.report_out.empty() ? a.g.out + ".report.txt" : a.report_out;
  write_text(report, fused->report.to_text());
  return {a.g.out};
}

struct AuxArgs {
  GrsstArgs g; // regions, cellsize, seed and chain settings for the fine path
  std::string raster, nir, red, fine_regions, fine_counts;
  std::size_t sample_size = 250000;
  double scale_f = 1.0;
};

Outcome cmd_aux(const AuxArgs& a, std::size_t threads, Streams io) {
  const int sources = !a.raster.empty() + (!a.nir.empty() || !a.red.empty()) +
                      (!a.fine_regions.empty() || !a.fine_counts.empty());
  if (sources != 1)
    throw Error(ErrorKind::InvalidInput,
                "give exactly one of --raster, --ndvi-nir/--ndvi-red or --fine-regions/--fine-counts");
  const Analysis an = load_analysis(a.g);

  std::optional<DensityField> aux;
  if (!a.fine_regions.empty() || !a.fine_counts.empty()) {
    if (a.fine_regions.empty() || a.fine_counts.empty())
      throw Error(ErrorKind::InvalidInput, "--fine-regions and --fine-counts go together");
    const RegionSystem fine = load_regions(a.fine_regions, a.g.id_property);
    const AreaCounts counts = load_counts(a.fine_counts, fine);
    aux = aux_density_from_aggregates(counts, fine, an.grid, chain_config(a.g, a.g.seed, threads));
  } else {
    RasterLayer layer;
    if (!a.raster.empty()) {
      layer = load_raster(a.raster);
    } else {
      if (a.nir.empty() || a.red.empty())
        throw Error(ErrorKind::InvalidInput, "--ndvi-nir and --ndvi-red go together");
      layer = ndvi(load_raster(a.nir), load_raster(a.red));
    }
    if (!(a.scale_f > 0.0)) throw Error(ErrorKind::InvalidInput, "--scale-f must be positive");
    const auto n = static_cast<std::size_t>(std::llround(a.scale_f * static_cast<double>(a.sample_size)));
    for (const auto& w : raster_to_grid_weights(layer, *an.grid).warnings) warn(io, w);
    Rng rng(a.g.seed);
    aux = aux_density_from_raster(layer, an.grid, n, rng, threads);
  }
  write_density(a.g.out, *aux);
  return {a.g.out};
}

struct SimulateArgs {
  std::string config, out;
};

Outcome cmd_simulate(const SimulateArgs& a, std::optional<std::size_t> threads, Streams) {
  SimulationConfig cfg = parse_simulation_config(read_text(a.config));
  if (threads) cfg.threads = *threads;
  const SimulationMaps maps = build_simulation_maps(cfg);
  write_text(a.out, run_monte_carlo(cfg, maps).to_csv());
  Outcome o{a.out};
  o.extra["resolved_config"] = json::parse(simulation_config_to_json(cfg));
  o.extra["seed"] = cfg.seed;
  return o;
}

struct RmiseArgs {
  std::string est, truth;
  bool pixel_weighted = false;
};

Outcome cmd_rmise(const RmiseArgs& a, Streams io) {
  const RasterLayer est = load_raster(a.est);
  const RasterLayer truth = load_raster(a.truth);
  if (!est.same_georef(truth)) throw Error(ErrorKind::GridMismatch, "rasters are not identically georeferenced");
  std::vector<std::size_t> mask;
  for (std::size_t i = 0; i < truth.cells.size(); ++i) {
    const bool a_nd = est.is_nodata(est.cells[i]), b_nd = truth.is_nodata(truth.cells[i]);
    if (a_nd != b_nd) throw Error(ErrorKind::GridMismatch, "rasters have different nodata masks");
    if (!b_nd) mask.push_back(i);
  }
  double value = rmise_values(est.cells, truth.cells, mask);
  if (a.pixel_weighted) value *= truth.cellsize;
  io.out << number(value) << "\n";
  return {};
}

struct RenderArgs {
  std::string in, out;
  bool log = false;
};

Outcome cmd_render(const RenderArgs& a, Streams) {
  const RasterLayer layer = load_raster(a.in);
  write_text(a.out, encode_ppm(render_raster(layer, a.log ? RampScale::PseudoLog : RampScale::Linear)));
  return {a.out};
}

struct MeanArgs {
  std::vector<std::string> in;
  std::string out;
};

Outcome cmd_raster_mean(const MeanArgs& a, Streams) {
  std::vector<RasterLayer> layers;
  layers.reserve(a.in.size());
  for (const auto& p : a.in) layers.push_back(load_raster(p));
  write_text(a.out, format_raster(cellwise_mean(layers)));
  return {a.out};
}

// Resolved parameters of the selected subcommand; paths made absolute.
json collect_params(const CLI::App* sub, json& inputs, json& outputs) {
  json params = json::object();
  for (const CLI::Option* opt : sub->get_options()) {
    if (opt == sub->get_help_ptr()) continue;
    const std::string name = opt->get_single_name();
    if (opt->get_expected_max() == 0) {
      params[name] = opt->count() > 0;
      continue;
    }
    std::vector<std::string> values = opt->results();
    if (values.empty()) {
      if (opt->get_default_str().empty()) continue;
      values.push_back(opt->get_default_str());
    }
    const bool is_input = kInputOptions.count(name) > 0, is_output = kOutputOptions.count(name) > 0;
    if (is_input || is_output) {
      for (auto& v : values) v = fs::absolute(v).lexically_normal().string();
    }
    json value = opt->get_expected_max() > 1 ? json(values) : json(values.front());
    if (is_input) {
      json digests = json::array();
      for (const auto& v : values) digests.push_back({{"path", v}, {"sha256", file_sha256(v)}});
      inputs[name] = digests;
    }
    if (is_output) outputs[name] = value;
    params[name] = value;
  }
  return params;
}

void write_manifest(const std::string& command, const CLI::App* sub, std::optional<std::size_t> threads,
                    const Outcome& outcome) {
  json inputs = json::object(), outputs = json::object();
  json manifest = {{"tool", "agrsst"}, {"version", std::string(kVersion)}, {"command", command}};
  manifest["params"] = collect_params(sub, inputs, outputs);
  manifest["inputs"] = inputs;
  manifest["outputs"] = outputs;
  if (manifest["params"].contains("seed")) manifest["seed"] = manifest["params"]["seed"];
  if (threads) manifest["threads"] = *threads;
  for (const auto& [k, v] : outcome.extra.items()) manifest[k] = v;
  write_text(manifest_path(outcome.primary_output), manifest.dump(2) + "\n");
}

std::vector<std::string> replay_args(const json& manifest, const std::string& out_dir) {
  if (manifest.value("tool", "") != "agrsst") throw Error(ErrorKind::InvalidInput, "not an agrsst manifest");
  for (const auto& [name, entries] : manifest.at("inputs").items()) {
    for (const auto& entry : entries) {
      const std::string path = entry.at("path");
      if (file_sha256(path) != entry.at("sha256").get<std::string>())
        throw Error(ErrorKind::InvalidInput, "input '" + path + "' changed since the manifest was written");
    }
  }
  std::vector<std::string> args{manifest.at("command").get<std::string>()};
  if (manifest.contains("threads")) {
    args.push_back("--threads");
    args.push_back(std::to_string(manifest["threads"].get<std::size_t>()));
  }
  for (const auto& [name, value] : manifest.at("params").items()) {
    if (value.is_boolean()) {
      if (value.get<bool>()) args.push_back("--" + name);
      continue;
    }
    args.push_back("--" + name);
    std::vector<std::string> values =
        value.is_array() ? value.get<std::vector<std::string>>() : std::vector{value.get<std::string>()};
    for (auto& v : values) {
      if (!out_dir.empty() && kOutputOptions.count(name)) v = (fs::path(out_dir) / fs::path(v).filename()).string();
      args.push_back(v);
    }
  }
  return args;
}

int report_error(Streams io, std::string_view kind, std::string message, int code) {
  std::replace(message.begin(), message.end(), '\n', ' ');
  io.err << "agrsst: error[" << kind << "]: " << message << "\n";
  return code;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Streams io{out, err};
  CLI::App app{"Density reconstruction from area-aggregated counts (GRSST, AGRSST, AGRSST1)", "agrsst"};
  app.set_version_flag("--version", "agrsst " + std::string(kVersion));
  app.require_subcommand(1);
  app.fallthrough();
  app.option_defaults()->always_capture_default();
  std::optional<std::size_t> threads;
  app.add_option("--threads", threads, "maximum worker threads (default: all cores)");

  GrsstArgs grsst;
  CLI::App* s_grsst = app.add_subcommand("grsst", "density from area counts");
  add_region_options(s_grsst, grsst);
  add_chain_options(s_grsst, grsst);
  s_grsst->add_option("--counts", grsst.counts, "CSV with area_id,count")->required();
  s_grsst->add_option("--out", grsst.out, "output .asc density")->required();
  s_grsst->add_option("--trace-out", grsst.trace_out, "chain trace CSV");

  AgrsstArgs agrsst;
  CLI::App* s_agrsst = app.add_subcommand("agrsst", "fuse an auxiliary density with GRSST");
  add_region_options(s_agrsst, agrsst.g);
  add_chain_options(s_agrsst, agrsst.g);
  s_agrsst->add_option("--counts", agrsst.g.counts, "CSV with area_id,count")->required();
  s_agrsst->add_option("--aux", agrsst.aux, "auxiliary density .asc")->required();
  s_agrsst->add_option("--mode", agrsst.mode, "agrsst or agrsst1")->check(CLI::IsMember({"agrsst", "agrsst1"}));
  s_agrsst->add_option("--weight", agrsst.weight, "fixed fusion weight in [0, 1] instead of |gamma_hat|");
  s_agrsst->add_option("--out", agrsst.g.out, "output .asc density")->required();
  s_agrsst->add_option("--report-out", agrsst.report_out, "fusion report (default <out>.report.txt)");

  AuxArgs aux;
  CLI::App* s_aux = app.add_subcommand("aux", "auxiliary density from a raster, NDVI bands or fine aggregates");
  add_region_options(s_aux, aux.g);
  add_chain_options(s_aux, aux.g);
  s_aux->add_option("--raster", aux.raster, "weight raster .asc");
  s_aux->add_option("--ndvi-nir", aux.nir, "near-infrared band .asc");
  s_aux->add_option("--ndvi-red", aux.red, "red band .asc");
  s_aux->add_option("--fine-regions", aux.fine_regions, "GeoJSON of the finer areas");
  s_aux->add_option("--fine-counts", aux.fine_counts, "counts CSV for the finer areas");
  s_aux->add_option("--sample-size", aux.sample_size, "raster sample size before scaling");
  s_aux->add_option("--scale-f", aux.scale_f, "multiplier f on the sample size");
  s_aux->add_option("--out", aux.g.out, "output .asc density")->required();

  SimulateArgs sim;
  CLI::App* s_sim = app.add_subcommand("simulate", "Monte-Carlo comparison of the estimators");
  s_sim->add_option("--config", sim.config, "JSON configuration")->required();
  s_sim->add_option("--out", sim.out, "results CSV")->required();

  RmiseArgs rm;
  CLI::App* s_rmise = app.add_subcommand("rmise", "root mean integrated squared error of two .asc grids");
  s_rmise->add_option("--est", rm.est, "estimate .asc")->required();
  s_rmise->add_option("--truth", rm.truth, "reference .asc")->required();
  s_rmise->add_flag("--pixel-weighted", rm.pixel_weighted, "include the pixel area in the root");

  RenderArgs rd;
  CLI::App* s_render = app.add_subcommand("render", "heatmap of an .asc grid as binary PPM");
  s_render->add_option("--in", rd.in, "input .asc")->required();
  s_render->add_option("--out", rd.out, "output .ppm")->required();
  s_render->add_flag("--log", rd.log, "pseudo-log color scale");

  MeanArgs mean;
  CLI::App* s_mean = app.add_subcommand("raster-mean", "cellwise mean of identically georeferenced rasters");
  s_mean->add_option("--in", mean.in, "input .asc files")->required()->expected(1, -1);
  s_mean->add_option("--out", mean.out, "output .asc")->required();

  std::string manifest_file, out_dir;
  CLI::App* s_replay = app.add_subcommand("replay", "re-run a command from its manifest");
  s_replay->add_option("--manifest", manifest_file, "manifest JSON")->required();
  s_replay->add_option("--out-dir", out_dir, "write outputs here instead of the recorded paths");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (threads && *threads > 0) set_default_threads(*threads);
    const std::size_t workers = threads && *threads > 0 ? *threads : default_threads();
    CLI::App* sub = app.get_subcommands().front();
    const std::string command = sub->get_name();
    Outcome outcome;
    if (command == "grsst") outcome = cmd_grsst(grsst, workers, io);
    else if (command == "agrsst") outcome = cmd_agrsst(agrsst, workers, io);
    else if (command == "aux") outcome = cmd_aux(aux, workers, io);
    else if (command == "simulate") outcome = cmd_simulate(sim, threads, io);
    else if (command == "rmise") outcome = cmd_rmise(rm, io);
    else if (command == "render") outcome = cmd_render(rd, io);
    else if (command == "raster-mean") outcome = cmd_raster_mean(mean, io);
    else if (command == "replay") {
      json manifest;
      try {
        manifest = json::parse(read_text(manifest_file));
      } catch (const json::exception& e) {
        throw Error(ErrorKind::InvalidInput, "manifest: " + std::string(e.what()));
      }
      if (!out_dir.empty()) fs::create_directories(out_dir);
      return run(replay_args(manifest, out_dir), out, err);
    }
    if (!outcome.primary_output.empty()) write_manifest(command, sub, threads, outcome);
    return 0;
  } catch (const Error& e) {
    return report_error(io, to_string(e.kind()), e.what(), is_numerical(e.kind()) ? 3 : 2);
  } catch (const json::exception& e) {
    return report_error(io, "InvalidInput", e.what(), 2);
  } catch (const fs::filesystem_error& e) {
    return report_error(io, "InvalidInput", e.what(), 2);
  } catch (const std::logic_error& e) {
    return report_error(io, "Internal", e.what(), 3);
  } catch (const std::exception& e) {
    return report_error(io, "NumericalFailure", e.what(), 3);
  }
}

} // namespace agrsst::cli
