#include "agrsst/augment.hpp"
#include "agrsst/auxiliary.hpp"
#include "agrsst/cli.hpp"
#include "agrsst/error.hpp"
#include "agrsst/grsst.hpp"
#include "agrsst/kde.hpp"
#include "agrsst/raster.hpp"
#include "agrsst/render.hpp"
#include "agrsst/simulation.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <sstream>

namespace py = pybind11;
using namespace agrsst;

namespace {

// Python-side handle; DensityField keeps its own reference to the grid.
struct Grid {
  GridPtr ptr;
};

AreaCounts to_counts(const py::object& counts, const RegionSystem& regions) {
  std::vector<std::uint64_t> c(regions.size(), 0);
  if (py::isinstance<py::dict>(counts)) {
    for (const auto& [key, value] : counts.cast<py::dict>()) {
      const auto id = py::str(key).cast<std::string>();
      const auto d = regions.find(id);
      if (!d) throw Error(ErrorKind::InvalidInput, "unknown area id '" + id + "'");
      c[*d] = value.cast<std::uint64_t>();
    }
  } else {
    c = counts.cast<std::vector<std::uint64_t>>();
    if (c.size() != regions.size())
      throw Error(ErrorKind::InvalidInput, "expected " + std::to_string(regions.size()) + " counts, got " +
                                               std::to_string(c.size()));
  }
  return AreaCounts(std::move(c));
}

ChainConfig chain(std::size_t burnin, std::size_t keep, double smoothing_c, double pilot_scale, std::uint64_t seed,
                  std::size_t threads) {
  ChainConfig cfg;
  cfg.burnin = burnin;
  cfg.keep = keep;
  cfg.smoothing = smoothing_c;
  cfg.pilot_scale = pilot_scale;
  cfg.seed = seed;
  cfg.threads = threads;
  cfg.validate();
  return cfg;
}

// Lattice-shaped copy: row 0 is the southernmost row.
py::array_t<double> lattice_array(const Lattice& lat, std::span<const double> values) {
  py::array_t<double> out({lat.nrows, lat.ncols});
  std::copy(values.begin(), values.end(), out.mutable_data());
  return out;
}

std::vector<GeoPoint> to_points(const py::array_t<double, py::array::c_style | py::array::forcecast>& xy) {
  if (xy.ndim() != 2 || xy.shape(1) != 2) throw Error(ErrorKind::InvalidInput, "points must have shape (n, 2)");
  std::vector<GeoPoint> pts(static_cast<std::size_t>(xy.shape(0)));
  const double* p = xy.data();
  for (auto& q : pts) {
    q = {p[0], p[1]};
    p += 2;
  }
  return pts;
}

py::dict report_dict(const FusionReport& r) {
  py::dict d;
  d["mode"] = r.mode == FusionMode::Agrsst ? "AGRSST" : "AGRSST1";
  d["gamma_hat"] = r.gamma_hat;
  d["inverted"] = r.inverted;
  d["weight_used"] = r.weight_used;
  d["warnings"] = r.warnings;
  return d;
}

} // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Density reconstruction from area-aggregated counts";
  m.attr("__version__") = std::string(cli::kVersion);

  // Message carries the error kind: "[AllZeroWeights] ...".
  PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> error_type;
  error_type.call_once_and_store_result(
      [&]() { return py::exception<Error>(m, "AgrsstError", PyExc_ValueError); });
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error_type.get_stored(), ("[" + std::string(to_string(e.kind())) + "] " + e.what()).c_str());
    }
  });

  py::class_<RegionSystem>(m, "Regions")
      .def_static("from_geojson", &parse_regions, py::arg("text"), py::arg("id_property") = "id")
      .def_static("load", [](const std::string& path, const std::string& id) { return load_regions(path, id); },
                  py::arg("path"), py::arg("id_property") = "id")
      .def_static(
          "rectangular",
          [](double xmin, double ymin, double xmax, double ymax, std::size_t nx, std::size_t ny,
             const std::string& prefix) { return rectangular_partition({xmin, ymin, xmax, ymax}, nx, ny, prefix); },
          py::arg("xmin"), py::arg("ymin"), py::arg("xmax"), py::arg("ymax"), py::arg("nx"), py::arg("ny"),
          py::arg("prefix") = "")
      .def("__len__", &RegionSystem::size)
      .def_property_readonly("ids",
                             [](const RegionSystem& r) {
                               std::vector<std::string> ids;
                               for (const auto& a : r.areas()) ids.push_back(a.id);
                               return ids;
                             })
      .def_property_readonly("sizes",
                             [](const RegionSystem& r) {
                               std::vector<double> s;
                               for (const auto& a : r.areas()) s.push_back(a.size);
                               return s;
                             })
      .def("to_geojson", [](const RegionSystem& r, const std::string& id) { return regions_to_geojson(r, id); },
           py::arg("id_property") = "id");

  py::class_<Grid>(m, "Grid")
      .def(py::init([](const RegionSystem& regions, double cellsize) { return Grid{share(build_grid(regions, cellsize))}; }),
           py::arg("regions"), py::arg("cellsize"))
      .def_property_readonly("shape", [](const Grid& g) { return py::make_tuple(g.ptr->lattice().nrows, g.ptr->lattice().ncols); })
      .def_property_readonly("cellsize", [](const Grid& g) { return g.ptr->lattice().delta; })
      .def_property_readonly("origin", [](const Grid& g) { return py::make_tuple(g.ptr->lattice().origin.x, g.ptr->lattice().origin.y); })
      .def_property_readonly("mask_count", [](const Grid& g) { return g.ptr->mask_count(); })
      .def_property_readonly("assignment", [](const Grid& g) {
        const Lattice& lat = g.ptr->lattice();
        py::array_t<int> out({lat.nrows, lat.ncols});
        std::copy(g.ptr->assignments().begin(), g.ptr->assignments().end(), out.mutable_data());
        return out;
      });

  py::class_<DensityField>(m, "Density")
      .def_property_readonly("values", [](const DensityField& f) { return lattice_array(f.grid().lattice(), f.values()); })
      .def_property_readonly("grid", [](const DensityField& f) { return Grid{f.grid_ptr()}; })
      .def("integral", &DensityField::integral)
      .def("area_means", [](const DensityField& f) { return area_mean_density(f); })
      .def("to_asc", [](const DensityField& f) { return format_raster(density_to_raster(f)); });

  py::class_<RasterLayer>(m, "Raster")
      .def_static("parse", [](const std::string& text) { return parse_raster(text); }, py::arg("text"))
      .def_static("load", [](const std::string& path) { return load_raster(path); }, py::arg("path"))
      .def_readonly("ncols", &RasterLayer::ncols)
      .def_readonly("nrows", &RasterLayer::nrows)
      .def_readonly("cellsize", &RasterLayer::cellsize)
      .def_readonly("nodata", &RasterLayer::nodata)
      .def_property_readonly("cells",
                             [](const RasterLayer& r) {
                               py::array_t<double> out({r.nrows, r.ncols});
                               std::copy(r.cells.begin(), r.cells.end(), out.mutable_data());
                               return out;
                             })
      .def("to_asc", [](const RasterLayer& r) { return format_raster(r); });

  m.def("ndvi", &ndvi, py::arg("nir"), py::arg("red"));

  m.def("select_bandwidth",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& xy) {
          const Bandwidth bw = select_bandwidth(to_points(xy));
          return py::make_tuple(bw.hx, bw.hy);
        },
        py::arg("points"), "Scott's rule bandwidth (hx, hy) for an (n, 2) array.");
  m.def("evaluate_kde",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& xy, double hx, double hy,
           const Grid& g) { return evaluate_kde(to_points(xy), {hx, hy}, g.ptr); },
        py::arg("points"), py::arg("hx"), py::arg("hy"), py::arg("grid"));

  m.def(
      "run_grsst",
      [](const py::object& counts, const RegionSystem& regions, const Grid& g, std::size_t burnin, std::size_t keep,
         double smoothing_c, double pilot_scale, std::uint64_t seed, std::size_t threads) {
        const AreaCounts c = to_counts(counts, regions);
        const ChainConfig cfg = chain(burnin, keep, smoothing_c, pilot_scale, seed, threads);
        std::optional<GrsstResult> res;
        {
          py::gil_scoped_release release;
          res = run_grsst(c, regions, g.ptr, cfg);
        }
        py::array_t<double> trace({res->trace.length(), res->trace.probes.size()});
        double* out = trace.mutable_data();
        for (const auto& row : res->trace.values) out = std::copy(row.begin(), row.end(), out);
        return py::make_tuple(res->density, trace);
      },
      py::arg("counts"), py::arg("regions"), py::arg("grid"), py::arg("burnin") = 30, py::arg("keep") = 20,
      py::arg("smoothing_c") = 1e-10, py::arg("pilot_scale") = 3.0, py::arg("seed") = 0, py::arg("threads") = 1,
      "GRSST density and the probe trace (rows: pilot then iterations).");

  m.def(
      "run_agrsst",
      [](const DensityField& grsst, const DensityField& aux, const py::object& counts, const RegionSystem& regions,
         std::uint64_t seed, std::optional<double> weight) {
        Rng rng(seed);
        FusionOptions opts;
        opts.forced_weight = weight;
        auto res = run_agrsst(grsst, aux, to_counts(counts, regions), regions, rng, opts);
        return py::make_tuple(res.density, report_dict(res.report));
      },
      py::arg("grsst"), py::arg("aux"), py::arg("counts"), py::arg("regions"), py::arg("seed") = 0,
      py::arg("weight") = py::none());
  m.def(
      "run_agrsst1",
      [](const DensityField& aux, const py::object& counts, const RegionSystem& regions, std::uint64_t seed) {
        Rng rng(seed);
        auto res = run_agrsst1(aux, to_counts(counts, regions), regions, rng);
        return py::make_tuple(res.density, report_dict(res.report));
      },
      py::arg("aux"), py::arg("counts"), py::arg("regions"), py::arg("seed") = 0);
  m.def(
      "correlation_weight",
      [](const std::vector<double>& m_aux, const std::vector<double>& m_grsst) { return correlation_weight(m_aux, m_grsst); },
      py::arg("m_aux"), py::arg("m_grsst"));

  m.def(
      "aux_from_raster",
      [](const RasterLayer& raster, const Grid& g, std::size_t sample_size, std::uint64_t seed) {
        Rng rng(seed);
        return aux_density_from_raster(raster, g.ptr, sample_size, rng);
      },
      py::arg("raster"), py::arg("grid"), py::arg("sample_size") = 250000, py::arg("seed") = 0);
  m.def(
      "aux_from_aggregates",
      [](const py::object& counts, const RegionSystem& fine, const Grid& g, std::size_t burnin, std::size_t keep,
         std::uint64_t seed) {
        return aux_density_from_aggregates(to_counts(counts, fine), fine, g.ptr, chain(burnin, keep, 1e-10, 3.0, seed, 1));
      },
      py::arg("counts"), py::arg("fine_regions"), py::arg("grid"), py::arg("burnin") = 30, py::arg("keep") = 20,
      py::arg("seed") = 0);

  m.def("rmise", &rmise, py::arg("est"), py::arg("truth"));
  m.def("rmise_pixel_weighted", &rmise_pixel_weighted, py::arg("est"), py::arg("truth"));

  m.def(
      "simulate",
      [](const std::string& config_json) {
        const SimulationConfig cfg = parse_simulation_config(config_json);
        py::gil_scoped_release release;
        return run_monte_carlo(cfg, build_simulation_maps(cfg)).to_csv();
      },
      py::arg("config_json"), "Monte-Carlo protocol; returns the results CSV text.");

  m.def(
      "render_ppm",
      [](const RasterLayer& r, bool log) {
        return py::bytes(encode_ppm(render_raster(r, log ? RampScale::PseudoLog : RampScale::Linear)));
      },
      py::arg("raster"), py::arg("log") = false);

  m.def(
      "cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = cli::run(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command-line tool in-process; returns (exit code, stdout, stderr).");
}
