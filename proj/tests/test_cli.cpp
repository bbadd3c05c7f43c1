#include "agrsst/cli.hpp"
#include "agrsst/geometry.hpp"
#include "agrsst/raster.hpp"
#include "support.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <sstream>

using namespace agrsst;
using namespace agrsst::test;
using nlohmann::json;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome agrsst_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

const char* const kUnitSquareGeoJson = R"({"type": "FeatureCollection", "features": [
  {"type": "Feature", "properties": {"id": "S"},
   "geometry": {"type": "Polygon", "coordinates": [[[0,0],[1,0],[1,1],[0,1],[0,0]]]}}]})";

std::string nine_csv() {
  return "area_id,count\nA0_0,400\nA0_1,50\nA0_2,20\nA1_0,300\nA1_1,200\nA1_2,10\nA2_0,100\nA2_1,80\nA2_2,30\n";
}

double integral(const RasterLayer& r) {
  double s = 0.0;
  for (double v : r.cells)
    if (!r.is_nodata(v)) s += v * r.cellsize * r.cellsize;
  return s;
}

std::string const_raster(double x0, double y0, double size, std::size_t n, double value) {
  RasterLayer l;
  l.ncols = l.nrows = n;
  l.xllcorner = x0;
  l.yllcorner = y0;
  l.cellsize = size;
  l.cells.assign(n * n, value);
  return format_raster(l);
}

struct Fixture {
  TempDir dir;
  std::string square = dir.write("square.geojson", kUnitSquareGeoJson);
  std::string nine = dir.write("nine.geojson", regions_to_geojson(rectangular_partition({0, 0, 3, 3}, 3, 3, "A")));
  std::string nine_counts = dir.write("nine.csv", nine_csv());
};

} // namespace

TEST_CASE("--version and --help") {
  const auto v = agrsst_cli({"--version"});
  CHECK(v.code == 0);
  CHECK(v.out == "agrsst " + std::string(cli::kVersion) + "\n");
  const auto h = agrsst_cli({"--help"});
  CHECK(h.code == 0);
  for (const char* sub : {"grsst", "agrsst", "aux", "simulate", "rmise", "render", "raster-mean", "replay"})
    CHECK(h.out.find(sub) != std::string::npos);
  CHECK(agrsst_cli({"grsst", "--help"}).out.find("--smoothing-c") != std::string::npos);
  CHECK(agrsst_cli({}).code == 2);
  CHECK(agrsst_cli({"grsst", "--bogus"}).code == 2);
}

TEST_CASE("grsst writes a unit-mass density, a trace and a manifest") {
  Fixture f;
  const auto counts = f.dir.write("c.csv", "area_id,count\nS,500\n");
  const auto r = agrsst_cli({"grsst", "--regions", f.square, "--counts", counts, "--cellsize", "0.05", "--burnin",
                             "3", "--keep", "3", "--seed", "5", "--out", f.dir.file("g.asc"), "--trace-out",
                             f.dir.file("trace.csv")});
  REQUIRE(r.code == 0);
  CHECK(std::abs(integral(load_raster(f.dir.file("g.asc"))) - 1.0) <= 1e-6);
  CHECK(slurp(f.dir.file("trace.csv")).rfind("iteration,", 0) == 0);

  const json m = json::parse(slurp(cli::manifest_path(f.dir.file("g.asc"))));
  CHECK(m["tool"] == "agrsst");
  CHECK(m["version"] == cli::kVersion);
  CHECK(m["command"] == "grsst");
  CHECK(m["seed"] == "5");
  CHECK(m["params"]["burnin"] == "3");
  CHECK(m["params"]["smoothing-c"] == "1e-10");
  CHECK(m["inputs"]["counts"][0]["sha256"] == cli::file_sha256(counts));
  CHECK(m["outputs"]["out"] == f.dir.file("g.asc"));
}

TEST_CASE("grsst output does not depend on --threads") {
  Fixture f;
  const auto run = [&](const std::string& threads, const std::string& out) {
    return agrsst_cli({"--threads", threads, "grsst", "--regions", f.nine, "--counts", f.nine_counts, "--cellsize",
                       "0.1", "--burnin", "2", "--keep", "2", "--out", f.dir.file(out)})
        .code;
  };
  REQUIRE(run("1", "a.asc") == 0);
  REQUIRE(run("3", "b.asc") == 0);
  CHECK(slurp(f.dir.file("a.asc")) == slurp(f.dir.file("b.asc")));
}

TEST_CASE("input errors exit with 2 and one machine-readable line") {
  Fixture f;
  const auto bad = f.dir.write("bad.csv", "area_id,n\nS,5\n");
  const auto r = agrsst_cli({"grsst", "--regions", f.square, "--counts", bad, "--cellsize", "0.1", "--out",
                             f.dir.file("g.asc")});
  CHECK(r.code == 2);
  CHECK(r.err.rfind("agrsst: error[InvalidInput]: ", 0) == 0);
  CHECK(r.err.find("'count'") != std::string::npos);
  CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);

  const auto unknown = f.dir.write("u.csv", "area_id,count\nZ,5\n");
  CHECK(agrsst_cli({"grsst", "--regions", f.square, "--counts", unknown, "--cellsize", "0.1", "--out",
                    f.dir.file("g.asc")})
            .err.find("unknown area_id 'Z'") != std::string::npos);

  const auto coarse = agrsst_cli({"grsst", "--regions", f.square, "--counts", f.dir.write("c.csv", "area_id,count\nS,5\n"),
                                  "--cellsize", "2", "--out", f.dir.file("g.asc")});
  CHECK(coarse.code == 2);
  CHECK(coarse.err.find("error[EmptyAreaAtResolution]") != std::string::npos);
}

TEST_CASE("agrsst") {
  Fixture f;
  const auto base = std::vector<std::string>{"--regions", f.nine, "--counts", f.nine_counts, "--cellsize", "0.1",
                                             "--burnin", "3", "--keep", "3"};
  auto with = [&](std::string cmd, std::vector<std::string> extra) {
    std::vector<std::string> args{std::move(cmd)};
    args.insert(args.end(), base.begin(), base.end());
    args.insert(args.end(), extra.begin(), extra.end());
    return agrsst_cli(args);
  };
  REQUIRE(with("grsst", {"--out", f.dir.file("g.asc")}).code == 0);

  SUBCASE("self-fusion gives a weight near 1 and a report") {
    const auto r = with("agrsst", {"--aux", f.dir.file("g.asc"), "--out", f.dir.file("a.asc")});
    REQUIRE(r.code == 0);
    CHECK(std::abs(integral(load_raster(f.dir.file("a.asc"))) - 1.0) <= 1e-6);
    const std::string report = slurp(f.dir.file("a.asc") + ".report.txt");
    CHECK(report.rfind("mode=AGRSST\n", 0) == 0);
    const auto pos = report.find("weight_used=");
    REQUIRE(pos != std::string::npos);
    CHECK(std::stod(report.substr(pos + 12)) > 0.9);
    CHECK(r.err.empty());
  }
  SUBCASE("agrsst1 uses weight 1 whatever gamma_hat is") {
    const auto r = with("agrsst", {"--aux", f.dir.file("g.asc"), "--mode", "agrsst1", "--out", f.dir.file("a1.asc"),
                                   "--report-out", f.dir.file("rep.txt")});
    REQUIRE(r.code == 0);
    const std::string report = slurp(f.dir.file("rep.txt"));
    CHECK(report.rfind("mode=AGRSST1\n", 0) == 0);
    CHECK(report.find("weight_used=1\n") != std::string::npos);
  }
  SUBCASE("--weight fixes the fusion weight") {
    REQUIRE(with("agrsst", {"--aux", f.dir.file("g.asc"), "--weight", "0.25", "--out", f.dir.file("w.asc")}).code == 0);
    CHECK(slurp(f.dir.file("w.asc") + ".report.txt").find("weight_used=0.25\n") != std::string::npos);
    CHECK(with("agrsst", {"--aux", f.dir.file("g.asc"), "--weight", "2", "--out", f.dir.file("w.asc")}).code == 2);
  }
  SUBCASE("an aux raster elsewhere on the map is rejected") {
    const auto far = f.dir.write("far.asc", const_raster(100, 100, 0.1, 30, 1.0));
    const auto r = with("agrsst", {"--aux", far, "--out", f.dir.file("x.asc")});
    CHECK(r.code == 2);
    CHECK(r.err.find("error[GridMismatch]") != std::string::npos);
  }
  SUBCASE("a misaligned but covering aux raster is resampled with a warning") {
    const auto shifted = f.dir.write("s.asc", const_raster(-0.5, -0.5, 0.07, 60, 1.0));
    const auto r = with("agrsst", {"--aux", shifted, "--out", f.dir.file("s_out.asc")});
    CHECK(r.code == 0);
    CHECK(r.err.find("agrsst: warning: auxiliary raster resampled") != std::string::npos);
  }
}

TEST_CASE("aux") {
  Fixture f;
  SUBCASE("constant raster gives a near-uniform density") {
    const auto raster = f.dir.write("r.asc", const_raster(0, 0, 0.5, 2, 3.0));
    REQUIRE(agrsst_cli({"aux", "--regions", f.square, "--cellsize", "0.05", "--raster", raster, "--sample-size",
                        "500000", "--scale-f", "2", "--out", f.dir.file("aux.asc")})
                .code == 0);
    const auto out = load_raster(f.dir.file("aux.asc"));
    CHECK(std::abs(integral(out) - 1.0) <= 1e-6);
    double worst = 0.0;
    for (std::size_t r = 0; r < out.nrows; ++r)
      for (std::size_t c = 0; c < out.ncols; ++c) {
        const double x = out.xllcorner + (c + 0.5) * out.cellsize;
        const double y = out.yllcorner + (out.nrows - r - 0.5) * out.cellsize;
        if (x < 0.1 || x > 0.9 || y < 0.1 || y > 0.9) continue;
        worst = std::max(worst, std::abs(out.at(r, c) - 1.0));
      }
    CHECK(worst <= 0.15);
  }
  SUBCASE("equal NDVI bands give no weight and exit 3") {
    const auto band = f.dir.write("b.asc", const_raster(0, 0, 0.5, 2, 0.4));
    const auto r = agrsst_cli({"aux", "--regions", f.square, "--cellsize", "0.1", "--ndvi-nir", band, "--ndvi-red",
                               band, "--out", f.dir.file("n.asc")});
    CHECK(r.code == 3);
    CHECK(r.err.rfind("agrsst: error[AllZeroWeights]: ", 0) == 0);
  }
  SUBCASE("fine aggregates are deterministic per seed") {
    const auto fine = f.dir.write("fine.geojson", regions_to_geojson(rectangular_partition({0, 0, 1, 1}, 2, 2, "Q")));
    const auto counts = f.dir.write("fc.csv", "area_id,count\nQ0_0,300\nQ0_1,20\nQ1_0,80\nQ1_1,5\n");
    for (const char* out : {"f1.asc", "f2.asc"})
      REQUIRE(agrsst_cli({"aux", "--regions", f.square, "--cellsize", "0.05", "--fine-regions", fine, "--fine-counts",
                          counts, "--burnin", "3", "--keep", "3", "--seed", "9", "--out", f.dir.file(out)})
                  .code == 0);
    CHECK(slurp(f.dir.file("f1.asc")) == slurp(f.dir.file("f2.asc")));
  }
  SUBCASE("exactly one source") {
    const auto raster = f.dir.write("r.asc", const_raster(0, 0, 0.5, 2, 3.0));
    CHECK(agrsst_cli({"aux", "--regions", f.square, "--cellsize", "0.1", "--out", f.dir.file("x.asc")}).code == 2);
    CHECK(agrsst_cli({"aux", "--regions", f.square, "--cellsize", "0.1", "--raster", raster, "--ndvi-nir", raster,
                      "--ndvi-red", raster, "--out", f.dir.file("x.asc")})
              .code == 2);
  }
}

TEST_CASE("simulate") {
  TempDir dir;
  const auto cfg = dir.write("cfg.json", R"({"preset": "desk-small", "seed": 3})");
  REQUIRE(agrsst_cli({"simulate", "--config", cfg, "--out", dir.file("a.csv")}).code == 0);
  const std::string csv = slurp(dir.file("a.csv"));
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 4 * 4 * 4);
  CHECK(csv.rfind("run,distortion,estimator,rmise,gamma_hat,seconds\n", 0) == 0);
  REQUIRE(agrsst_cli({"--threads", "2", "simulate", "--config", cfg, "--out", dir.file("b.csv")}).code == 0);
  CHECK(slurp(dir.file("b.csv")) == csv);
  const json m = json::parse(slurp(cli::manifest_path(dir.file("a.csv"))));
  CHECK(m["resolved_config"]["runs"] == 4);
  CHECK(m["seed"] == 3);

  const auto bad = dir.write("bad.json", "{\"runs\": 4,\n \"seed\": }");
  const auto r = agrsst_cli({"simulate", "--config", bad, "--out", dir.file("c.csv")});
  CHECK(r.code == 2);
  CHECK(r.err.find("invalid JSON at byte ") != std::string::npos);
}

TEST_CASE("rmise") {
  TempDir dir;
  const auto a = dir.write("a.asc", const_raster(0, 0, 1, 2, 0.7));
  const auto b = dir.write("b.asc", const_raster(0, 0, 1, 2, 0.25));
  auto value = [&](std::vector<std::string> args) {
    args.insert(args.begin(), "rmise");
    const auto r = agrsst_cli(args);
    REQUIRE(r.code == 0);
    return std::stod(r.out);
  };
  CHECK(value({"--est", a, "--truth", a}) == 0.0);
  CHECK(value({"--est", a, "--truth", b}) == doctest::Approx(0.45).epsilon(1e-15));
  const auto e = dir.write("e.asc", "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 0.5\n0.1 0.2\n0.3 0.4\n");
  const auto t = dir.write("t.asc", "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 0.5\n0.2 0.2\n0.2 0.4\n");
  CHECK(std::abs(value({"--est", e, "--truth", t}) - std::sqrt(0.005)) <= 1e-12);
  CHECK(std::abs(value({"--est", e, "--truth", t, "--pixel-weighted"}) - 0.5 * std::sqrt(0.005)) <= 1e-12);
  CHECK(!std::filesystem::exists(cli::manifest_path(e)));
  const auto other = dir.write("o.asc", const_raster(1, 0, 1, 2, 0.7));
  CHECK(agrsst_cli({"rmise", "--est", a, "--truth", other}).code == 2);
}

TEST_CASE("render and raster-mean") {
  TempDir dir;
  const auto in = dir.write("in.asc", "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n0 1\n2 4\n");
  REQUIRE(agrsst_cli({"render", "--in", in, "--out", dir.file("h.ppm")}).code == 0);
  const std::string ppm = slurp(dir.file("h.ppm"));
  CHECK(ppm == std::string("P6\n2 2\n255\n") + std::string("\x00\x00\x04\x57\x10\x6e\xbc\x37\x54\xfc\xff\xa4", 12));
  REQUIRE(agrsst_cli({"render", "--in", in, "--out", dir.file("l.ppm"), "--log"}).code == 0);
  CHECK(slurp(dir.file("l.ppm")) != ppm);

  const auto a = dir.write("a.asc", "ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 -9999\n");
  const auto b = dir.write("b.asc", "ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\n3 6\n");
  REQUIRE(agrsst_cli({"raster-mean", "--in", a, b, "--out", dir.file("m.asc")}).code == 0);
  CHECK(load_raster(dir.file("m.asc")).cells == std::vector<double>{2, 6});
}

TEST_CASE("replay reproduces every command byte for byte") {
  Fixture f;
  const auto raster = f.dir.write("r.asc", const_raster(0, 0, 0.5, 6, 2.0));
  const std::vector<std::vector<std::string>> commands{
      {"grsst", "--regions", f.nine, "--counts", f.nine_counts, "--cellsize", "0.1", "--burnin", "2", "--keep", "2",
       "--seed", "11", "--out", f.dir.file("g.asc"), "--trace-out", f.dir.file("g.trace.csv")},
      {"--threads", "2", "agrsst", "--regions", f.nine, "--counts", f.nine_counts, "--cellsize", "0.1", "--burnin",
       "2", "--keep", "2", "--aux", raster, "--out", f.dir.file("a.asc")},
      {"aux", "--regions", f.nine, "--cellsize", "0.1", "--raster", raster, "--sample-size", "5000", "--out",
       f.dir.file("x.asc")},
      {"render", "--in", f.dir.file("g.asc"), "--out", f.dir.file("g.ppm"), "--log"},
      {"raster-mean", "--in", f.dir.file("g.asc"), f.dir.file("x.asc"), "--out", f.dir.file("m.asc")},
      {"simulate", "--config", f.dir.write("cfg.json", R"({"preset": "desk-small", "runs": 2})"), "--out",
       f.dir.file("s.csv")},
  };
  const std::vector<std::vector<std::string>> outputs{
      {"g.asc", "g.trace.csv"}, {"a.asc", "a.asc.report.txt"}, {"x.asc"}, {"g.ppm"}, {"m.asc"}, {"s.csv"}};
  for (std::size_t i = 0; i < commands.size(); ++i) {
    CAPTURE(i);
    REQUIRE(agrsst_cli(commands[i]).code == 0);
    const std::string replay_dir = f.dir.file("replay" + std::to_string(i));
    const auto r = agrsst_cli({"replay", "--manifest", cli::manifest_path(f.dir.file(outputs[i][0])), "--out-dir",
                               replay_dir});
    REQUIRE(r.code == 0);
    for (const auto& name : outputs[i]) {
      const std::string replayed = (std::filesystem::path(replay_dir) / name).string();
      REQUIRE(std::filesystem::exists(replayed));
      CHECK(slurp(replayed) == slurp(f.dir.file(name)));
    }
  }

  f.dir.write("nine.csv", nine_csv() + "\n");
  const auto changed = agrsst_cli({"replay", "--manifest", cli::manifest_path(f.dir.file("g.asc"))});
  CHECK(changed.code == 2);
  CHECK(changed.err.find("changed since the manifest was written") != std::string::npos);
}
