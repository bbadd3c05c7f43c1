#include "agrsst/kde.hpp"

#include "agrsst/error.hpp"
#include "agrsst/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>

namespace agrsst {

Bandwidth select_bandwidth(std::span<const GeoPoint> points) {
  const std::size_t n = points.size();
  if (n < 2) throw Error(ErrorKind::DegenerateSample, "bandwidth selection needs at least 2 points");
  double mx = 0.0, my = 0.0;
  for (const auto& p : points) {
    mx += p.x;
    my += p.y;
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, syy = 0.0;
  for (const auto& p : points) {
    sxx += (p.x - mx) * (p.x - mx);
    syy += (p.y - my) * (p.y - my);
  }
  const double sdx = std::sqrt(sxx / static_cast<double>(n - 1));
  const double sdy = std::sqrt(syy / static_cast<double>(n - 1));
  if (!(sdx > 0.0) || !(sdy > 0.0) || !std::isfinite(sdx) || !std::isfinite(sdy))
    throw Error(ErrorKind::DegenerateSample, "sample has no spread along one axis");
  const double factor = std::pow(static_cast<double>(n), -1.0 / 6.0);
  return {sdx * factor, sdy * factor};
}

namespace {

constexpr double kInvSqrt2Pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;

void check_bandwidth(const Bandwidth& bw) {
  if (!(bw.hx > 0.0) || !(bw.hy > 0.0) || !std::isfinite(bw.hx) || !std::isfinite(bw.hy))
    throw Error(ErrorKind::InvalidInput, "bandwidth must be positive and finite");
}

std::size_t window(double h, double delta, double truncation, std::size_t n) {
  const double w = std::ceil(truncation * h / delta);
  if (w >= static_cast<double>(n)) return n == 0 ? 0 : n - 1;
  return static_cast<std::size_t>(w);
}

// Pixel counts when every point sits on a centroid, nullopt otherwise.
std::optional<std::vector<double>> bin_exact(std::span<const GeoPoint> points, const Lattice& lat) {
  std::vector<double> counts(lat.size(), 0.0);
  const double tol = 1e-9 * lat.delta;
  for (const auto& p : points) {
    const double fc = std::round((p.x - lat.origin.x) / lat.delta - 0.5);
    const double fr = std::round((p.y - lat.origin.y) / lat.delta - 0.5);
    if (fc < 0.0 || fr < 0.0 || fc >= static_cast<double>(lat.ncols) || fr >= static_cast<double>(lat.nrows))
      return std::nullopt;
    const auto c = static_cast<std::size_t>(fc);
    const auto r = static_cast<std::size_t>(fr);
    const GeoPoint g = lat.centroid(lat.index(r, c));
    if (std::abs(g.x - p.x) > tol || std::abs(g.y - p.y) > tol) return std::nullopt;
    counts[lat.index(r, c)] += 1.0;
  }
  return counts;
}

std::vector<double> kernel_taps(double h, double delta, std::size_t w) {
  std::vector<double> taps(w + 1);
  for (std::size_t k = 0; k <= w; ++k) {
    const double u = static_cast<double>(k) * delta / h;
    taps[k] = kInvSqrt2Pi * std::exp(-0.5 * u * u);
  }
  return taps;
}

std::vector<double> binned_values(const std::vector<double>& counts, const Bandwidth& bw,
                                  const Lattice& lat, const KdeOptions& options) {
  const std::size_t nc = lat.ncols, nr = lat.nrows;
  const std::size_t wx = window(bw.hx, lat.delta, options.truncation, nc);
  const std::size_t wy = window(bw.hy, lat.delta, options.truncation, nr);
  const auto kx = kernel_taps(bw.hx, lat.delta, wx);
  const auto ky = kernel_taps(bw.hy, lat.delta, wy);

  // Pass 1: scatter every occupied pixel along its row.
  std::vector<double> rows(lat.size(), 0.0);
  parallel_for(nr, options.threads, [&](std::size_t rb, std::size_t re) {
    for (std::size_t r = rb; r < re; ++r) {
      const double* in = counts.data() + r * nc;
      double* out = rows.data() + r * nc;
      for (std::size_t c = 0; c < nc; ++c) {
        const double m = in[c];
        if (m == 0.0) continue;
        const std::size_t lo = c > wx ? c - wx : 0;
        const std::size_t hi = std::min(nc - 1, c + wx);
        for (std::size_t t = lo; t <= hi; ++t) out[t] += m * kx[t > c ? t - c : c - t];
      }
    }
  });

  // Pass 2: gather along columns, one output row at a time.
  std::vector<double> out(lat.size(), 0.0);
  parallel_for(nr, options.threads, [&](std::size_t rb, std::size_t re) {
    for (std::size_t r = rb; r < re; ++r) {
      double* dst = out.data() + r * nc;
      const std::size_t lo = r > wy ? r - wy : 0;
      const std::size_t hi = std::min(nr - 1, r + wy);
      for (std::size_t s = lo; s <= hi; ++s) {
        const double k = ky[s > r ? s - r : r - s];
        const double* src = rows.data() + s * nc;
        for (std::size_t c = 0; c < nc; ++c) dst[c] += k * src[c];
      }
    }
  });
  return out;
}

std::vector<double> windowed_values(std::span<const GeoPoint> points, const Bandwidth& bw,
                                    const Lattice& lat, const KdeOptions& options) {
  const std::size_t nc = lat.ncols, nr = lat.nrows;
  const double rx = options.truncation * bw.hx, ry = options.truncation * bw.hy;
  std::vector<double> out(lat.size(), 0.0);
  // Threads own disjoint row bands and visit points in input order, so each
  // pixel accumulates in the same order for any thread count.
  parallel_for(nr, options.threads, [&](std::size_t rb, std::size_t re) {
    std::vector<double> kx(nc);
    for (const auto& p : points) {
      const double fr0 = std::ceil((p.y - ry - lat.origin.y) / lat.delta - 0.5);
      const double fr1 = std::floor((p.y + ry - lat.origin.y) / lat.delta - 0.5);
      const double lo_r = std::max(fr0, static_cast<double>(rb));
      const double hi_r = std::min(fr1, static_cast<double>(re) - 1.0);
      if (lo_r > hi_r) continue;
      const double fc0 = std::max(0.0, std::ceil((p.x - rx - lat.origin.x) / lat.delta - 0.5));
      const double fc1 = std::min(static_cast<double>(nc) - 1.0,
                                  std::floor((p.x + rx - lat.origin.x) / lat.delta - 0.5));
      if (fc0 > fc1) continue;
      const auto c0 = static_cast<std::size_t>(fc0), c1 = static_cast<std::size_t>(fc1);
      for (std::size_t c = c0; c <= c1; ++c) {
        const double u = (lat.origin.x + (static_cast<double>(c) + 0.5) * lat.delta - p.x) / bw.hx;
        kx[c] = kInvSqrt2Pi * std::exp(-0.5 * u * u);
      }
      for (auto r = static_cast<std::size_t>(lo_r); r <= static_cast<std::size_t>(hi_r); ++r) {
        const double v = (lat.origin.y + (static_cast<double>(r) + 0.5) * lat.delta - p.y) / bw.hy;
        const double ky = kInvSqrt2Pi * std::exp(-0.5 * v * v);
        double* dst = out.data() + r * nc;
        for (std::size_t c = c0; c <= c1; ++c) dst[c] += kx[c] * ky;
      }
    }
  });
  return out;
}

} // namespace

std::vector<double> kde_grid_values(std::span<const GeoPoint> points, const Bandwidth& bw,
                                    const Lattice& lattice, const KdeOptions& options) {
  check_bandwidth(bw);
  if (points.empty()) throw Error(ErrorKind::InvalidInput, "KDE needs at least one point");
  if (!(options.truncation >= 5.0))
    throw Error(ErrorKind::InvalidInput, "kernel truncation radius must be at least 5 bandwidths");

  std::vector<double> values;
  if (options.method == KdeMethod::Windowed) {
    values = windowed_values(points, bw, lattice, options);
  } else {
    auto counts = bin_exact(points, lattice);
    if (counts) {
      values = binned_values(*counts, bw, lattice, options);
    } else if (options.method == KdeMethod::Binned) {
      throw Error(ErrorKind::InvalidInput, "binned KDE requires points on lattice centroids");
    } else {
      values = windowed_values(points, bw, lattice, options);
    }
  }
  const double scale = 1.0 / (static_cast<double>(points.size()) * bw.hx * bw.hy);
  for (double& v : values) v *= scale;
  return values;
}

DensityField evaluate_kde(std::span<const GeoPoint> points, const Bandwidth& bw, GridPtr grid,
                          const KdeOptions& options) {
  auto values = kde_grid_values(points, bw, grid->lattice(), options);
  return DensityField(std::move(grid), std::move(values));
}

std::vector<std::size_t> weighted_sample_indices(std::span<const double> weights, std::size_t count,
                                                 Rng& rng) {
  const AliasTable table(weights);
  std::vector<std::size_t> out(count);
  for (auto& j : out) j = table(rng);
  return out;
}

std::vector<GeoPoint> weighted_sample_grid(std::span<const double> weights, std::size_t count,
                                           const EvaluationGrid& grid, Rng& rng) {
  if (weights.size() != grid.size())
    throw Error(ErrorKind::GridMismatch, "one weight per grid point is required");
  const auto indices = weighted_sample_indices(weights, count, rng);
  std::vector<GeoPoint> out;
  out.reserve(count);
  for (std::size_t j : indices) out.push_back(grid.centroid(j));
  return out;
}

} // namespace agrsst
