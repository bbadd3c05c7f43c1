#pragma once

#include "agrsst/density.hpp"
#include "agrsst/rng.hpp"

#include <span>
#include <vector>

namespace agrsst {

/// Diagonal Gaussian bandwidth: square roots of the diagonal of H.
struct Bandwidth {
  double hx = 0.0;
  double hy = 0.0;

  Bandwidth scaled(double factor) const { return {hx * factor, hy * factor}; }
};

/// Scott's normal-reference rule for two dimensions: h = sd * n^(-1/6) per
/// axis, with the sample standard deviation. Throws DegenerateSample for
/// fewer than two points or zero spread on either axis.
Bandwidth select_bandwidth(std::span<const GeoPoint> points);

enum class KdeMethod {
  Auto,     // Binned when every point sits on a lattice centroid, else Windowed
  Binned,   // exact counts per pixel + separable truncated convolution
  Windowed, // per-point kernel over the truncation window
};

struct KdeOptions {
  KdeMethod method = KdeMethod::Auto;
  std::size_t threads = 1; // 0 = default_threads()
  double truncation = 8.0; // kernel support radius in bandwidths per axis
};

/// Unnormalized product-Gaussian KDE evaluated at every lattice centroid.
/// Binned requires all points on centroids and throws InvalidInput otherwise.
std::vector<double> kde_grid_values(std::span<const GeoPoint> points, const Bandwidth& bw,
                                    const Lattice& lattice, const KdeOptions& options = {});

/// KDE on the grid, renormalized over the mask.
DensityField evaluate_kde(std::span<const GeoPoint> points, const Bandwidth& bw, GridPtr grid,
                          const KdeOptions& options = {});

/// Draws `count` grid indices i.i.d. with probability proportional to weight.
std::vector<std::size_t> weighted_sample_indices(std::span<const double> weights, std::size_t count,
                                                 Rng& rng);

/// Same draws returned as grid centroids.
std::vector<GeoPoint> weighted_sample_grid(std::span<const double> weights, std::size_t count,
                                           const EvaluationGrid& grid, Rng& rng);

} // namespace agrsst
