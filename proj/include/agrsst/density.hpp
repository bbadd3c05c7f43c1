#pragma once

#include "agrsst/geometry.hpp"

#include <memory>
#include <span>
#include <vector>

namespace agrsst {

using GridPtr = std::shared_ptr<const EvaluationGrid>;

inline GridPtr share(EvaluationGrid grid) {
  return std::make_shared<const EvaluationGrid>(std::move(grid));
}

/// Nonnegative density on an evaluation grid, normalized so that the sum of
/// in-mask values times the pixel area is one. Out-of-mask values are kept
/// (scaled with the rest) but never enter the normalization.
class DensityField {
public:
  enum class Normalize { Rescale, Verify };

  /// Rescale: divides by the in-mask integral. Verify: keeps the values
  /// untouched and throws NumericalFailure unless they already integrate to
  /// one within 1e-6.
  DensityField(GridPtr grid, std::vector<double> values, Normalize mode = Normalize::Rescale);

  const EvaluationGrid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t j) const { return values_[j]; }
  std::size_t size() const { return values_.size(); }

  /// Sum over in-mask points of value * delta^2.
  double integral() const;
  /// Mass (value * delta^2) over the grid points of area d.
  double area_mass(std::size_t d) const;

private:
  GridPtr grid_;
  std::vector<double> values_;
};

/// In-mask integral of an arbitrary value vector on `grid`.
double mask_integral(const EvaluationGrid& grid, std::span<const double> values);

/// Throws GridMismatch unless both fields live on compatible grids.
void require_same_grid(const DensityField& a, const DensityField& b);

} // namespace agrsst
