#include "agrsst/density.hpp"

#include "agrsst/error.hpp"

#include <cmath>

namespace agrsst {

double mask_integral(const EvaluationGrid& grid, std::span<const double> values) {
  double sum = 0.0;
  for (std::size_t j : grid.mask()) sum += values[j];
  return sum * grid.lattice().cell_area();
}

DensityField::DensityField(GridPtr grid, std::vector<double> values, Normalize mode)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (!grid_) throw Error(ErrorKind::InvalidInput, "density field without a grid");
  if (values_.size() != grid_->size())
    throw Error(ErrorKind::GridMismatch, "density values do not match the grid size");
  for (double v : values_) {
    if (!(v >= 0.0) || !std::isfinite(v))
      throw Error(ErrorKind::NumericalFailure, "density values must be finite and nonnegative");
  }
  const double total = mask_integral(*grid_, values_);
  if (mode == Normalize::Verify) {
    if (std::abs(total - 1.0) > 1e-6)
      throw Error(ErrorKind::NumericalFailure,
                  "density field integrates to " + std::to_string(total) + ", expected 1");
    return;
  }
  if (!(total > 0.0) || !std::isfinite(total))
    throw Error(ErrorKind::NumericalFailure, "density has no mass inside the mask");
  const double scale = 1.0 / total;
  for (double& v : values_) v *= scale;
}

double DensityField::integral() const { return mask_integral(*grid_, values_); }

double DensityField::area_mass(std::size_t d) const {
  double sum = 0.0;
  for (std::size_t j : grid_->members(d)) sum += values_[j];
  return sum * grid_->lattice().cell_area();
}

void require_same_grid(const DensityField& a, const DensityField& b) {
  if (!a.grid().compatible(b.grid()))
    throw Error(ErrorKind::GridMismatch, "density fields live on different grids");
}

} // namespace agrsst
