#include "agrsst/rng.hpp"

#include "agrsst/error.hpp"

#include <cmath>

namespace agrsst {

double Rng::normal() {
  // Marsaglia polar method.
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * f;
  has_spare_ = true;
  return u * f;
}

std::uint64_t derive_seed(std::uint64_t root, std::span<const std::uint64_t> tags) {
  std::uint64_t state = root;
  std::uint64_t h = splitmix64(state);
  for (std::uint64_t tag : tags) {
    state = h ^ (tag + 0x632be59bd9b4e019ULL);
    h = splitmix64(state);
  }
  return h;
}

AliasTable::AliasTable(std::span<const double> weights) {
  const std::size_t n = weights.size();
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w))
      throw Error(ErrorKind::InvalidInput, "sampling weights must be finite and nonnegative");
    total += w;
  }
  if (n == 0 || !(total > 0.0))
    throw Error(ErrorKind::AllZeroWeights, "sampling weights sum to zero");

  prob_.assign(n, 0.0);
  alias_.assign(n, 0);
  std::vector<double> scaled(n);
  std::vector<std::uint32_t> small, large;
  small.reserve(n);
  large.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    scaled[i] = weights[i] * static_cast<double>(n) / total;
    (scaled[i] < 1.0 ? small : large).push_back(static_cast<std::uint32_t>(i));
  }
  while (!small.empty() && !large.empty()) {
    const auto s = small.back();
    small.pop_back();
    const auto l = large.back();
    prob_[s] = scaled[s];
    alias_[s] = l;
    scaled[l] = (scaled[l] + scaled[s]) - 1.0;
    if (scaled[l] < 1.0) {
      large.pop_back();
      small.push_back(l);
    }
  }
  for (auto l : large) prob_[l] = 1.0;
  // Leftovers from rounding: only keep them when they carry weight, so that
  // zero-weight entries can never be returned.
  std::uint32_t fallback = 0;
  while (weights[fallback] == 0.0) ++fallback;
  for (auto s : small) {
    prob_[s] = weights[s] > 0.0 ? 1.0 : 0.0;
    if (weights[s] == 0.0) alias_[s] = fallback;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (weights[i] == 0.0) prob_[i] = 0.0;
  }
}

std::size_t AliasTable::operator()(Rng& rng) const {
  const auto i = static_cast<std::size_t>(rng.below(prob_.size()));
  return rng.uniform() < prob_[i] ? i : alias_[i];
}

} // namespace agrsst
