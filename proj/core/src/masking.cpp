#include "hsidef/masking.hpp"

#include <algorithm>
#include <cmath>

#include "hsidef/rng.hpp"

namespace hsidef {

Matrix divide(const Vector& spectrum, int patch_len) {
  if (patch_len < 1) throw ConfigError("divide: patch length must be >= 1");
  const auto bands = spectrum.size();
  if (bands % patch_len != 0)
    throw DataError("divide: band count " + std::to_string(bands) +
                    " not divisible by patch length " + std::to_string(patch_len) +
                    " (zero_pad_bands first)");
  const Index l = bands / patch_len;
  Matrix patches(l, patch_len);
  for (Index i = 0; i < l; ++i)
    patches.row(i) = spectrum.segment(i * patch_len, patch_len).transpose();
  return patches;
}

MaskPlan sample_mask(int patch_count, double alpha, std::uint64_t seed) {
  if (patch_count < 1) throw ConfigError("sample_mask: patch count must be >= 1");
  if (alpha < 0.0 || alpha >= 1.0)
    throw ConfigError("sample_mask: masking ratio must be in [0,1)");

  // Nudge guards the exact-integer grid points of l*(1-alpha) against
  // one-ulp overshoot; r = ceil(l*(1-alpha)).
  const int r = static_cast<int>(std::ceil(patch_count * (1.0 - alpha) - 1e-9));

  MaskPlan plan;
  plan.alpha = alpha;
  plan.l = patch_count;
  plan.seed = seed;
  Rng rng(seed);
  plan.kept = rng.sample_without_replacement(patch_count, r);
  std::vector<bool> is_kept(static_cast<std::size_t>(patch_count), false);
  for (const int i : plan.kept) is_kept[static_cast<std::size_t>(i)] = true;
  for (int i = 0; i < patch_count; ++i)
    if (!is_kept[static_cast<std::size_t>(i)]) plan.masked.push_back(i);
  return plan;
}

std::pair<Matrix, std::vector<int>> apply_mask(const Matrix& patches, const MaskPlan& plan) {
  if (patches.rows() != plan.l)
    throw DataError("apply_mask: plan covers " + std::to_string(plan.l) +
                    " patches but got " + std::to_string(patches.rows()));
  Matrix kept(plan.r(), patches.cols());
  for (int i = 0; i < plan.r(); ++i)
    kept.row(i) = patches.row(plan.kept[static_cast<std::size_t>(i)]);
  return {std::move(kept), plan.kept};
}

std::vector<int> masked_band_indices(const MaskPlan& plan, int patch_len) {
  std::vector<int> bands;
  bands.reserve(plan.masked.size() * static_cast<std::size_t>(patch_len));
  for (const int patch : plan.masked)
    for (int j = 0; j < patch_len; ++j) bands.push_back(patch * patch_len + j);
  return bands;
}

}  // namespace hsidef
