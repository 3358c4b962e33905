#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "hsidef/types.hpp"

namespace hsidef {

// Which patch slots survive a masking pass. One plan is shared by every
// pixel of a forward pass so the slot layout (and the blank-fill table)
// stays aligned across the image.
struct MaskPlan {
  double alpha = 0.0;
  int l = 0;
  std::vector<int> kept;    // ascending, 0-based patch indices
  std::vector<int> masked;  // complement, ascending
  std::uint64_t seed = 0;

  int r() const { return static_cast<int>(kept.size()); }
};

// Splits a padded spectrum into l rows of length m; row i holds bands
// [i*m, (i+1)*m). Lossless.
Matrix divide(const Vector& spectrum, int patch_len);

// kept is a uniform random r-subset of the l slots, r = ceil(l*(1-alpha)).
MaskPlan sample_mask(int patch_count, double alpha, std::uint64_t seed);

// Selects the kept rows in ascending original order.
std::pair<Matrix, std::vector<int>> apply_mask(const Matrix& patches, const MaskPlan& plan);

// Band indices covered by the plan's masked patches, ascending.
std::vector<int> masked_band_indices(const MaskPlan& plan, int patch_len);

}  // namespace hsidef
