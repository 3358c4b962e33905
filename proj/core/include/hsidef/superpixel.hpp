#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "hsidef/cube.hpp"
#include "hsidef/types.hpp"

namespace hsidef {

struct SuperpixelMap {
  int height = 0;
  int width = 0;
  int count = 0;                // realized H
  std::vector<int> assignment;  // row-major, labels 1..count
  std::vector<int> sizes;       // per-superpixel pixel counts

  int pixels() const { return height * width; }
  int label_at(int pixel) const { return assignment[static_cast<std::size_t>(pixel)]; }
};

// SLIC over the full spectrum: centers seeded on a regular grid of step
// sqrt(hw/H_target), distance = d_spectral + (compactness/step)*d_spatial,
// search window 2*step per center, then a connectivity cleanup.
// compactness <= 0 selects 0.1 * mean pairwise spectral distance (sampled).
SuperpixelMap slic(const HsiCube& cube, int target_count, double compactness,
                   int iters, std::uint64_t seed);

// Makes every label one 4-connected component; fragments smaller than
// hw/(4H) are absorbed by the largest adjacent component, larger ones
// become superpixels of their own.
SuperpixelMap enforce_connectivity(const SuperpixelMap& map);

// Flood-fill audit: true iff every label forms exactly one component.
bool connectivity_ok(const SuperpixelMap& map);

void write_superpixel_map(const SuperpixelMap& map,
                          const std::filesystem::path& header_path,
                          const std::string& payload_name);

}  // namespace hsidef
