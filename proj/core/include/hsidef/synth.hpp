#pragma once

#include <cstdint>
#include <utility>

#include "hsidef/cube.hpp"

namespace hsidef {

// Synthetic scene: blob_count Voronoi regions over the raster, each region
// carrying one of `classes` smooth prototype spectra plus per-band Gaussian
// noise, clipped to [0,1].
struct SynthSpec {
  int height = 32;
  int width = 32;
  int bands = 48;
  int classes = 4;
  int blob_count = 8;
  double noise_sigma = 0.02;
  std::uint64_t seed = 0;

  void validate() const;
};

std::pair<HsiCube, LabelMap> synth_generate(const SynthSpec& spec);

}  // namespace hsidef
