#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>

#include "hsidef/cube.hpp"
#include "hsidef/types.hpp"

namespace hsidef {

struct ConfusionMatrix {
  IntMatrix counts;  // rows = truth, cols = prediction, 1-based classes
  long total = 0;
};

// Counts predictions over the masked pixels; mask must lie inside the
// labeled area of `truth`.
ConfusionMatrix confusion(const std::vector<int>& pred, const LabelMap& truth,
                          const std::vector<bool>& mask);

struct Metrics {
  double oa = 0.0;
  double aa = 0.0;
  double kappa = 0.0;
  bool kappa_defined = true;
};

Metrics compute_metrics(const ConfusionMatrix& cm);

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;
};

// Sample mean and sample standard deviation (divisor n-1) per metric column.
std::vector<MeanStd> aggregate(const std::vector<std::vector<double>>& runs);

using Rgb = std::array<std::uint8_t, 3>;
using Palette = std::map<int, Rgb>;

struct Image {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel
};

// Class raster -> RGB; unlabeled (0) pixels are black. Every class present
// in the raster must have a palette entry.
Image render_map(const std::vector<int>& pred, int height, int width,
                 const Palette& palette);

// Binary PPM (P6), lossless.
void write_ppm(const Image& image, const std::filesystem::path& path);
Image read_ppm(const std::filesystem::path& path);

Palette default_palette(int classes);

}  // namespace hsidef
