#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hsidef/types.hpp"

namespace hsidef {

// A hyperspectral raster. values is (h*w) x bands, one pixel spectrum per
// row, pixels in row-major raster order (matches the bip payload layout).
struct HsiCube {
  int height = 0;
  int width = 0;
  int bands = 0;
  // Trailing bands appended by zero_pad_bands; bands - padded real bands.
  int padded = 0;
  Matrix values;
  // Per-band extrema recorded by normalize(), kept for denormalization.
  std::vector<double> band_min;
  std::vector<double> band_max;
  bool normalized = false;

  int pixels() const { return height * width; }
  int real_bands() const { return bands - padded; }
};

struct LabelMap {
  int height = 0;
  int width = 0;
  int classes = 0;
  std::vector<int> labels;  // row-major, 0 = unlabeled, 1..classes

  int pixels() const { return height * width; }
};

struct DatasetSplit {
  std::vector<bool> train_mask;
  std::vector<bool> test_mask;
  int per_class_train = 0;
  std::uint64_t seed = 0;
};

// --- On-disk format -------------------------------------------------------
// Header: UTF-8 text, one key=value per line, keys
//   height,width,bands,dtype,order,payload
// dtype is f32le for cubes and i32le for labels, order is bip, payload is a
// path relative to the header. Payload is raw little-endian, pixel-major.

HsiCube load_cube(const std::filesystem::path& header_path);
void write_cube(const HsiCube& cube, const std::filesystem::path& header_path,
                const std::string& payload_name);

LabelMap load_labels(const std::filesystem::path& header_path);
void write_labels(const LabelMap& labels, const std::filesystem::path& header_path,
                  const std::string& payload_name);

// Per-band global min-max rescale to [0,1]. Constant bands are dropped with
// a warning; all-constant input is rejected.
HsiCube normalize(const HsiCube& cube);

// Appends zero bands until the band count divides patch_len; appended bands
// are tracked in cube.padded.
HsiCube zero_pad_bands(const HsiCube& cube, int patch_len);

// Per class, min(per_class, class_size-1) training pixels sampled uniformly
// without replacement; the rest of the labeled pixels form the test set.
DatasetSplit sample_split(const LabelMap& labels, int per_class, std::uint64_t seed);

}  // namespace hsidef
