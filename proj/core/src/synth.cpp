#include "hsidef/synth.hpp"

#include <algorithm>
#include <cmath>

#include "hsidef/rng.hpp"

namespace hsidef {

void SynthSpec::validate() const {
  if (bands < 8) throw ConfigError("synth: bands must be >= 8");
  if (classes < 2) throw ConfigError("synth: classes must be >= 2");
  if (noise_sigma < 0.0) throw ConfigError("synth: noise_sigma must be >= 0");
  if (blob_count < classes) throw ConfigError("synth: blob_count must be >= classes");
  if (height < 1 || width < 1) throw ConfigError("synth: raster must be non-empty");
  if (blob_count > height * width) throw ConfigError("synth: more blobs than pixels");
}

namespace {

// Smooth random curve: 2-4 Gaussian bumps over the band axis.
Vector random_bumps(Rng& rng, int bands) {
  Vector v = Vector::Zero(bands);
  const int count = 2 + static_cast<int>(rng.uniform_int(3));
  for (int b = 0; b < count; ++b) {
    const double center = rng.uniform(0.0, static_cast<double>(bands - 1));
    const double width = rng.uniform(2.0, std::max(3.0, bands / 6.0));
    const double amp = rng.uniform(-1.0, 1.0);
    for (int k = 0; k < bands; ++k) {
      const double d = (k - center) / width;
      v[k] += amp * std::exp(-0.5 * d * d);
    }
  }
  return v;
}

}  // namespace

std::pair<HsiCube, LabelMap> synth_generate(const SynthSpec& spec) {
  spec.validate();
  const int hw = spec.height * spec.width;

  // Class prototypes: a shared base level plus orthonormalized smooth bumps
  // scaled so every class pair sits at the same spectral distance. Keeping
  // the pairwise separation fixed makes classifier margins predictable.
  Rng proto_rng(derive_seed(spec.seed, /*tag=*/0x70726f746fULL));
  std::vector<Vector> dirs;
  for (int c = 0; c < spec.classes; ++c) {
    Vector v = random_bumps(proto_rng, spec.bands);
    for (const auto& u : dirs) v -= u * u.dot(v);
    double nrm = v.norm();
    while (nrm < 1e-6) {  // bump landed in the span of earlier ones; redraw
      v = random_bumps(proto_rng, spec.bands);
      for (const auto& u : dirs) v -= u * u.dot(v);
      nrm = v.norm();
    }
    dirs.push_back(v / nrm);
  }
  constexpr double kClassSeparation = 0.12;  // pairwise prototype distance
  const double scale = kClassSeparation / std::sqrt(2.0);
  std::vector<Vector> protos;
  for (int c = 0; c < spec.classes; ++c) {
    Vector p = Vector::Constant(spec.bands, 0.45) + scale * dirs[static_cast<std::size_t>(c)];
    protos.push_back(p.cwiseMax(0.02).cwiseMin(0.98));
  }

  // Voronoi regions from distinct seed pixels; each class claims at least
  // one region, the rest are assigned uniformly.
  Rng region_rng(derive_seed(spec.seed, /*tag=*/0x766f726fULL));
  const auto seed_pixels = region_rng.sample_without_replacement(hw, spec.blob_count);
  std::vector<int> region_class(static_cast<std::size_t>(spec.blob_count));
  for (int b = 0; b < spec.blob_count; ++b) {
    region_class[static_cast<std::size_t>(b)] =
        b < spec.classes ? b + 1
                         : 1 + static_cast<int>(region_rng.uniform_int(
                                   static_cast<std::uint64_t>(spec.classes)));
  }

  LabelMap labels;
  labels.height = spec.height;
  labels.width = spec.width;
  labels.classes = spec.classes;
  labels.labels.resize(static_cast<std::size_t>(hw));
  std::vector<int> region_of(static_cast<std::size_t>(hw));
  for (int p = 0; p < hw; ++p) {
    const int py = p / spec.width, px = p % spec.width;
    double best = 1e300;
    int best_region = 0;
    for (int b = 0; b < spec.blob_count; ++b) {
      const int s = seed_pixels[static_cast<std::size_t>(b)];
      const int sy = s / spec.width, sx = s % spec.width;
      const double d2 = static_cast<double>((py - sy) * (py - sy) + (px - sx) * (px - sx));
      if (d2 < best) {
        best = d2;
        best_region = b;
      }
    }
    region_of[static_cast<std::size_t>(p)] = best_region;
    labels.labels[static_cast<std::size_t>(p)] =
        region_class[static_cast<std::size_t>(best_region)];
  }

  HsiCube cube;
  cube.height = spec.height;
  cube.width = spec.width;
  cube.bands = spec.bands;
  cube.values.resize(hw, spec.bands);
  Rng noise_rng(derive_seed(spec.seed, /*tag=*/0x6e6f697365ULL));
  for (int p = 0; p < hw; ++p) {
    const Vector& proto =
        protos[static_cast<std::size_t>(labels.labels[static_cast<std::size_t>(p)] - 1)];
    for (int k = 0; k < spec.bands; ++k) {
      double v = proto[k];
      if (spec.noise_sigma > 0.0) v += noise_rng.normal(0.0, spec.noise_sigma);
      cube.values(p, k) = std::clamp(v, 0.0, 1.0);
    }
  }
  return {std::move(cube), std::move(labels)};
}

}  // namespace hsidef
