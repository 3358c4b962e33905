#include <doctest.h>

#include <deque>
#include <map>
#include <set>

#include "hsidef/superpixel.hpp"
#include "hsidef/synth.hpp"

using namespace hsidef;

namespace {

// Independent flood-fill oracle: component count per label.
std::map<int, int> component_counts(const std::vector<int>& labels, int h, int w) {
  std::vector<bool> visited(static_cast<std::size_t>(h * w), false);
  std::map<int, int> counts;
  for (int start = 0; start < h * w; ++start) {
    if (visited[static_cast<std::size_t>(start)]) continue;
    const int label = labels[static_cast<std::size_t>(start)];
    counts[label]++;
    std::deque<int> queue{start};
    visited[static_cast<std::size_t>(start)] = true;
    while (!queue.empty()) {
      const int p = queue.front();
      queue.pop_front();
      const int py = p / w, px = p % w;
      const auto push = [&](int q) {
        if (!visited[static_cast<std::size_t>(q)] &&
            labels[static_cast<std::size_t>(q)] == label) {
          visited[static_cast<std::size_t>(q)] = true;
          queue.push_back(q);
        }
      };
      if (py > 0) push(p - w);
      if (py < h - 1) push(p + w);
      if (px > 0) push(p - 1);
      if (px < w - 1) push(p + 1);
    }
  }
  return counts;
}

HsiCube constant_cube(int h, int w, int bands, double value) {
  HsiCube cube;
  cube.height = h;
  cube.width = w;
  cube.bands = bands;
  cube.values = Matrix::Constant(h * w, bands, value);
  return cube;
}

void check_invariants(const SuperpixelMap& map) {
  CHECK(static_cast<int>(map.assignment.size()) == map.pixels());
  int total = 0;
  for (const int size : map.sizes) {
    CHECK(size >= 1);
    total += size;
  }
  CHECK(total == map.pixels());
  for (const int a : map.assignment) {
    CHECK(a >= 1);
    CHECK(a <= map.count);
  }
  CHECK(connectivity_ok(map));
  const auto oracle = component_counts(map.assignment, map.height, map.width);
  CHECK(static_cast<int>(oracle.size()) == map.count);
  for (const auto& [label, count] : oracle) CHECK(count == 1);
}

}  // namespace

TEST_CASE("slic with a single target superpixel covers the raster") {
  const HsiCube cube = constant_cube(8, 8, 5, 0.3);
  const SuperpixelMap map = slic(cube, 1, 0.5, 5, 0);
  CHECK(map.count == 1);
  check_invariants(map);
}

TEST_CASE("slic on a constant 16x16 cube tiles like the grid oracle") {
  const HsiCube cube = constant_cube(16, 16, 4, 0.5);
  const SuperpixelMap map = slic(cube, 4, 0.5, 10, 0);
  CHECK(map.count == 4);
  check_invariants(map);
  // Grid-tiling oracle: with no spectral signal, assignment is by nearest
  // grid center, giving 4 quadrants of 64 +- 16 pixels.
  for (const int size : map.sizes) {
    CHECK(size >= 48);
    CHECK(size <= 80);
  }
}

TEST_CASE("slic respects a strong two-region spectral boundary") {
  // Left half and right half with far-apart spectra; no superpixel may
  // straddle the boundary when compactness is small.
  HsiCube cube = constant_cube(16, 16, 6, 0.1);
  for (int p = 0; p < cube.pixels(); ++p)
    if (p % 16 >= 8) cube.values.row(p).setConstant(0.9);
  const SuperpixelMap map = slic(cube, 4, 0.01, 10, 0);
  check_invariants(map);
  // Brute-force boundary audit over every horizontally adjacent pair.
  for (int y = 0; y < 16; ++y) {
    const int left = y * 16 + 7, right = y * 16 + 8;
    CHECK(map.assignment[static_cast<std::size_t>(left)] !=
          map.assignment[static_cast<std::size_t>(right)]);
  }
}

TEST_CASE("slic is deterministic per seed") {
  SynthSpec spec;
  spec.seed = 21;
  auto [raw, labels] = synth_generate(spec);
  (void)labels;
  const HsiCube cube = normalize(raw);
  const SuperpixelMap a = slic(cube, 10, -1.0, 10, 5);
  const SuperpixelMap b = slic(cube, 10, -1.0, 10, 5);
  CHECK(a.assignment == b.assignment);
}

TEST_CASE("slic hits the 1 percent target within 20 percent on synthetic cubes") {
  SynthSpec spec;
  spec.seed = 33;
  auto [raw, labels] = synth_generate(spec);
  (void)labels;
  const HsiCube cube = normalize(raw);
  const int target = static_cast<int>(std::lround(0.01 * cube.pixels()));
  const SuperpixelMap map = slic(cube, target, -1.0, 10, 1);
  check_invariants(map);
  CHECK(map.count >= target - (target + 4) / 5);
  CHECK(map.count <= target + (target + 4) / 5);
}

TEST_CASE("slic rejects out-of-range targets") {
  const HsiCube cube = constant_cube(4, 4, 3, 0.2);
  CHECK_THROWS_AS(slic(cube, 0, 0.5, 5, 0), ConfigError);
  CHECK_THROWS_AS(slic(cube, 17, 0.5, 5, 0), ConfigError);
}

TEST_CASE("enforce_connectivity leaves a valid map unchanged") {
  SuperpixelMap map;
  map.height = 4;
  map.width = 4;
  map.count = 2;
  map.assignment = {1, 1, 2, 2, 1, 1, 2, 2, 1, 1, 2, 2, 1, 1, 2, 2};
  map.sizes = {8, 8};
  const SuperpixelMap out = enforce_connectivity(map);
  CHECK(out.assignment == map.assignment);
  CHECK(out.count == 2);
}

TEST_CASE("enforce_connectivity resolves a checkerboard into connected blobs") {
  SuperpixelMap map;
  map.height = 6;
  map.width = 6;
  map.count = 2;
  map.assignment.resize(36);
  for (int p = 0; p < 36; ++p)
    map.assignment[static_cast<std::size_t>(p)] = (p / 6 + p % 6) % 2 + 1;
  map.sizes = {18, 18};
  const SuperpixelMap out = enforce_connectivity(map);
  check_invariants(out);
}

TEST_CASE("enforce_connectivity splits disconnected labels that are large") {
  SuperpixelMap map;
  map.height = 2;
  map.width = 8;
  map.count = 2;
  // Label 1 occupies both ends (disconnected), label 2 the middle.
  map.assignment = {1, 1, 1, 2, 2, 1, 1, 1, 1, 1, 1, 2, 2, 1, 1, 1};
  map.sizes = {12, 4};
  const SuperpixelMap out = enforce_connectivity(map);
  check_invariants(out);
  CHECK(out.count >= 2);
}
