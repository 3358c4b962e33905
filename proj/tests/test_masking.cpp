#include <doctest.h>

#include "hsidef/masking.hpp"
#include "hsidef/rng.hpp"

using namespace hsidef;

TEST_CASE("divide splits 104 bands into 13 patches of 8") {
  Vector spectrum(104);
  for (int i = 0; i < 104; ++i) spectrum[i] = i;
  const Matrix patches = divide(spectrum, 8);
  CHECK(patches.rows() == 13);
  CHECK(patches.cols() == 8);
  CHECK(patches(0, 0) == 0.0);
  CHECK(patches(12, 7) == 103.0);
}

TEST_CASE("divide with m equal to the band count is the identity") {
  Vector spectrum(6);
  spectrum << 1, 2, 3, 4, 5, 6;
  const Matrix patches = divide(spectrum, 6);
  CHECK(patches.rows() == 1);
  CHECK((patches.row(0).transpose() - spectrum).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("divide is lossless: concatenating rows reproduces the spectrum") {
  Rng rng(3);
  Vector spectrum(24);
  for (int i = 0; i < 24; ++i) spectrum[i] = rng.uniform01();
  const Matrix patches = divide(spectrum, 4);
  Vector rebuilt(24);
  for (int i = 0; i < 6; ++i) rebuilt.segment(i * 4, 4) = patches.row(i).transpose();
  CHECK((rebuilt - spectrum).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("divide rejects non-divisible lengths") {
  CHECK_THROWS_AS(divide(Vector::Zero(10), 4), DataError);
}

TEST_CASE("sample_mask keeps ceil(l(1-alpha)) patches") {
  CHECK(sample_mask(13, 0.5, 0).r() == 7);   // ceil(6.5)
  CHECK(sample_mask(16, 0.75, 0).r() == 4);  // ceil(4)
  const MaskPlan none = sample_mask(5, 0.0, 0);
  CHECK(none.r() == 5);
  CHECK(none.masked.empty());
}

TEST_CASE("kept count matches the exact rational oracle on the full grid") {
  for (int l = 1; l <= 64; ++l) {
    for (int k = 0; k <= 9; ++k) {
      const double alpha = k / 10.0;
      // Exact oracle: r = ceil(l*(10-k)/10) in integer arithmetic.
      const int expected = (l * (10 - k) + 9) / 10;
      const MaskPlan plan = sample_mask(l, alpha, 99);
      CHECK(plan.r() == expected);
      CHECK(static_cast<int>(plan.kept.size() + plan.masked.size()) == l);
    }
  }
}

TEST_CASE("kept and masked partition the slots") {
  const MaskPlan plan = sample_mask(20, 0.6, 77);
  std::vector<bool> seen(20, false);
  for (const int i : plan.kept) {
    CHECK(!seen[static_cast<std::size_t>(i)]);
    seen[static_cast<std::size_t>(i)] = true;
  }
  for (const int i : plan.masked) {
    CHECK(!seen[static_cast<std::size_t>(i)]);
    seen[static_cast<std::size_t>(i)] = true;
  }
  for (const bool s : seen) CHECK(s);
}

TEST_CASE("sample_mask is deterministic per seed") {
  const MaskPlan a = sample_mask(13, 0.5, 42);
  const MaskPlan b = sample_mask(13, 0.5, 42);
  const MaskPlan c = sample_mask(13, 0.5, 43);
  CHECK(a.kept == b.kept);
  CHECK((a.kept != c.kept || a.masked != c.masked));
}

TEST_CASE("inclusion frequency is uniform at the 6-sigma binomial bound") {
  // l = 10, alpha = 0.5 -> r = 5; each slot kept with probability 0.5.
  constexpr int kDraws = 100000;
  std::array<int, 10> hits{};
  for (int i = 0; i < kDraws; ++i) {
    const MaskPlan plan = sample_mask(10, 0.5, 1000003ULL * i + 17);
    for (const int k : plan.kept) hits[static_cast<std::size_t>(k)]++;
  }
  for (const int h : hits) {
    const double freq = static_cast<double>(h) / kDraws;
    CHECK(freq >= 0.48);
    CHECK(freq <= 0.52);
  }
}

TEST_CASE("apply_mask selects kept rows in ascending original order") {
  Matrix patches(4, 2);
  patches << 0, 0, 1, 1, 2, 2, 3, 3;
  MaskPlan plan;
  plan.l = 4;
  plan.alpha = 0.5;
  plan.kept = {1, 3};
  plan.masked = {0, 2};
  const auto [kept, idx] = apply_mask(patches, plan);
  CHECK(kept.rows() == 2);
  CHECK(kept(0, 0) == 1.0);
  CHECK(kept(1, 0) == 3.0);
  CHECK(idx == std::vector<int>{1, 3});
}

TEST_CASE("apply_mask with alpha=0 returns the full patch set") {
  Matrix patches(3, 2);
  patches << 1, 2, 3, 4, 5, 6;
  const MaskPlan plan = sample_mask(3, 0.0, 5);
  const auto [kept, idx] = apply_mask(patches, plan);
  CHECK((kept - patches).cwiseAbs().maxCoeff() == 0.0);
  CHECK(idx == std::vector<int>{0, 1, 2});
}

TEST_CASE("apply_mask kept indices are strictly increasing") {
  for (int seed = 0; seed < 20; ++seed) {
    const MaskPlan plan = sample_mask(17, 0.4, static_cast<std::uint64_t>(seed));
    for (std::size_t i = 1; i < plan.kept.size(); ++i)
      CHECK(plan.kept[i] > plan.kept[i - 1]);
  }
}

TEST_CASE("apply_mask rejects mismatched plans") {
  const MaskPlan plan = sample_mask(5, 0.2, 0);
  CHECK_THROWS_AS(apply_mask(Matrix::Zero(4, 3), plan), DataError);
}

TEST_CASE("masked_band_indices covers masked patches") {
  MaskPlan plan;
  plan.l = 3;
  plan.kept = {1};
  plan.masked = {0, 2};
  const auto bands = masked_band_indices(plan, 4);
  CHECK(bands == std::vector<int>{0, 1, 2, 3, 8, 9, 10, 11});
}
