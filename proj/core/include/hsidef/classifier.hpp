#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "hsidef/mlp.hpp"
#include "hsidef/train.hpp"

namespace hsidef {

// Frozen per-pixel view used by the DeepFool loop: one pixel's scores and
// the Jacobian w.r.t. its own spectrum, everything else held fixed.
class PixelLocalModel {
 public:
  virtual ~PixelLocalModel() = default;
  virtual Vector scores(int pixel, const Vector& spectrum) = 0;
  virtual Matrix jacobian(int pixel, const Vector& spectrum) = 0;  // K x bands
};

// A differentiable per-pixel classifier over a (real-band, normalized) cube.
class PixelClassifier {
 public:
  virtual ~PixelClassifier() = default;
  virtual int classes() const = 0;
  virtual int bands() const = 0;
  // hw x K logits. May consume randomness (the defended model's mask).
  virtual Matrix scores(const HsiCube& cube) = 0;
  // Given d(loss)/d(scores), returns d(loss)/d(cube values), hw x bands.
  virtual Matrix input_gradient(const HsiCube& cube, const Matrix& dscores) = 0;
  virtual std::unique_ptr<PixelLocalModel> local_view(const HsiCube& cube) = 0;
};

// The undefended four-layer network on raw spectra.
class BaselineClassifier final : public PixelClassifier {
 public:
  explicit BaselineClassifier(MlpParams params) : mlp_(std::move(params)) {}

  int classes() const override { return mlp_.classes(); }
  int bands() const override { return mlp_.in_width(); }
  Matrix scores(const HsiCube& cube) override;
  Matrix input_gradient(const HsiCube& cube, const Matrix& dscores) override;
  std::unique_ptr<PixelLocalModel> local_view(const HsiCube& cube) override;

  const MlpParams& mlp() const { return mlp_; }

 private:
  MlpParams mlp_;
};

// Masked encoder + head. Fresh mask per forward call unless a mask seed is
// frozen; the presented cube is re-segmented unless reuse_superpixels is
// set (then the stored map and adjacency are used).
class DefendedClassifier final : public PixelClassifier {
 public:
  struct Options {
    std::uint64_t mask_seed = 0;
    bool freeze_mask = false;
    bool reuse_superpixels = false;
    int eot_samples = 1;  // mask draws per local view
  };

  DefendedClassifier(ModelState state, MlpParams head, Options options);

  int classes() const override { return head_.classes(); }
  int bands() const override { return real_bands_; }
  Matrix scores(const HsiCube& cube) override;
  Matrix input_gradient(const HsiCube& cube, const Matrix& dscores) override;
  std::unique_ptr<PixelLocalModel> local_view(const HsiCube& cube) override;

  const ModelState& state() const { return state_; }
  const MlpParams& head() const { return head_; }

 private:
  friend class DefendedLocalModel;

  struct Pass {
    MaskPlan plan;
    SuperpixelMap map;
    GraphContext ctx;
    EncoderForward fwd;
  };
  Pass run_encoder(const HsiCube& padded, std::uint64_t plan_seed) const;
  HsiCube pad(const HsiCube& cube) const;
  std::uint64_t next_plan_seed();

  ModelState state_;
  MlpParams head_;
  Options options_;
  int real_bands_ = 0;
  std::uint64_t call_counter_ = 0;
};

}  // namespace hsidef
