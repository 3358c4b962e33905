#pragma once

#include <cstdint>
#include <vector>

#include "hsidef/attention.hpp"
#include "hsidef/cube.hpp"
#include "hsidef/graph.hpp"
#include "hsidef/masking.hpp"
#include "hsidef/superpixel.hpp"
#include "hsidef/types.hpp"

namespace hsidef {

// Trainable tensors of the encoder half of the pipeline.
struct EncoderParams {
  SslParams ssl;
  Matrix blanks;  // l x n blank-fill table, one vector per patch slot
  GcnParams gcn;

  int slots() const { return static_cast<int>(blanks.rows()); }
  int t() const { return static_cast<int>(blanks.rows() * blanks.cols()); }
};

struct EncoderSettings {
  double lambda_reg = -1.0;  // <=0: scaled-trace default
  double sigma = -1.0;       // <=0: median heuristic
  AssocWeighting weighting = AssocWeighting::Paper;
  Activation gcn_act = Activation::Rectifier;
};

// Quantities recomputed from the current features each pass and then held
// constant through the backward pass: association weights and adjacency.
struct GraphContext {
  AssocMatrix assoc;
  SuperpixelStats stats;
  IntMatrix edges;
  double sigma = 0.0;
  double epsilon = 0.0;
};

struct EncoderForward {
  MaskPlan plan;
  std::vector<SslCache> ssl_caches;  // per pixel
  Matrix z;          // hw x t full attention set
  Matrix nodes;      // H x t local representation L
  Matrix preact;     // GCN pre-activation
  Matrix node_repr;  // H x t global representation L-hat
  Matrix z_hat;      // hw x t latent features
};

// Per-pixel half: attention over kept patches, blank filling. Returns Z.
Matrix encode_pixels(const HsiCube& cube, const MaskPlan& plan,
                     const EncoderParams& params, const PositionalTable& table,
                     std::vector<SslCache>* caches);

// Full pass. When prior_edges is null the adjacency comes from the RBF
// graph (epoch 0 of the schedule); otherwise the caller supplies it.
EncoderForward encoder_forward(const HsiCube& cube, const MaskPlan& plan,
                               const EncoderParams& params, const PositionalTable& table,
                               const SuperpixelMap& map, const IntMatrix* prior_edges,
                               const EncoderSettings& settings, GraphContext* ctx_out);

// Variant that reuses a frozen context (stats, association, adjacency),
// recomputing only the differentiable chain. Used by the gradient checker.
EncoderForward encoder_forward_frozen(const HsiCube& cube, const MaskPlan& plan,
                                      const EncoderParams& params,
                                      const PositionalTable& table,
                                      const GraphContext& ctx,
                                      const EncoderSettings& settings);

struct EncoderGrads {
  SslGrads ssl;
  Matrix blanks;
  Matrix w_g;
  Vector b;

  void setZero(const EncoderParams& p);
};

// Backward from d(z_hat). Association weights and adjacency are constants.
// dinput, when non-null, receives d(cube values); only bands inside kept
// patches can be nonzero.
void encoder_backward(const Matrix& dz_hat, const EncoderForward& fwd,
                      const GraphContext& ctx, const EncoderParams& params,
                      const EncoderSettings& settings, EncoderGrads* grads,
                      Matrix* dinput);

}  // namespace hsidef
