#pragma once

#include <cstdint>
#include <vector>

#include "hsidef/types.hpp"

namespace hsidef {

// Four affine layers with rectifiers between; the last layer emits class
// scores. Serves as the undefended baseline (on raw spectra) and as the
// downstream head (on latent features).
struct MlpParams {
  std::vector<Matrix> w;  // 4 matrices, in x out
  std::vector<Vector> b;

  int in_width() const { return static_cast<int>(w.front().rows()); }
  int classes() const { return static_cast<int>(w.back().cols()); }
};

MlpParams init_mlp(int in_width, const std::vector<int>& hidden, int classes,
                   std::uint64_t seed);

struct MlpCache {
  std::vector<Matrix> acts;     // layer inputs, acts[0] = features
  std::vector<Matrix> preacts;  // per layer
};

// feats: N x in -> N x classes logits.
Matrix mlp_forward(const Matrix& feats, const MlpParams& params, MlpCache* cache = nullptr);

struct MlpGrads {
  std::vector<Matrix> w;
  std::vector<Vector> b;

  void setZero(const MlpParams& p);
};

void mlp_backward(const Matrix& dscores, const MlpParams& params, const MlpCache& cache,
                  MlpGrads* grads, Matrix* dfeats);

// K x in Jacobian of one sample's scores w.r.t. its feature vector.
Matrix mlp_input_jacobian(const Vector& features, const MlpParams& params);

// Softmax cross-entropy summed over rows where label > 0 (labels are 1-based,
// 0 = ignore). dscores, when non-null, receives the gradient.
double cross_entropy(const Matrix& scores, const std::vector<int>& labels,
                     Matrix* dscores = nullptr);

std::vector<int> predict_labels(const Matrix& scores);

}  // namespace hsidef
