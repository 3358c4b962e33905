#pragma once

#include <cstdint>
#include <vector>

#include "hsidef/types.hpp"

namespace hsidef {

// Trainable tensors of the spectral self-attention encoder. Row-vector
// convention throughout: features are rows, maps multiply on the right.
struct SslParams {
  Matrix w_e;  // m x d patch embedding
  Matrix w_q;  // d x d
  Matrix w_k;  // d x d
  Matrix w_v;  // d x d
  Matrix w_t;  // d x n output projection

  int m() const { return static_cast<int>(w_e.rows()); }
  int d() const { return static_cast<int>(w_e.cols()); }
  int n() const { return static_cast<int>(w_t.cols()); }
};

SslParams init_ssl_params(int m, int d, int n, std::uint64_t seed);

// Fixed sinusoidal position table; row i is the vector added to a patch
// whose original (pre-masking) index is i.
struct PositionalTable {
  Matrix table;  // l_max x d

  int l_max() const { return static_cast<int>(table.rows()); }
};

PositionalTable make_positional_table(int l_max, int d);

Matrix embed(const Matrix& unmasked, const SslParams& params);
Matrix positional_encode(const Matrix& embedded, const std::vector<int>& kept_indices,
                         const PositionalTable& table);
Matrix self_attention(const Matrix& encoded, const SslParams& params);
Matrix project_out(const Matrix& attended, const SslParams& params);

// Activations cached by the fused forward pass for backprop.
struct SslCache {
  Matrix patches;  // r x m input
  Matrix encoded;  // r x d embedded + positions
  Matrix q, k, v;  // r x d
  Matrix weights;  // r x r softmax rows
  Matrix attended; // r x d
};

struct SslGrads {
  Matrix w_e, w_q, w_k, w_v, w_t;

  void setZero(const SslParams& p);
  void accumulate(const SslGrads& other);
};

// Full pipeline for one pixel: embed -> positions -> attention -> project.
Matrix ssl_forward(const Matrix& unmasked, const std::vector<int>& kept_indices,
                   const SslParams& params, const PositionalTable& table,
                   SslCache* cache);

// Backprop from d(output) r x n; accumulates parameter grads into `grads`
// and optionally returns d(input patches) r x m through `dpatches`.
void ssl_backward(const Matrix& doutput, const SslParams& params, const SslCache& cache,
                  SslGrads* grads, Matrix* dpatches);

// Forward-mode directional derivative: given a tangent of the input patches,
// the tangent of the output. Parameters held fixed.
Matrix ssl_jvp(const Matrix& dpatches, const SslParams& params, const SslCache& cache);

}  // namespace hsidef
