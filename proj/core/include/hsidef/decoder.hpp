#pragma once

#include <cstdint>
#include <vector>

#include "hsidef/masking.hpp"
#include "hsidef/types.hpp"

namespace hsidef {

// One 1-D convolution layer over the patch-slot axis, same-padded so the
// sequence length is preserved. weights(o, c*k+dk) is the tap for output
// channel o, input channel c, kernel offset dk.
struct ConvLayer {
  Matrix weights;  // out_ch x (in_ch * k)
  Vector bias;
  int klen = 0;
  Activation act = Activation::Rectifier;

  int out_channels() const { return static_cast<int>(weights.rows()); }
  int in_channels() const { return klen == 0 ? 0 : static_cast<int>(weights.cols()) / klen; }
  int kernel_len() const { return klen; }
};

// Cascaded 1-D convolutions on the latent sequence (l slots x n channels)
// followed by a sigmoid-bounded linear head onto the padded band count.
struct DecoderParams {
  std::vector<ConvLayer> conv_layers;
  Matrix w_r;  // (l * last_out_ch) x padded band count
  Vector b_r;
  double zeta = 0.05;  // spectral-angle weight in the loss
  int slots = 0;       // l
  int in_channels = 0; // n

  int bands() const { return static_cast<int>(w_r.cols()); }
};

DecoderParams init_decoder_params(int slots, int in_channels, int bands,
                                  const std::vector<int>& channels, int kernel_len,
                                  Activation act, double zeta, std::uint64_t seed);

struct DecoderCache {
  std::vector<Matrix> inputs;   // per conv layer, l x in_ch
  std::vector<Matrix> preacts;  // per conv layer, l x out_ch
  Vector flat_pre;              // before sigmoid
  Vector output;
};

// Latent row (length l*n) -> reconstructed spectrum in (0,1).
Vector decode(const Vector& latent, const DecoderParams& params, DecoderCache* cache = nullptr);

struct DecoderGrads {
  std::vector<ConvLayer> conv_layers;  // same shapes, grads in kernel/bias
  Matrix w_r;
  Vector b_r;

  void setZero(const DecoderParams& p);
  void accumulate(const DecoderGrads& other);
};

// Backward through decode; accumulates parameter grads, returns d(latent).
Vector decode_backward(const Vector& doutput, const DecoderParams& params,
                       const DecoderCache& cache, DecoderGrads* grads);

enum class LossReduction { Mean, Sum };

struct ReconLoss {
  double total = 0.0;
  double mse_part = 0.0;
  double sa_part = 0.0;  // already scaled by zeta
};

// Masked reconstruction loss: per pixel, mean squared error plus
// zeta * normalized spectral angle, both restricted to masked bands.
// dreconstructed, when non-null, receives d(total)/d(reconstructed).
ReconLoss recon_loss(const Matrix& reconstructed, const Matrix& target,
                     const MaskPlan& plan, int patch_len, double zeta,
                     LossReduction reduction = LossReduction::Mean,
                     Matrix* dreconstructed = nullptr);

// Normalized spectral angle in [0,1]: arccos of the clamped cosine
// similarity divided by pi. Zero-norm inputs give 0 with a warning.
double spectral_angle(const Vector& a, const Vector& b);

}  // namespace hsidef
