#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hsidef/decoder.hpp"
#include "hsidef/encoder.hpp"
#include "hsidef/mlp.hpp"

namespace hsidef {

struct TrainConfig {
  int epochs = 500;
  double base_lr = 1e-3;
  int warmup_epochs = 10;       // linear warmup, then cosine decay
  double weight_decay = 5e-5;
  double alpha = 0.5;           // masking ratio
  double beta = 0.1;            // adjacency mix
  double zeta = 0.05;           // spectral-angle weight
  double superpixel_fraction = 0.01;
  int m = 8;                    // patch length
  int d = 64;                   // embedding width
  int n = 16;                   // attention feature width
  std::vector<int> decoder_channels{32, 32, 16};
  int decoder_kernel = 3;
  Activation gcn_activation = Activation::Rectifier;
  Activation decoder_activation = Activation::Rectifier;
  AssocWeighting assoc_weighting = AssocWeighting::Paper;
  LossReduction loss_reduction = LossReduction::Mean;
  double lambda_reg = -1.0;     // <=0: scaled-trace default
  double sigma = -1.0;          // <=0: median heuristic
  double compactness = -1.0;    // <=0: spectral-distance default
  int slic_iters = 10;
  std::uint64_t seed_init = 1;
  std::uint64_t seed_mask = 2;

  void validate() const;
  EncoderSettings encoder_settings() const;
};

double scheduled_lr(const TrainConfig& config, int epoch);

// Flat mutable view over one trainable (or stored) tensor.
struct NamedTensor {
  std::string name;
  std::vector<Index> shape;
  double* data = nullptr;
  Index size = 0;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

struct AdamState {
  std::vector<Vector> m, v;
  long step = 0;
};

// One update; weight decay enters as an L2 term on the gradient.
void adam_step(AdamState& state, const std::vector<NamedTensor>& params,
               const std::vector<NamedTensor>& grads, const AdamConfig& config);

struct ModelState {
  TrainConfig config;
  EncoderParams enc;
  DecoderParams dec;
  SuperpixelMap map;        // computed once on the clean input
  IntMatrix adjacency;      // current E, empty before epoch 0
  Matrix node_repr_prev;    // previous epoch's global representation
  int epoch = 0;
  AdamState opt;
};

struct FullGrads {
  EncoderGrads enc;
  DecoderGrads dec;

  void setZero(const ModelState& state);
};

// Views over every trainable tensor, in a fixed documented order.
std::vector<NamedTensor> collect_params(ModelState& state);
std::vector<NamedTensor> collect_grads(FullGrads& grads, const ModelState& state);

// SLIC + parameter init; the cube must be normalized and band-padded.
ModelState init_model(const HsiCube& cube, const TrainConfig& config);

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0, mse = 0.0, sa = 0.0;
  long edges = 0;
  double gamma = std::numeric_limits<double>::quiet_NaN();  // NaN at epoch 0
  double lr = 0.0;
  double wall_ms = 0.0;
  std::vector<std::string> phases;
};

struct PretrainResult {
  ModelState state;
  std::vector<EpochRecord> log;
};

// Self-supervised pretraining: fresh mask plan per epoch, adjacency built
// from the RBF graph at epoch 0 and updated through the learned inner
// product afterwards, one full-image optimizer step per epoch.
PretrainResult pretrain(const HsiCube& cube, const TrainConfig& config);
PretrainResult pretrain_continue(ModelState state, const HsiCube& cube, int epochs);

// Frozen-encoder latent features under a held mask seed.
Matrix extract_latents(const ModelState& state, const HsiCube& cube,
                       std::uint64_t mask_seed);

struct HeadConfig {
  int epochs = 200;
  double lr = 1e-3;
  double weight_decay = 5e-5;
  std::vector<int> hidden{64, 32, 16};
  std::uint64_t seed = 3;
  std::uint64_t mask_seed = 4;  // frozen mask for feature extraction
};

// Full-batch cross-entropy training of the classifier on the rows of
// `features` selected by the split's train mask.
MlpParams train_mlp_classifier(const Matrix& features, const LabelMap& labels,
                               const DatasetSplit& split, const HeadConfig& config);

// Downstream head on frozen-encoder latents.
MlpParams train_head(const ModelState& state, const HsiCube& cube, const LabelMap& labels,
                     const DatasetSplit& split, const HeadConfig& config);

// --- Gradient verification ------------------------------------------------

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double worst_rel_err() const;
};

// Central finite differences (step fd_step) of the full masked loss against
// the analytic gradients, association and adjacency frozen on both sides.
GradCheckReport grad_check(ModelState& state, const HsiCube& cube, double fd_step = 1e-5);

// Tiny deterministic configuration for the gradient checker (hw = 16,
// t = 12). linear = identity activations everywhere.
std::pair<ModelState, HsiCube> make_tiny_state(bool linear, std::uint64_t seed);

}  // namespace hsidef
