#include "hsidef/train.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "hsidef/rng.hpp"
#include "hsidef/synth.hpp"

namespace hsidef {

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("config: epochs must be >= 0");
  if (base_lr <= 0.0) throw ConfigError("config: base_lr must be positive");
  if (warmup_epochs < 0) throw ConfigError("config: warmup_epochs must be >= 0");
  if (weight_decay < 0.0) throw ConfigError("config: weight_decay must be >= 0");
  if (alpha < 0.0 || alpha >= 1.0) throw ConfigError("config: alpha must be in [0,1)");
  if (beta < 0.0 || beta > 1.0) throw ConfigError("config: beta must be in [0,1]");
  if (zeta < 0.0) throw ConfigError("config: zeta must be >= 0");
  if (superpixel_fraction <= 0.0 || superpixel_fraction > 1.0)
    throw ConfigError("config: superpixel_fraction must be in (0,1]");
  if (m < 1 || d < 1 || n < 1) throw ConfigError("config: m, d, n must be >= 1");
  if (decoder_channels.empty()) throw ConfigError("config: decoder needs >= 1 layer");
  if (decoder_kernel < 1 || decoder_kernel % 2 == 0)
    throw ConfigError("config: decoder kernel must be odd");
  if (slic_iters < 1) throw ConfigError("config: slic_iters must be >= 1");
}

EncoderSettings TrainConfig::encoder_settings() const {
  EncoderSettings s;
  s.lambda_reg = lambda_reg;
  s.sigma = sigma;
  s.weighting = assoc_weighting;
  s.gcn_act = gcn_activation;
  return s;
}

double scheduled_lr(const TrainConfig& config, int epoch) {
  const int warmup = std::min(config.warmup_epochs, config.epochs);
  if (epoch < warmup) return config.base_lr * (epoch + 1) / static_cast<double>(warmup);
  const int span = std::max(1, config.epochs - warmup);
  const double progress = static_cast<double>(epoch - warmup) / span;
  return config.base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

void adam_step(AdamState& state, const std::vector<NamedTensor>& params,
               const std::vector<NamedTensor>& grads, const AdamConfig& config) {
  if (params.size() != grads.size())
    throw DataError("adam_step: parameter/gradient count mismatch");
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i] = Vector::Zero(params[i].size);
      state.v[i] = Vector::Zero(params[i].size);
    }
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& t = params[i];
    const auto& g = grads[i];
    if (t.size != g.size) throw DataError("adam_step: tensor size mismatch at " + t.name);
    for (Index k = 0; k < t.size; ++k) {
      const double grad = g.data[k] + config.weight_decay * t.data[k];
      state.m[i][k] = config.beta1 * state.m[i][k] + (1.0 - config.beta1) * grad;
      state.v[i][k] = config.beta2 * state.v[i][k] + (1.0 - config.beta2) * grad * grad;
      const double mhat = state.m[i][k] / bc1;
      const double vhat = state.v[i][k] / bc2;
      t.data[k] -= config.lr * mhat / (std::sqrt(vhat) + config.eps);
    }
  }
}

namespace {

NamedTensor view(const std::string& name, Matrix& m) {
  return {name, {m.rows(), m.cols()}, m.data(), m.size()};
}

NamedTensor view(const std::string& name, Vector& v) {
  return {name, {v.size()}, v.data(), v.size()};
}

}  // namespace

std::vector<NamedTensor> collect_params(ModelState& state) {
  std::vector<NamedTensor> out;
  out.push_back(view("ssl.w_e", state.enc.ssl.w_e));
  out.push_back(view("ssl.w_q", state.enc.ssl.w_q));
  out.push_back(view("ssl.w_k", state.enc.ssl.w_k));
  out.push_back(view("ssl.w_v", state.enc.ssl.w_v));
  out.push_back(view("ssl.w_t", state.enc.ssl.w_t));
  out.push_back(view("blanks", state.enc.blanks));
  out.push_back(view("gcn.w_g", state.enc.gcn.w_g));
  out.push_back(view("gcn.b", state.enc.gcn.b));
  for (std::size_t i = 0; i < state.dec.conv_layers.size(); ++i) {
    out.push_back(view("dec.conv" + std::to_string(i) + ".w",
                       state.dec.conv_layers[i].weights));
    out.push_back(view("dec.conv" + std::to_string(i) + ".b",
                       state.dec.conv_layers[i].bias));
  }
  out.push_back(view("dec.w_r", state.dec.w_r));
  out.push_back(view("dec.b_r", state.dec.b_r));
  return out;
}

void FullGrads::setZero(const ModelState& state) {
  enc.setZero(state.enc);
  dec.setZero(state.dec);
}

std::vector<NamedTensor> collect_grads(FullGrads& grads, const ModelState& state) {
  std::vector<NamedTensor> out;
  out.push_back(view("ssl.w_e", grads.enc.ssl.w_e));
  out.push_back(view("ssl.w_q", grads.enc.ssl.w_q));
  out.push_back(view("ssl.w_k", grads.enc.ssl.w_k));
  out.push_back(view("ssl.w_v", grads.enc.ssl.w_v));
  out.push_back(view("ssl.w_t", grads.enc.ssl.w_t));
  out.push_back(view("blanks", grads.enc.blanks));
  out.push_back(view("gcn.w_g", grads.enc.w_g));
  out.push_back(view("gcn.b", grads.enc.b));
  for (std::size_t i = 0; i < grads.dec.conv_layers.size(); ++i) {
    out.push_back(view("dec.conv" + std::to_string(i) + ".w",
                       grads.dec.conv_layers[i].weights));
    out.push_back(view("dec.conv" + std::to_string(i) + ".b",
                       grads.dec.conv_layers[i].bias));
  }
  out.push_back(view("dec.w_r", grads.dec.w_r));
  out.push_back(view("dec.b_r", grads.dec.b_r));
  (void)state;
  return out;
}

ModelState init_model(const HsiCube& cube, const TrainConfig& config) {
  config.validate();
  if (cube.bands % config.m != 0)
    throw DataError("init_model: cube bands not divisible by patch length; pad first");
  if (!cube.normalized)
    throw DataError("init_model: cube must be normalized");

  ModelState state;
  state.config = config;

  const int l = cube.bands / config.m;
  const int t = l * config.n;

  const int target = std::max(
      1, static_cast<int>(std::lround(config.superpixel_fraction * cube.pixels())));
  state.map = slic(cube, target, config.compactness, config.slic_iters,
                   derive_seed(config.seed_init, /*tag=*/0x736c6963ULL));

  state.enc.ssl = init_ssl_params(config.m, config.d, config.n, config.seed_init);
  Rng blank_rng(derive_seed(config.seed_init, /*tag=*/0x626c616e6bULL));
  state.enc.blanks.resize(l, config.n);
  const double bound = 1.0 / std::sqrt(static_cast<double>(config.n));
  for (Index i = 0; i < l; ++i)
    for (Index j = 0; j < config.n; ++j)
      state.enc.blanks(i, j) = blank_rng.uniform(-bound, bound);
  state.enc.gcn = init_gcn_params(t, config.beta, config.seed_init);
  state.dec = init_decoder_params(l, config.n, cube.bands, config.decoder_channels,
                                  config.decoder_kernel, config.decoder_activation,
                                  config.zeta, config.seed_init);
  return state;
}

namespace {

struct EpochOutcome {
  ReconLoss loss;
  double gamma = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::string> phases;
};

EpochOutcome run_epoch(ModelState& state, const HsiCube& cube,
                       const PositionalTable& table, int epoch_index) {
  const TrainConfig& config = state.config;
  const EncoderSettings settings = config.encoder_settings();
  const int l = cube.bands / config.m;

  EpochOutcome outcome;
  outcome.phases.push_back("sample_mask");
  const MaskPlan plan = sample_mask(
      l, config.alpha,
      derive_seed(config.seed_mask, /*tag=*/0x65706f6368ULL,
                  static_cast<std::uint64_t>(epoch_index)));

  // Adjacency for this epoch: RBF graph at epoch 0, learned update after.
  const IntMatrix* prior = nullptr;
  if (epoch_index > 0) {
    outcome.phases.push_back("learn_adjacency");
    const Matrix learned = learn_adjacency(state.node_repr_prev);
    outcome.phases.push_back("update_adjacency");
    const Matrix weighted = update_adjacency(state.adjacency, learned, config.beta);
    outcome.phases.push_back("threshold_adjacency");
    state.adjacency = threshold_adjacency(weighted, state.adjacency, &outcome.gamma);
    prior = &state.adjacency;
  }

  outcome.phases.insert(outcome.phases.end(),
                        {"ssl_forward", "fill_blanks", "superpixel_stats",
                         "association_matrix", "local_repr"});
  if (epoch_index == 0) outcome.phases.push_back("build_graph");
  outcome.phases.insert(outcome.phases.end(), {"gcn_forward", "propagate"});

  GraphContext ctx;
  EncoderForward fwd = encoder_forward(cube, plan, state.enc, table, state.map,
                                       prior, settings, &ctx);
  if (epoch_index == 0) state.adjacency = ctx.edges;

  outcome.phases.push_back("decode");
  const Index hw = cube.pixels();
  Matrix reconstructed(hw, cube.bands);
  std::vector<DecoderCache> dec_caches(static_cast<std::size_t>(hw));
  for (Index p = 0; p < hw; ++p) {
    reconstructed.row(p) =
        decode(fwd.z_hat.row(p).transpose(), state.dec,
               &dec_caches[static_cast<std::size_t>(p)])
            .transpose();
  }

  outcome.phases.push_back("recon_loss");
  Matrix drec;
  outcome.loss = recon_loss(reconstructed, cube.values, plan, config.m, config.zeta,
                            config.loss_reduction, &drec);

  FullGrads grads;
  grads.setZero(state);
  Matrix dz_hat(hw, fwd.z_hat.cols());
  for (Index p = 0; p < hw; ++p) {
    dz_hat.row(p) = decode_backward(drec.row(p).transpose(), state.dec,
                                    dec_caches[static_cast<std::size_t>(p)], &grads.dec)
                        .transpose();
  }
  encoder_backward(dz_hat, fwd, ctx, state.enc, settings, &grads.enc, nullptr);

  outcome.phases.push_back("optimizer_step");
  AdamConfig adam;
  adam.lr = scheduled_lr(config, epoch_index);
  adam.weight_decay = config.weight_decay;
  const auto params = collect_params(state);
  const auto grad_views = collect_grads(grads, state);
  adam_step(state.opt, params, grad_views, adam);

  // Store this epoch's global representation for the next structure update.
  state.node_repr_prev = fwd.node_repr;
  return outcome;
}

std::string parameter_norms(ModelState& state) {
  std::ostringstream msg;
  for (const auto& t : collect_params(state)) {
    double norm = 0.0;
    for (Index k = 0; k < t.size; ++k) norm += t.data[k] * t.data[k];
    msg << " " << t.name << "=" << std::sqrt(norm);
  }
  return msg.str();
}

}  // namespace

PretrainResult pretrain_continue(ModelState state, const HsiCube& cube, int epochs) {
  const PositionalTable table =
      make_positional_table(cube.bands / state.config.m, state.config.d);
  PretrainResult result;
  for (int e = 0; e < epochs; ++e) {
    const int epoch_index = state.epoch;
    const auto start = std::chrono::steady_clock::now();
    EpochOutcome outcome;
    try {
      outcome = run_epoch(state, cube, table, epoch_index);
    } catch (const NumericError& err) {
      throw NumericError("pretrain aborted at epoch " + std::to_string(epoch_index) +
                         ": " + err.what() + "; parameter norms:" +
                         parameter_norms(state));
    }
    const auto stop = std::chrono::steady_clock::now();

    EpochRecord rec;
    rec.epoch = epoch_index;
    rec.loss = outcome.loss.total;
    rec.mse = outcome.loss.mse_part;
    rec.sa = outcome.loss.sa_part;
    rec.edges = state.adjacency.size() > 0 ? state.adjacency.cast<long>().sum() : 0;
    rec.gamma = outcome.gamma;
    rec.lr = scheduled_lr(state.config, epoch_index);
    rec.wall_ms =
        std::chrono::duration_cast<std::chrono::duration<double, std::milli>>(stop - start)
            .count();
    rec.phases = std::move(outcome.phases);
    result.log.push_back(std::move(rec));
    state.epoch += 1;
  }
  result.state = std::move(state);
  return result;
}

PretrainResult pretrain(const HsiCube& cube, const TrainConfig& config) {
  ModelState state = init_model(cube, config);
  return pretrain_continue(std::move(state), cube, config.epochs);
}

Matrix extract_latents(const ModelState& state, const HsiCube& cube,
                       std::uint64_t mask_seed) {
  const TrainConfig& config = state.config;
  const int l = cube.bands / config.m;
  const PositionalTable table = make_positional_table(l, config.d);
  const MaskPlan plan =
      sample_mask(l, config.alpha, derive_seed(mask_seed, /*tag=*/0x696e666572ULL));

  const IntMatrix* prior =
      state.adjacency.size() > 0 ? &state.adjacency : nullptr;
  const EncoderForward fwd = encoder_forward(cube, plan, state.enc, table, state.map,
                                             prior, config.encoder_settings(), nullptr);
  return fwd.z_hat;
}

MlpParams train_mlp_classifier(const Matrix& features, const LabelMap& labels,
                               const DatasetSplit& split, const HeadConfig& config) {
  if (features.rows() != labels.pixels())
    throw DataError("train_mlp_classifier: feature rows do not cover the labels");

  std::vector<Index> train_rows;
  std::vector<bool> class_seen(static_cast<std::size_t>(labels.classes), false);
  for (Index p = 0; p < features.rows(); ++p) {
    if (!split.train_mask[static_cast<std::size_t>(p)]) continue;
    train_rows.push_back(p);
    const int y = labels.labels[static_cast<std::size_t>(p)];
    if (y > 0) class_seen[static_cast<std::size_t>(y - 1)] = true;
  }
  for (int c = 0; c < labels.classes; ++c) {
    if (!class_seen[static_cast<std::size_t>(c)])
      throw DataError("train_mlp_classifier: class " + std::to_string(c + 1) +
                      " absent from the training split");
  }

  Matrix train_feats(static_cast<Index>(train_rows.size()), features.cols());
  std::vector<int> train_labels(train_rows.size());
  for (std::size_t i = 0; i < train_rows.size(); ++i) {
    train_feats.row(static_cast<Index>(i)) = features.row(train_rows[i]);
    train_labels[i] = labels.labels[static_cast<std::size_t>(train_rows[i])];
  }

  MlpParams mlp = init_mlp(static_cast<int>(features.cols()), config.hidden,
                           labels.classes, config.seed);
  AdamState opt;
  AdamConfig adam;
  adam.lr = config.lr;
  adam.weight_decay = config.weight_decay;

  const double inv_count = 1.0 / static_cast<double>(train_rows.size());
  for (int e = 0; e < config.epochs; ++e) {
    MlpCache cache;
    const Matrix scores = mlp_forward(train_feats, mlp, &cache);
    Matrix dscores;
    cross_entropy(scores, train_labels, &dscores);
    dscores *= inv_count;

    MlpGrads grads;
    grads.setZero(mlp);
    mlp_backward(dscores, mlp, cache, &grads, nullptr);

    std::vector<NamedTensor> params, grad_views;
    for (std::size_t i = 0; i < mlp.w.size(); ++i) {
      params.push_back({"w" + std::to_string(i), {mlp.w[i].rows(), mlp.w[i].cols()},
                        mlp.w[i].data(), mlp.w[i].size()});
      params.push_back({"b" + std::to_string(i), {mlp.b[i].size()}, mlp.b[i].data(),
                        mlp.b[i].size()});
      grad_views.push_back({"w" + std::to_string(i),
                            {grads.w[i].rows(), grads.w[i].cols()}, grads.w[i].data(),
                            grads.w[i].size()});
      grad_views.push_back({"b" + std::to_string(i), {grads.b[i].size()},
                            grads.b[i].data(), grads.b[i].size()});
    }
    adam_step(opt, params, grad_views, adam);
  }
  return mlp;
}

MlpParams train_head(const ModelState& state, const HsiCube& cube, const LabelMap& labels,
                     const DatasetSplit& split, const HeadConfig& config) {
  const Matrix latents = extract_latents(state, cube, config.mask_seed);
  return train_mlp_classifier(latents, labels, split, config);
}

double GradCheckReport::worst_rel_err() const {
  double worst = 0.0;
  for (const auto& e : entries) worst = std::max(worst, e.max_rel_err);
  return worst;
}

}  // namespace hsidef
