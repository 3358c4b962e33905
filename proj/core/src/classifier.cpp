#include "hsidef/classifier.hpp"

#include <cmath>

#include "hsidef/rng.hpp"

namespace hsidef {

namespace {

class BaselineLocalModel final : public PixelLocalModel {
 public:
  explicit BaselineLocalModel(const MlpParams& mlp) : mlp_(mlp) {}

  Vector scores(int, const Vector& spectrum) override {
    return mlp_forward(spectrum.transpose(), mlp_, nullptr).row(0).transpose();
  }

  Matrix jacobian(int, const Vector& spectrum) override {
    return mlp_input_jacobian(spectrum, mlp_);
  }

 private:
  const MlpParams& mlp_;
};

}  // namespace

Matrix BaselineClassifier::scores(const HsiCube& cube) {
  if (cube.real_bands() != mlp_.in_width())
    throw DataError("baseline: cube band count does not match the classifier");
  return mlp_forward(cube.values.leftCols(mlp_.in_width()), mlp_, nullptr);
}

Matrix BaselineClassifier::input_gradient(const HsiCube& cube, const Matrix& dscores) {
  MlpCache cache;
  mlp_forward(cube.values.leftCols(mlp_.in_width()), mlp_, &cache);
  Matrix dfeats;
  mlp_backward(dscores, mlp_, cache, nullptr, &dfeats);
  return dfeats;
}

std::unique_ptr<PixelLocalModel> BaselineClassifier::local_view(const HsiCube&) {
  return std::make_unique<BaselineLocalModel>(mlp_);
}

DefendedClassifier::DefendedClassifier(ModelState state, MlpParams head, Options options)
    : state_(std::move(state)), head_(std::move(head)), options_(options) {
  if (options_.eot_samples < 1) throw ConfigError("defended: eot_samples must be >= 1");
}

HsiCube DefendedClassifier::pad(const HsiCube& cube) const {
  return zero_pad_bands(cube, state_.config.m);
}

std::uint64_t DefendedClassifier::next_plan_seed() {
  if (options_.freeze_mask)
    return derive_seed(options_.mask_seed, /*tag=*/0x696e666572ULL);
  return derive_seed(options_.mask_seed, /*tag=*/0x6672657368ULL, call_counter_++);
}

DefendedClassifier::Pass DefendedClassifier::run_encoder(const HsiCube& padded,
                                                         std::uint64_t plan_seed) const {
  const TrainConfig& config = state_.config;
  const int l = padded.bands / config.m;
  const PositionalTable table = make_positional_table(l, config.d);

  Pass pass;
  pass.plan = sample_mask(l, config.alpha, plan_seed);

  const IntMatrix* prior = nullptr;
  if (options_.reuse_superpixels) {
    pass.map = state_.map;
    if (state_.adjacency.rows() == state_.map.count) prior = &state_.adjacency;
  } else {
    const int target = std::max(
        1, static_cast<int>(std::lround(config.superpixel_fraction * padded.pixels())));
    pass.map = slic(padded, target, config.compactness, config.slic_iters,
                    derive_seed(config.seed_init, /*tag=*/0x736c6963ULL));
  }

  pass.fwd = encoder_forward(padded, pass.plan, state_.enc, table, pass.map, prior,
                             config.encoder_settings(), &pass.ctx);
  return pass;
}

Matrix DefendedClassifier::scores(const HsiCube& cube) {
  const HsiCube padded = pad(cube);
  const Pass pass = run_encoder(padded, next_plan_seed());
  return mlp_forward(pass.fwd.z_hat, head_, nullptr);
}

Matrix DefendedClassifier::input_gradient(const HsiCube& cube, const Matrix& dscores) {
  const HsiCube padded = pad(cube);
  const Pass pass = run_encoder(padded, next_plan_seed());

  MlpCache cache;
  mlp_forward(pass.fwd.z_hat, head_, &cache);
  Matrix dz_hat;
  mlp_backward(dscores, head_, cache, nullptr, &dz_hat);

  Matrix dinput;
  encoder_backward(dz_hat, pass.fwd, pass.ctx, state_.enc,
                   state_.config.encoder_settings(), nullptr, &dinput);
  return dinput.leftCols(cube.bands);
}

namespace {

// One frozen mask context for the per-pixel view.
struct LocalContext {
  MaskPlan plan;
  std::vector<double> weight;   // association weight per pixel
  std::vector<int> owner;       // superpixel per pixel
  Vector self_mix;              // S(j,j) of the normalized adjacency
  Matrix preact;                // GCN pre-activations, H x t
  Matrix z;                     // frozen full attention set
};

}  // namespace

class DefendedLocalModel final : public PixelLocalModel {
 public:
  DefendedLocalModel(const DefendedClassifier& parent, const HsiCube& padded,
                     std::vector<DefendedClassifier::Pass> passes)
      : enc_(parent.state_.enc),
        head_(parent.head_),
        settings_(parent.state_.config.encoder_settings()),
        table_(make_positional_table(padded.bands / parent.state_.config.m,
                                     parent.state_.config.d)),
        m_(parent.state_.config.m),
        padded_bands_(padded.bands),
        real_bands_(padded.bands - padded.padded) {
    for (auto& pass : passes) {
      LocalContext ctx;
      ctx.plan = pass.plan;
      ctx.weight = pass.ctx.assoc.weight;
      ctx.owner = pass.ctx.assoc.owner;
      const Matrix s_norm = normalized_adjacency(pass.ctx.edges);
      ctx.self_mix = s_norm.diagonal();
      ctx.preact = pass.fwd.preact;
      ctx.z = std::move(pass.fwd.z);
      contexts_.push_back(std::move(ctx));
    }
  }

  Vector scores(int pixel, const Vector& spectrum) override {
    Vector total = Vector::Zero(head_.classes());
    for (const auto& ctx : contexts_)
      total += eval(ctx, pixel, spectrum).scores;
    return total / static_cast<double>(contexts_.size());
  }

  Matrix jacobian(int pixel, const Vector& spectrum) override {
    Matrix total = Matrix::Zero(head_.classes(), real_bands_);
    for (const auto& ctx : contexts_) {
      const Eval ev = eval(ctx, pixel, spectrum);
      // Reverse pass per class through the local chain:
      // x -> z (attention) -> pre_j (self-hop) -> l_hat_j -> z_hat -> head.
      const Matrix head_jac = mlp_input_jacobian(ev.z_hat, head_);  // K x t
      const double omega = ctx.weight[static_cast<std::size_t>(pixel)];
      const double mix = ctx.self_mix[ctx.owner[static_cast<std::size_t>(pixel)]];
      Matrix dattn(ctx.plan.r(), enc_.ssl.n());
      for (int k = 0; k < head_.classes(); ++k) {
        Eigen::RowVectorXd g_lhat = omega * head_jac.row(k);
        Eigen::RowVectorXd g_pre(g_lhat.size());
        for (Index i = 0; i < g_pre.size(); ++i)
          g_pre[i] = g_lhat[i] * activation_grad(settings_.gcn_act, ev.pre_new[i]);
        const Eigen::RowVectorXd g_z =
            (mix * omega) * (g_pre * enc_.gcn.w_g.transpose());
        // Kept slots feed the attention backward; masked slots are blanks.
        for (int i = 0; i < ctx.plan.r(); ++i) {
          const int slot = ctx.plan.kept[static_cast<std::size_t>(i)];
          dattn.row(i) = g_z.segment(static_cast<Index>(slot) * enc_.ssl.n(),
                                     enc_.ssl.n());
        }
        Matrix dpatches;
        ssl_backward(dattn, enc_.ssl, ev.ssl_cache, nullptr, &dpatches);
        for (int i = 0; i < ctx.plan.r(); ++i) {
          const int patch = ctx.plan.kept[static_cast<std::size_t>(i)];
          for (int b = 0; b < m_; ++b) {
            const int band = patch * m_ + b;
            if (band < real_bands_) total(k, band) += dpatches(i, b);
          }
        }
      }
    }
    return total / static_cast<double>(contexts_.size());
  }

 private:
  struct Eval {
    Vector scores;
    Vector z_hat;
    Eigen::RowVectorXd pre_new;
    SslCache ssl_cache;
  };

  Eval eval(const LocalContext& ctx, int pixel, const Vector& spectrum) {
    Vector padded_spec = Vector::Zero(padded_bands_);
    padded_spec.head(real_bands_) = spectrum;

    Matrix kept(ctx.plan.r(), m_);
    for (int i = 0; i < ctx.plan.r(); ++i) {
      const int patch = ctx.plan.kept[static_cast<std::size_t>(i)];
      kept.row(i) = padded_spec.segment(static_cast<Index>(patch) * m_, m_).transpose();
    }

    Eval ev;
    const Matrix attn = ssl_forward(kept, ctx.plan.kept, enc_.ssl, table_, &ev.ssl_cache);
    const Vector z_new = fill_blanks(attn, ctx.plan, enc_.blanks);

    const int j = ctx.owner[static_cast<std::size_t>(pixel)];
    const double omega = ctx.weight[static_cast<std::size_t>(pixel)];
    const double mix = ctx.self_mix[j];
    const Eigen::RowVectorXd delta =
        (z_new - ctx.z.row(pixel).transpose()).transpose();
    ev.pre_new = ctx.preact.row(j) + (mix * omega) * (delta * enc_.gcn.w_g);

    Eigen::RowVectorXd l_hat(ev.pre_new.size());
    for (Index i = 0; i < l_hat.size(); ++i)
      l_hat[i] = apply_activation(settings_.gcn_act, ev.pre_new[i]);
    ev.z_hat = (omega * l_hat).transpose();
    ev.scores = mlp_forward(ev.z_hat.transpose(), head_, nullptr).row(0).transpose();
    return ev;
  }

  const EncoderParams& enc_;
  const MlpParams& head_;
  EncoderSettings settings_;
  PositionalTable table_;
  int m_;
  int padded_bands_;
  int real_bands_;
  std::vector<LocalContext> contexts_;
};

std::unique_ptr<PixelLocalModel> DefendedClassifier::local_view(const HsiCube& cube) {
  const HsiCube padded = pad(cube);
  std::vector<Pass> passes;
  passes.reserve(static_cast<std::size_t>(options_.eot_samples));
  for (int s = 0; s < options_.eot_samples; ++s)
    passes.push_back(run_encoder(padded, next_plan_seed()));
  return std::make_unique<DefendedLocalModel>(*this, padded, std::move(passes));
}

}  // namespace hsidef
