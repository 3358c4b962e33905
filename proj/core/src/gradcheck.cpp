#include <cmath>

#include "hsidef/rng.hpp"
#include "hsidef/synth.hpp"
#include "hsidef/train.hpp"

namespace hsidef {

namespace {

struct FrozenLoss {
  const HsiCube* cube;
  const MaskPlan* plan;
  const PositionalTable* table;
  const GraphContext* ctx;
  EncoderSettings settings;

  double operator()(const ModelState& state) const {
    const EncoderForward fwd = encoder_forward_frozen(*cube, *plan, state.enc, *table,
                                                      *ctx, settings);
    Matrix reconstructed(cube->pixels(), cube->bands);
    for (Index p = 0; p < reconstructed.rows(); ++p)
      reconstructed.row(p) =
          decode(fwd.z_hat.row(p).transpose(), state.dec, nullptr).transpose();
    return recon_loss(reconstructed, cube->values, *plan, state.config.m,
                      state.config.zeta, state.config.loss_reduction, nullptr)
        .total;
  }
};

}  // namespace

GradCheckReport grad_check(ModelState& state, const HsiCube& cube, double fd_step) {
  const TrainConfig& config = state.config;
  const EncoderSettings settings = config.encoder_settings();
  const int l = cube.bands / config.m;
  const PositionalTable table = make_positional_table(l, config.d);
  const MaskPlan plan = sample_mask(
      l, config.alpha, derive_seed(config.seed_mask, /*tag=*/0x67636bULL));

  // Analytic pass; the association weights and adjacency computed here stay
  // frozen for both the backward pass and every finite-difference probe, so
  // the comparison covers exactly the differentiable chain.
  GraphContext ctx;
  const EncoderForward fwd = encoder_forward(cube, plan, state.enc, table, state.map,
                                             nullptr, settings, &ctx);
  Matrix reconstructed(cube.pixels(), cube.bands);
  std::vector<DecoderCache> dec_caches(static_cast<std::size_t>(cube.pixels()));
  for (Index p = 0; p < reconstructed.rows(); ++p)
    reconstructed.row(p) =
        decode(fwd.z_hat.row(p).transpose(), state.dec,
               &dec_caches[static_cast<std::size_t>(p)])
            .transpose();
  Matrix drec;
  recon_loss(reconstructed, cube.values, plan, config.m, config.zeta,
             config.loss_reduction, &drec);

  FullGrads grads;
  grads.setZero(state);
  Matrix dz_hat(cube.pixels(), fwd.z_hat.cols());
  for (Index p = 0; p < dz_hat.rows(); ++p)
    dz_hat.row(p) = decode_backward(drec.row(p).transpose(), state.dec,
                                    dec_caches[static_cast<std::size_t>(p)], &grads.dec)
                        .transpose();
  encoder_backward(dz_hat, fwd, ctx, state.enc, settings, &grads.enc, nullptr);

  const FrozenLoss loss{&cube, &plan, &table, &ctx, settings};

  GradCheckReport report;
  const auto params = collect_params(state);
  const auto analytic = collect_grads(grads, state);
  for (std::size_t ti = 0; ti < params.size(); ++ti) {
    GradCheckEntry entry;
    entry.name = params[ti].name;
    for (Index k = 0; k < params[ti].size; ++k) {
      double* slot = params[ti].data + k;
      const double saved = *slot;
      *slot = saved + fd_step;
      const double up = loss(state);
      *slot = saved - fd_step;
      const double down = loss(state);
      *slot = saved;
      const double fd = (up - down) / (2.0 * fd_step);
      const double an = analytic[ti].data[k];
      const double abs_err = std::abs(fd - an);
      const double rel_err = abs_err / std::max({std::abs(fd), std::abs(an), 1e-8});
      entry.max_abs_err = std::max(entry.max_abs_err, abs_err);
      entry.max_rel_err = std::max(entry.max_rel_err, rel_err);
    }
    report.entries.push_back(std::move(entry));
  }
  return report;
}

std::pair<ModelState, HsiCube> make_tiny_state(bool linear, std::uint64_t seed) {
  SynthSpec spec;
  spec.height = 4;
  spec.width = 4;
  spec.bands = 12;
  spec.classes = 2;
  spec.blob_count = 2;
  spec.noise_sigma = 0.05;
  spec.seed = seed;
  auto [raw, labels] = synth_generate(spec);
  (void)labels;
  HsiCube cube = normalize(raw);

  TrainConfig config;
  config.m = 4;  // l = 3
  config.d = 4;
  config.n = 4;  // t = 12
  config.alpha = 0.4;
  config.decoder_channels = {3, 2};
  config.decoder_kernel = 3;
  config.superpixel_fraction = 3.0 / 16.0;
  config.epochs = 1;
  config.seed_init = derive_seed(seed, /*tag=*/0x74696e79ULL);
  config.seed_mask = derive_seed(seed, /*tag=*/0x6d61736bULL);
  if (linear) {
    config.gcn_activation = Activation::Identity;
    config.decoder_activation = Activation::Identity;
  }
  cube = zero_pad_bands(cube, config.m);
  ModelState state = init_model(cube, config);
  return {std::move(state), std::move(cube)};
}

}  // namespace hsidef
