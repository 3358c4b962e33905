#include "hsidef/encoder.hpp"

namespace hsidef {

Matrix encode_pixels(const HsiCube& cube, const MaskPlan& plan,
                     const EncoderParams& params, const PositionalTable& table,
                     std::vector<SslCache>* caches) {
  const int m = params.ssl.m();
  const int n = params.ssl.n();
  const int l = plan.l;
  if (cube.bands != l * m)
    throw DataError("encode_pixels: cube bands " + std::to_string(cube.bands) +
                    " do not match plan (" + std::to_string(l * m) + ")");
  if (params.blanks.rows() != l || params.blanks.cols() != n)
    throw DataError("encode_pixels: blank table shape mismatch");

  const int hw = cube.pixels();
  const int r = plan.r();
  Matrix z(hw, static_cast<Index>(l) * n);
  if (caches) caches->resize(static_cast<std::size_t>(hw));

  Matrix kept_patches(r, m);
  for (int p = 0; p < hw; ++p) {
    for (int i = 0; i < r; ++i) {
      const int patch = plan.kept[static_cast<std::size_t>(i)];
      kept_patches.row(i) =
          cube.values.row(p).segment(static_cast<Index>(patch) * m, m);
    }
    SslCache* cache = caches ? &(*caches)[static_cast<std::size_t>(p)] : nullptr;
    const Matrix attention = ssl_forward(kept_patches, plan.kept, params.ssl, table, cache);
    z.row(p) = fill_blanks(attention, plan, params.blanks).transpose();
  }
  return z;
}

namespace {

EncoderForward finish_forward(Matrix z, const MaskPlan& plan,
                              std::vector<SslCache> caches, const GraphContext& ctx,
                              const EncoderParams& params, const EncoderSettings& settings) {
  EncoderForward fwd;
  fwd.plan = plan;
  fwd.ssl_caches = std::move(caches);
  fwd.z = std::move(z);
  fwd.nodes = local_repr(ctx.assoc, fwd.z);

  Graph graph;
  graph.nodes = fwd.nodes;
  graph.edges = ctx.edges;
  graph.sigma = ctx.sigma;
  graph.epsilon = ctx.epsilon;
  fwd.node_repr = gcn_forward(graph, params.gcn, settings.gcn_act, &fwd.preact);
  fwd.z_hat = propagate(ctx.assoc, fwd.node_repr);
  return fwd;
}

}  // namespace

EncoderForward encoder_forward(const HsiCube& cube, const MaskPlan& plan,
                               const EncoderParams& params, const PositionalTable& table,
                               const SuperpixelMap& map, const IntMatrix* prior_edges,
                               const EncoderSettings& settings, GraphContext* ctx_out) {
  std::vector<SslCache> caches;
  Matrix z = encode_pixels(cube, plan, params, table, &caches);

  GraphContext ctx;
  ctx.stats = superpixel_stats(z, map, settings.lambda_reg);
  ctx.assoc = association_matrix(z, ctx.stats, map, settings.weighting);

  if (prior_edges) {
    ctx.edges = *prior_edges;
    ctx.sigma = settings.sigma;
    ctx.epsilon = 0.0;
  } else {
    const Matrix nodes = local_repr(ctx.assoc, z);
    const Graph g = build_graph(nodes, settings.sigma);
    ctx.edges = g.edges;
    ctx.sigma = g.sigma;
    ctx.epsilon = g.epsilon;
  }

  EncoderForward fwd =
      finish_forward(std::move(z), plan, std::move(caches), ctx, params, settings);
  if (ctx_out) *ctx_out = std::move(ctx);
  return fwd;
}

EncoderForward encoder_forward_frozen(const HsiCube& cube, const MaskPlan& plan,
                                      const EncoderParams& params,
                                      const PositionalTable& table,
                                      const GraphContext& ctx,
                                      const EncoderSettings& settings) {
  std::vector<SslCache> caches;
  Matrix z = encode_pixels(cube, plan, params, table, &caches);
  return finish_forward(std::move(z), plan, std::move(caches), ctx, params, settings);
}

void EncoderGrads::setZero(const EncoderParams& p) {
  ssl.setZero(p.ssl);
  blanks = Matrix::Zero(p.blanks.rows(), p.blanks.cols());
  w_g = Matrix::Zero(p.gcn.w_g.rows(), p.gcn.w_g.cols());
  b = Vector::Zero(p.gcn.b.size());
}

void encoder_backward(const Matrix& dz_hat, const EncoderForward& fwd,
                      const GraphContext& ctx, const EncoderParams& params,
                      const EncoderSettings& settings, EncoderGrads* grads,
                      Matrix* dinput) {
  const int n = params.ssl.n();
  const int m = params.ssl.m();
  const int l = fwd.plan.l;
  const int r = fwd.plan.r();
  const Index hw = fwd.z.rows();

  // z_hat = O~ L_hat
  Matrix dnode_repr = Matrix::Zero(fwd.node_repr.rows(), fwd.node_repr.cols());
  for (Index p = 0; p < hw; ++p) {
    dnode_repr.row(ctx.assoc.owner[static_cast<std::size_t>(p)]) +=
        ctx.assoc.weight[static_cast<std::size_t>(p)] * dz_hat.row(p);
  }

  Graph graph;
  graph.nodes = fwd.nodes;
  graph.edges = ctx.edges;
  Matrix* dw_g = grads ? &grads->w_g : nullptr;
  Vector* db = grads ? &grads->b : nullptr;
  const Matrix dnodes = gcn_backward(graph, params.gcn, settings.gcn_act, fwd.preact,
                                     dnode_repr, dw_g, db);

  // L = O~^T Z
  if (dinput) *dinput = Matrix::Zero(hw, static_cast<Index>(l) * m);
  Matrix dattention(r, n);
  Matrix dpatches;
  for (Index p = 0; p < hw; ++p) {
    const Eigen::RowVectorXd dz =
        ctx.assoc.weight[static_cast<std::size_t>(p)] *
        dnodes.row(ctx.assoc.owner[static_cast<std::size_t>(p)]);

    // Split slots: kept slots feed the attention backward, masked slots
    // accumulate straight into the blank table.
    int kept_pos = 0;
    for (int slot = 0; slot < l; ++slot) {
      const bool is_kept =
          kept_pos < r && fwd.plan.kept[static_cast<std::size_t>(kept_pos)] == slot;
      if (is_kept) {
        dattention.row(kept_pos) = dz.segment(static_cast<Index>(slot) * n, n);
        ++kept_pos;
      } else if (grads) {
        grads->blanks.row(slot) += dz.segment(static_cast<Index>(slot) * n, n);
      }
    }

    SslGrads* ssl_grads = grads ? &grads->ssl : nullptr;
    Matrix* dp = dinput ? &dpatches : nullptr;
    ssl_backward(dattention, params.ssl, fwd.ssl_caches[static_cast<std::size_t>(p)],
                 ssl_grads, dp);
    if (dinput) {
      for (int i = 0; i < r; ++i) {
        const int patch = fwd.plan.kept[static_cast<std::size_t>(i)];
        dinput->row(p).segment(static_cast<Index>(patch) * m, m) = dpatches.row(i);
      }
    }
  }
}

}  // namespace hsidef
