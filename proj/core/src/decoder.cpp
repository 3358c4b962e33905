#include "hsidef/decoder.hpp"

#include <cmath>

#include "hsidef/rng.hpp"

namespace hsidef {

DecoderParams init_decoder_params(int slots, int in_channels, int bands,
                                  const std::vector<int>& channels, int kernel_len,
                                  Activation act, double zeta, std::uint64_t seed) {
  if (slots < 1 || in_channels < 1 || bands < 1)
    throw ConfigError("init_decoder_params: sizes must be >= 1");
  if (channels.empty()) throw ConfigError("init_decoder_params: need >= 1 conv layer");
  if (kernel_len < 1 || kernel_len % 2 == 0)
    throw ConfigError("init_decoder_params: kernel length must be odd");

  Rng rng(derive_seed(seed, /*tag=*/0x646563ULL));
  DecoderParams p;
  p.slots = slots;
  p.in_channels = in_channels;
  p.zeta = zeta;

  int prev = in_channels;
  for (const int out : channels) {
    if (out < 1) throw ConfigError("init_decoder_params: channel count must be >= 1");
    ConvLayer layer;
    layer.act = act;
    layer.klen = kernel_len;
    const double bound = 1.0 / std::sqrt(static_cast<double>(prev * kernel_len));
    layer.weights.resize(out, prev * kernel_len);
    for (Index i = 0; i < layer.weights.rows(); ++i)
      for (Index j = 0; j < layer.weights.cols(); ++j)
        layer.weights(i, j) = rng.uniform(-bound, bound);
    layer.bias = Vector::Zero(out);
    p.conv_layers.push_back(std::move(layer));
    prev = out;
  }

  const int flat = slots * prev;
  const double bound = 1.0 / std::sqrt(static_cast<double>(flat));
  p.w_r.resize(flat, bands);
  for (Index i = 0; i < flat; ++i)
    for (Index j = 0; j < bands; ++j) p.w_r(i, j) = rng.uniform(-bound, bound);
  p.b_r = Vector::Zero(bands);
  return p;
}

namespace {

// Same-padded 1-D convolution along the rows axis. in: l x in_ch.
Matrix conv1d(const Matrix& in, const ConvLayer& layer) {
  const Index l = in.rows();
  const int out_ch = layer.out_channels();
  const int in_ch = layer.in_channels();
  const int k = layer.kernel_len();
  const int half = k / 2;
  Matrix out(l, out_ch);
  for (Index pos = 0; pos < l; ++pos) {
    for (int o = 0; o < out_ch; ++o) {
      double acc = layer.bias[o];
      for (int dk = 0; dk < k; ++dk) {
        const Index src = pos + dk - half;
        if (src < 0 || src >= l) continue;
        for (int c = 0; c < in_ch; ++c) acc += layer.weights(o, c * k + dk) * in(src, c);
      }
      out(pos, o) = acc;
    }
  }
  return out;
}

}  // namespace

Vector decode(const Vector& latent, const DecoderParams& params, DecoderCache* cache) {
  const Index expected = static_cast<Index>(params.slots) * params.in_channels;
  if (latent.size() != expected)
    throw DataError("decode: latent length " + std::to_string(latent.size()) +
                    " does not match decoder input " + std::to_string(expected));

  // Reshape slot-major: row i = channels of slot i.
  Matrix current(params.slots, params.in_channels);
  for (int i = 0; i < params.slots; ++i)
    current.row(i) =
        latent.segment(static_cast<Index>(i) * params.in_channels, params.in_channels)
            .transpose();

  if (cache) {
    cache->inputs.clear();
    cache->preacts.clear();
  }
  for (const auto& layer : params.conv_layers) {
    if (layer.in_channels() != current.cols())
      throw DataError("decode: conv layer channel mismatch");
    if (cache) cache->inputs.push_back(current);
    Matrix pre = conv1d(current, layer);
    if (!pre.allFinite()) throw NumericError("decode: non-finite conv activations");
    if (cache) cache->preacts.push_back(pre);
    current = pre.unaryExpr(
        [act = layer.act](double x) { return apply_activation(act, x); });
  }

  Vector flat(current.size());
  for (Index i = 0; i < current.rows(); ++i)
    flat.segment(i * current.cols(), current.cols()) = current.row(i).transpose();

  Vector pre = params.w_r.transpose() * flat + params.b_r;
  Vector out = pre.unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
  if (cache) {
    cache->flat_pre = pre;
    cache->output = out;
  }
  return out;
}

void DecoderGrads::setZero(const DecoderParams& p) {
  conv_layers.clear();
  for (const auto& layer : p.conv_layers) {
    ConvLayer g;
    g.act = layer.act;
    g.klen = layer.klen;
    g.weights = Matrix::Zero(layer.weights.rows(), layer.weights.cols());
    g.bias = Vector::Zero(layer.bias.size());
    conv_layers.push_back(std::move(g));
  }
  w_r = Matrix::Zero(p.w_r.rows(), p.w_r.cols());
  b_r = Vector::Zero(p.b_r.size());
}

void DecoderGrads::accumulate(const DecoderGrads& other) {
  for (std::size_t i = 0; i < conv_layers.size(); ++i) {
    conv_layers[i].weights += other.conv_layers[i].weights;
    conv_layers[i].bias += other.conv_layers[i].bias;
  }
  w_r += other.w_r;
  b_r += other.b_r;
}

Vector decode_backward(const Vector& doutput, const DecoderParams& params,
                       const DecoderCache& cache, DecoderGrads* grads) {
  // Sigmoid head.
  Vector dpre(doutput.size());
  for (Index i = 0; i < doutput.size(); ++i) {
    const double s = cache.output[i];
    dpre[i] = doutput[i] * s * (1.0 - s);
  }

  const auto& last_pre = cache.preacts.back();
  const Index l = last_pre.rows();
  const Index last_ch = last_pre.cols();
  const auto& last_layer = params.conv_layers.back();

  Vector flat(l * last_ch);
  for (Index i = 0; i < l; ++i)
    for (Index c = 0; c < last_ch; ++c)
      flat[i * last_ch + c] = apply_activation(last_layer.act, last_pre(i, c));

  if (grads) {
    grads->w_r.noalias() += flat * dpre.transpose();
    grads->b_r += dpre;
  }
  const Vector dflat = params.w_r * dpre;

  Matrix dcurrent(l, last_ch);
  for (Index i = 0; i < l; ++i)
    dcurrent.row(i) = dflat.segment(i * last_ch, last_ch).transpose();

  for (int li = static_cast<int>(params.conv_layers.size()) - 1; li >= 0; --li) {
    const auto& layer = params.conv_layers[static_cast<std::size_t>(li)];
    const auto& pre = cache.preacts[static_cast<std::size_t>(li)];
    const auto& in = cache.inputs[static_cast<std::size_t>(li)];
    const int k = layer.kernel_len();
    const int in_ch = layer.in_channels();
    const int half = k / 2;

    const Matrix dpre_conv = dcurrent.cwiseProduct(pre.unaryExpr(
        [act = layer.act](double x) { return activation_grad(act, x); }));

    Matrix din = Matrix::Zero(in.rows(), in.cols());
    ConvLayer* layer_grads =
        grads ? &grads->conv_layers[static_cast<std::size_t>(li)] : nullptr;
    for (Index pos = 0; pos < in.rows(); ++pos) {
      for (int o = 0; o < layer.out_channels(); ++o) {
        const double g = dpre_conv(pos, o);
        if (g == 0.0) continue;
        for (int dk = 0; dk < k; ++dk) {
          const Index src = pos + dk - half;
          if (src < 0 || src >= in.rows()) continue;
          for (int c = 0; c < in_ch; ++c) {
            din(src, c) += g * layer.weights(o, c * k + dk);
            if (layer_grads) layer_grads->weights(o, c * k + dk) += g * in(src, c);
          }
        }
      }
    }
    if (layer_grads) layer_grads->bias += dpre_conv.colwise().sum().transpose();
    dcurrent = std::move(din);
  }

  Vector dlatent(static_cast<Index>(params.slots) * params.in_channels);
  for (int i = 0; i < params.slots; ++i)
    dlatent.segment(static_cast<Index>(i) * params.in_channels, params.in_channels) =
        dcurrent.row(i).transpose();
  return dlatent;
}

double spectral_angle(const Vector& a, const Vector& b) {
  const double na = a.norm(), nb = b.norm();
  if (na < 1e-300 || nb < 1e-300) {
    warn("spectral_angle: zero-norm spectrum, angle taken as 0");
    return 0.0;
  }
  const double cosine = std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
  return std::acos(cosine) / std::numbers::pi;
}

ReconLoss recon_loss(const Matrix& reconstructed, const Matrix& target,
                     const MaskPlan& plan, int patch_len, double zeta,
                     LossReduction reduction, Matrix* dreconstructed) {
  if (reconstructed.rows() != target.rows() || reconstructed.cols() != target.cols())
    throw DataError("recon_loss: shape mismatch");

  const auto masked = masked_band_indices(plan, patch_len);
  if (dreconstructed) *dreconstructed = Matrix::Zero(reconstructed.rows(), reconstructed.cols());
  ReconLoss loss;
  if (masked.empty()) {
    warn("recon_loss: no masked bands (alpha = 0), loss is 0");
    return loss;
  }

  const Index pixels = reconstructed.rows();
  const Index mcount = static_cast<Index>(masked.size());
  const double pixel_weight =
      reduction == LossReduction::Mean ? 1.0 / static_cast<double>(pixels) : 1.0;
  int zero_norm_pixels = 0;

  Vector rec(mcount), tgt(mcount);
  for (Index p = 0; p < pixels; ++p) {
    for (Index i = 0; i < mcount; ++i) {
      rec[i] = reconstructed(p, masked[static_cast<std::size_t>(i)]);
      tgt[i] = target(p, masked[static_cast<std::size_t>(i)]);
    }
    const Vector diff = rec - tgt;
    const double mse = diff.squaredNorm() / static_cast<double>(mcount);

    const double nr = rec.norm(), nt = tgt.norm();
    double sa = 0.0;
    bool sa_grad_ok = false;
    double cosine = 0.0;
    if (nr < 1e-300 || nt < 1e-300) {
      ++zero_norm_pixels;
    } else {
      cosine = std::clamp(rec.dot(tgt) / (nr * nt), -1.0, 1.0);
      sa = std::acos(cosine) / std::numbers::pi;
      sa_grad_ok = std::abs(cosine) < 1.0 - 1e-12;
    }

    loss.mse_part += pixel_weight * mse;
    loss.sa_part += pixel_weight * zeta * sa;

    if (dreconstructed) {
      Vector drec = (2.0 * pixel_weight / static_cast<double>(mcount)) * diff;
      if (sa_grad_ok) {
        // d/drec of arccos(cos)/pi with cos = <rec,tgt>/(|rec||tgt|)
        const double denom = std::sqrt(1.0 - cosine * cosine);
        const Vector dcos = tgt / (nr * nt) - (cosine / (nr * nr)) * rec;
        drec += (-pixel_weight * zeta / (std::numbers::pi * denom)) * dcos;
      }
      for (Index i = 0; i < mcount; ++i)
        (*dreconstructed)(p, masked[static_cast<std::size_t>(i)]) = drec[i];
    }
  }
  if (zero_norm_pixels > 0)
    warn("recon_loss: " + std::to_string(zero_norm_pixels) +
         " pixel(s) with zero-norm masked spectrum, SA taken as 0");

  loss.total = loss.mse_part + loss.sa_part;
  if (!std::isfinite(loss.total)) throw NumericError("recon_loss: non-finite loss");
  return loss;
}

}  // namespace hsidef
