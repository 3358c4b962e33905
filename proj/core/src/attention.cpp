#include "hsidef/attention.hpp"

#include <cmath>

#include "hsidef/rng.hpp"

namespace hsidef {

namespace {

Matrix uniform_init(Index rows, Index cols, double bound, Rng& rng) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-bound, bound);
  return m;
}

}  // namespace

SslParams init_ssl_params(int m, int d, int n, std::uint64_t seed) {
  if (m < 1 || d < 1 || n < 1) throw ConfigError("init_ssl_params: sizes must be >= 1");
  Rng rng(derive_seed(seed, /*tag=*/0x73736cULL));
  SslParams p;
  p.w_e = uniform_init(m, d, 1.0 / std::sqrt(m), rng);
  p.w_q = uniform_init(d, d, 1.0 / std::sqrt(d), rng);
  p.w_k = uniform_init(d, d, 1.0 / std::sqrt(d), rng);
  p.w_v = uniform_init(d, d, 1.0 / std::sqrt(d), rng);
  p.w_t = uniform_init(d, n, 1.0 / std::sqrt(d), rng);
  return p;
}

PositionalTable make_positional_table(int l_max, int d) {
  PositionalTable pt;
  pt.table.resize(l_max, d);
  for (int i = 0; i < l_max; ++i) {
    for (int j = 0; 2 * j < d; ++j) {
      const double angle = i / std::pow(10000.0, (2.0 * j) / d);
      pt.table(i, 2 * j) = std::sin(angle);
      if (2 * j + 1 < d) pt.table(i, 2 * j + 1) = std::cos(angle);
    }
  }
  return pt;
}

Matrix embed(const Matrix& unmasked, const SslParams& params) {
  if (unmasked.cols() != params.w_e.rows())
    throw DataError("embed: patch length " + std::to_string(unmasked.cols()) +
                    " does not match embedding rows " + std::to_string(params.w_e.rows()));
  return unmasked * params.w_e;
}

Matrix positional_encode(const Matrix& embedded, const std::vector<int>& kept_indices,
                         const PositionalTable& table) {
  if (static_cast<Index>(kept_indices.size()) != embedded.rows())
    throw DataError("positional_encode: index count mismatch");
  Matrix out = embedded;
  for (Index i = 0; i < out.rows(); ++i) {
    const int orig = kept_indices[static_cast<std::size_t>(i)];
    if (orig < 0 || orig >= table.l_max())
      throw DataError("positional_encode: patch index " + std::to_string(orig) +
                      " outside table range");
    out.row(i) += table.table.row(orig);
  }
  return out;
}

namespace {

// Row-wise softmax with max subtraction; throws naming the first bad row.
Matrix stable_softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    if (!std::isfinite(mx))
      throw NumericError("self_attention: non-finite logits in row " + std::to_string(i));
    const auto ex = (logits.row(i).array() - mx).exp();
    const double sum = ex.sum();
    out.row(i) = (ex / sum).matrix();
  }
  return out;
}

}  // namespace

Matrix self_attention(const Matrix& encoded, const SslParams& params) {
  if (encoded.rows() < 1) throw DataError("self_attention: need at least one row");
  const double scale = 1.0 / std::sqrt(static_cast<double>(params.d()));
  const Matrix q = encoded * params.w_q;
  const Matrix k = encoded * params.w_k;
  const Matrix v = encoded * params.w_v;
  const Matrix weights = stable_softmax_rows(q * k.transpose() * scale);
  Matrix out = weights * v;
  if (!out.allFinite())
    throw NumericError("self_attention: non-finite attention output");
  return out;
}

Matrix project_out(const Matrix& attended, const SslParams& params) {
  if (attended.cols() != params.w_t.rows())
    throw DataError("project_out: width mismatch");
  return attended * params.w_t;
}

void SslGrads::setZero(const SslParams& p) {
  w_e = Matrix::Zero(p.w_e.rows(), p.w_e.cols());
  w_q = Matrix::Zero(p.w_q.rows(), p.w_q.cols());
  w_k = Matrix::Zero(p.w_k.rows(), p.w_k.cols());
  w_v = Matrix::Zero(p.w_v.rows(), p.w_v.cols());
  w_t = Matrix::Zero(p.w_t.rows(), p.w_t.cols());
}

void SslGrads::accumulate(const SslGrads& other) {
  w_e += other.w_e;
  w_q += other.w_q;
  w_k += other.w_k;
  w_v += other.w_v;
  w_t += other.w_t;
}

Matrix ssl_forward(const Matrix& unmasked, const std::vector<int>& kept_indices,
                   const SslParams& params, const PositionalTable& table,
                   SslCache* cache) {
  const Matrix encoded = positional_encode(embed(unmasked, params), kept_indices, table);
  const double scale = 1.0 / std::sqrt(static_cast<double>(params.d()));
  const Matrix q = encoded * params.w_q;
  const Matrix k = encoded * params.w_k;
  const Matrix v = encoded * params.w_v;
  const Matrix weights = stable_softmax_rows(q * k.transpose() * scale);
  const Matrix attended = weights * v;
  Matrix out = attended * params.w_t;
  if (!out.allFinite()) throw NumericError("ssl_forward: non-finite output");
  if (cache) {
    cache->patches = unmasked;
    cache->encoded = encoded;
    cache->q = q;
    cache->k = k;
    cache->v = v;
    cache->weights = weights;
    cache->attended = attended;
  }
  return out;
}

void ssl_backward(const Matrix& doutput, const SslParams& params, const SslCache& cache,
                  SslGrads* grads, Matrix* dpatches) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(params.d()));

  const Matrix dattended = doutput * params.w_t.transpose();
  const Matrix dweights = dattended * cache.v.transpose();
  Matrix dv = cache.weights.transpose() * dattended;

  // softmax rows: dlogits = (dw - <dw, w>) .* w
  Matrix dlogits(dweights.rows(), dweights.cols());
  for (Index i = 0; i < dweights.rows(); ++i) {
    const double dot = dweights.row(i).dot(cache.weights.row(i));
    dlogits.row(i) =
        (dweights.row(i).array() - dot) * cache.weights.row(i).array();
  }

  const Matrix dq = dlogits * cache.k * scale;
  const Matrix dk = dlogits.transpose() * cache.q * scale;

  const Matrix dencoded = dq * params.w_q.transpose() + dk * params.w_k.transpose() +
                          dv * params.w_v.transpose();

  if (grads) {
    grads->w_t += cache.attended.transpose() * doutput;
    grads->w_q += cache.encoded.transpose() * dq;
    grads->w_k += cache.encoded.transpose() * dk;
    grads->w_v += cache.encoded.transpose() * dv;
    grads->w_e += cache.patches.transpose() * dencoded;
  }
  if (dpatches) *dpatches = dencoded * params.w_e.transpose();
}

Matrix ssl_jvp(const Matrix& dpatches, const SslParams& params, const SslCache& cache) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(params.d()));
  const Matrix dencoded = dpatches * params.w_e;  // positions are constant
  const Matrix dq = dencoded * params.w_q;
  const Matrix dk = dencoded * params.w_k;
  const Matrix dv = dencoded * params.w_v;
  const Matrix dlogits = (dq * cache.k.transpose() + cache.q * dk.transpose()) * scale;

  Matrix dweights(dlogits.rows(), dlogits.cols());
  for (Index i = 0; i < dlogits.rows(); ++i) {
    const double dot = dlogits.row(i).dot(cache.weights.row(i));
    dweights.row(i) =
        (dlogits.row(i).array() - dot) * cache.weights.row(i).array();
  }
  const Matrix dattended = dweights * cache.v + cache.weights * dv;
  return dattended * params.w_t;
}

}  // namespace hsidef
