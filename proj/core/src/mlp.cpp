#include "hsidef/mlp.hpp"

#include <cmath>

#include "hsidef/rng.hpp"

namespace hsidef {

MlpParams init_mlp(int in_width, const std::vector<int>& hidden, int classes,
                   std::uint64_t seed) {
  if (hidden.size() != 3) throw ConfigError("init_mlp: expected 3 hidden widths");
  if (in_width < 1 || classes < 2) throw ConfigError("init_mlp: bad dimensions");
  Rng rng(derive_seed(seed, /*tag=*/0x6d6c70ULL));
  std::vector<int> widths{in_width, hidden[0], hidden[1], hidden[2], classes};
  MlpParams p;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const int in = widths[i], out = widths[i + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    Matrix w(in, out);
    for (Index a = 0; a < in; ++a)
      for (Index c = 0; c < out; ++c) w(a, c) = rng.uniform(-bound, bound);
    p.w.push_back(std::move(w));
    p.b.push_back(Vector::Zero(out));
  }
  return p;
}

Matrix mlp_forward(const Matrix& feats, const MlpParams& params, MlpCache* cache) {
  if (feats.cols() != params.w.front().rows())
    throw DataError("mlp_forward: feature width mismatch");
  if (cache) {
    cache->acts.clear();
    cache->preacts.clear();
  }
  Matrix current = feats;
  for (std::size_t i = 0; i < params.w.size(); ++i) {
    if (cache) cache->acts.push_back(current);
    Matrix pre = current * params.w[i];
    pre.rowwise() += params.b[i].transpose();
    if (cache) cache->preacts.push_back(pre);
    if (i + 1 < params.w.size())
      current = pre.cwiseMax(0.0);
    else
      current = std::move(pre);
  }
  return current;
}

void MlpGrads::setZero(const MlpParams& p) {
  w.clear();
  b.clear();
  for (std::size_t i = 0; i < p.w.size(); ++i) {
    w.push_back(Matrix::Zero(p.w[i].rows(), p.w[i].cols()));
    b.push_back(Vector::Zero(p.b[i].size()));
  }
}

void mlp_backward(const Matrix& dscores, const MlpParams& params, const MlpCache& cache,
                  MlpGrads* grads, Matrix* dfeats) {
  Matrix dcurrent = dscores;
  for (int i = static_cast<int>(params.w.size()) - 1; i >= 0; --i) {
    const auto ui = static_cast<std::size_t>(i);
    if (ui + 1 < params.w.size()) {
      // Rectifier between layers.
      dcurrent = dcurrent.cwiseProduct(
          cache.preacts[ui].unaryExpr([](double x) { return x > 0.0 ? 1.0 : 0.0; }));
    }
    if (grads) {
      grads->w[ui].noalias() += cache.acts[ui].transpose() * dcurrent;
      grads->b[ui] += dcurrent.colwise().sum().transpose();
    }
    dcurrent = dcurrent * params.w[ui].transpose();
  }
  if (dfeats) *dfeats = std::move(dcurrent);
}

Matrix mlp_input_jacobian(const Vector& features, const MlpParams& params) {
  // Forward to collect rectifier gates.
  std::vector<Vector> gates;
  Vector current = features;
  for (std::size_t i = 0; i + 1 < params.w.size(); ++i) {
    Vector pre = params.w[i].transpose() * current + params.b[i];
    gates.push_back(pre.unaryExpr([](double x) { return x > 0.0 ? 1.0 : 0.0; }));
    current = pre.cwiseMax(0.0);
  }
  // J = W4^T diag(g3) W3^T diag(g2) W2^T diag(g1) W1^T, K x in.
  Matrix j = params.w.back().transpose();
  for (int i = static_cast<int>(params.w.size()) - 2; i >= 0; --i) {
    const auto ui = static_cast<std::size_t>(i);
    j = j * gates[ui].asDiagonal() * params.w[ui].transpose();
  }
  return j;
}

double cross_entropy(const Matrix& scores, const std::vector<int>& labels,
                     Matrix* dscores) {
  if (static_cast<Index>(labels.size()) != scores.rows())
    throw DataError("cross_entropy: label count mismatch");
  if (dscores) *dscores = Matrix::Zero(scores.rows(), scores.cols());
  double loss = 0.0;
  for (Index i = 0; i < scores.rows(); ++i) {
    const int label = labels[static_cast<std::size_t>(i)];
    if (label <= 0) continue;
    if (label > scores.cols())
      throw DataError("cross_entropy: label " + std::to_string(label) + " out of range");
    const double mx = scores.row(i).maxCoeff();
    const auto ex = (scores.row(i).array() - mx).exp();
    const double sum = ex.sum();
    loss += std::log(sum) - (scores(i, label - 1) - mx);
    if (dscores) {
      dscores->row(i) = (ex / sum).matrix();
      (*dscores)(i, label - 1) -= 1.0;
    }
  }
  return loss;
}

std::vector<int> predict_labels(const Matrix& scores) {
  std::vector<int> out(static_cast<std::size_t>(scores.rows()));
  for (Index i = 0; i < scores.rows(); ++i) {
    Index best = 0;
    scores.row(i).maxCoeff(&best);
    out[static_cast<std::size_t>(i)] = static_cast<int>(best) + 1;
  }
  return out;
}

}  // namespace hsidef
