#include "hsidef/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <Eigen/Cholesky>

#include "hsidef/rng.hpp"

namespace hsidef {

GcnParams init_gcn_params(int t, double beta, std::uint64_t seed) {
  if (t < 1) throw ConfigError("init_gcn_params: width must be >= 1");
  if (beta < 0.0 || beta > 1.0) throw ConfigError("init_gcn_params: beta must be in [0,1]");
  Rng rng(derive_seed(seed, /*tag=*/0x67636eULL));
  GcnParams p;
  p.beta = beta;
  const double bound = 1.0 / std::sqrt(static_cast<double>(t));
  p.w_g.resize(t, t);
  for (Index i = 0; i < t; ++i)
    for (Index j = 0; j < t; ++j) p.w_g(i, j) = rng.uniform(-bound, bound);
  p.b = Vector::Zero(t);
  return p;
}

Vector fill_blanks(const Matrix& attention, const MaskPlan& plan, const Matrix& blank_table) {
  const int n = static_cast<int>(blank_table.cols());
  if (attention.rows() != plan.r())
    throw DataError("fill_blanks: attention rows do not match plan");
  if (attention.rows() > 0 && attention.cols() != n)
    throw DataError("fill_blanks: attention width does not match blank table");
  if (blank_table.rows() != plan.l)
    throw DataError("fill_blanks: blank table has wrong slot count");

  Vector z(static_cast<Index>(plan.l) * n);
  int kept_pos = 0;
  for (int slot = 0; slot < plan.l; ++slot) {
    const bool is_kept = kept_pos < plan.r() &&
                         plan.kept[static_cast<std::size_t>(kept_pos)] == slot;
    if (is_kept) {
      z.segment(static_cast<Index>(slot) * n, n) = attention.row(kept_pos).transpose();
      ++kept_pos;
    } else {
      z.segment(static_cast<Index>(slot) * n, n) = blank_table.row(slot).transpose();
    }
  }
  return z;
}

SuperpixelStats superpixel_stats(const Matrix& z, const SuperpixelMap& map, double lambda_reg) {
  if (z.rows() != map.pixels())
    throw DataError("superpixel_stats: feature rows do not cover the map");
  const int big_h = map.count;
  const Index t = z.cols();

  SuperpixelStats stats;
  stats.mu = Matrix::Zero(big_h, t);
  stats.gamma.resize(static_cast<std::size_t>(big_h));

  std::vector<int> counts(static_cast<std::size_t>(big_h), 0);
  for (int p = 0; p < map.pixels(); ++p) {
    const int j = map.label_at(p) - 1;
    stats.mu.row(j) += z.row(p);
    counts[static_cast<std::size_t>(j)]++;
  }
  for (int j = 0; j < big_h; ++j) stats.mu.row(j) /= std::max(1, counts[static_cast<std::size_t>(j)]);

  std::vector<Matrix> scatter(static_cast<std::size_t>(big_h), Matrix::Zero(t, t));
  for (int p = 0; p < map.pixels(); ++p) {
    const int j = map.label_at(p) - 1;
    const Vector diff = (z.row(p) - stats.mu.row(j)).transpose();
    scatter[static_cast<std::size_t>(j)].noalias() += diff * diff.transpose();
  }

  for (int j = 0; j < big_h; ++j) {
    Matrix cov;
    if (counts[static_cast<std::size_t>(j)] > 1) {
      cov = scatter[static_cast<std::size_t>(j)] / (counts[static_cast<std::size_t>(j)] - 1);
    } else {
      cov = Matrix::Zero(t, t);  // singleton: regularization supplies the mass
    }
    double lambda = lambda_reg;
    if (lambda <= 0.0) {
      // Scaled ridge with an absolute floor for degenerate superpixels.
      lambda = std::max(1e-3 * cov.trace() / static_cast<double>(t), 1e-12);
    }
    cov.diagonal().array() += lambda;
    stats.gamma[static_cast<std::size_t>(j)] = std::move(cov);
  }
  stats.lambda_reg = lambda_reg;
  return stats;
}

AssocMatrix association_matrix(const Matrix& z, const SuperpixelStats& stats,
                               const SuperpixelMap& map, AssocWeighting weighting) {
  if (z.rows() != map.pixels())
    throw DataError("association_matrix: feature rows do not cover the map");
  const int big_h = map.count;

  AssocMatrix assoc;
  assoc.owner.resize(static_cast<std::size_t>(map.pixels()));
  assoc.distance.resize(static_cast<std::size_t>(map.pixels()));
  assoc.weight.assign(static_cast<std::size_t>(map.pixels()), 0.0);
  assoc.members.resize(static_cast<std::size_t>(big_h));

  std::vector<Eigen::LLT<Matrix>> factor;
  factor.reserve(static_cast<std::size_t>(big_h));
  for (int j = 0; j < big_h; ++j) {
    factor.emplace_back(stats.gamma[static_cast<std::size_t>(j)]);
    if (factor.back().info() != Eigen::Success)
      throw NumericError("association_matrix: covariance of superpixel " +
                         std::to_string(j + 1) +
                         " is not positive definite (check lambda_reg)");
  }

  for (int p = 0; p < map.pixels(); ++p) {
    const int j = map.label_at(p) - 1;
    assoc.owner[static_cast<std::size_t>(p)] = j;
    assoc.members[static_cast<std::size_t>(j)].push_back(p);
    const Vector diff = (z.row(p) - stats.mu.row(j)).transpose();
    const Vector solved = factor[static_cast<std::size_t>(j)].solve(diff);
    const double quad = diff.dot(solved);
    assoc.distance[static_cast<std::size_t>(p)] = std::sqrt(std::max(0.0, quad));
  }

  // Column normalization with the uniform floor for all-at-centroid columns.
  for (int j = 0; j < big_h; ++j) {
    const auto& members = assoc.members[static_cast<std::size_t>(j)];
    double sum = 0.0;
    for (const int p : members) {
      double raw = assoc.distance[static_cast<std::size_t>(p)];
      if (weighting == AssocWeighting::Inverse) raw = 1.0 / (raw + 1e-6);
      assoc.weight[static_cast<std::size_t>(p)] = raw;
      sum += raw;
    }
    if (sum < 1e-12) {
      const double uniform = 1.0 / static_cast<double>(members.size());
      for (const int p : members) assoc.weight[static_cast<std::size_t>(p)] = uniform;
    } else {
      for (const int p : members) assoc.weight[static_cast<std::size_t>(p)] /= sum;
    }
  }
  return assoc;
}

Matrix local_repr(const AssocMatrix& assoc, const Matrix& z) {
  if (static_cast<Index>(assoc.owner.size()) != z.rows())
    throw DataError("local_repr: association does not cover the features");
  Matrix nodes = Matrix::Zero(assoc.superpixels(), z.cols());
  for (Index p = 0; p < z.rows(); ++p) {
    nodes.row(assoc.owner[static_cast<std::size_t>(p)]) +=
        assoc.weight[static_cast<std::size_t>(p)] * z.row(p);
  }
  return nodes;
}

Graph build_graph(const Matrix& nodes, double sigma) {
  const Index big_h = nodes.rows();
  if (big_h < 1) throw DataError("build_graph: need at least one node");

  if (sigma <= 0.0) {
    // Median pairwise squared distance; falls back to 1 when all nodes
    // coincide (any sigma then yields similarity 1).
    std::vector<double> d2;
    for (Index i = 0; i < big_h; ++i)
      for (Index j = i + 1; j < big_h; ++j)
        d2.push_back((nodes.row(i) - nodes.row(j)).squaredNorm());
    if (d2.empty()) {
      sigma = 1.0;
    } else {
      std::nth_element(d2.begin(), d2.begin() + d2.size() / 2, d2.end());
      const double median = d2[d2.size() / 2];
      sigma = median > 0.0 ? std::sqrt(median) : 1.0;
    }
  }

  Matrix sim(big_h, big_h);
  for (Index i = 0; i < big_h; ++i) {
    sim(i, i) = 1.0;
    for (Index j = i + 1; j < big_h; ++j) {
      const double s =
          std::exp(-(nodes.row(i) - nodes.row(j)).squaredNorm() / (sigma * sigma));
      sim(i, j) = s;
      sim(j, i) = s;
    }
  }
  const double epsilon = sim.sum() / static_cast<double>(big_h * big_h);

  Graph g;
  g.nodes = nodes;
  g.sigma = sigma;
  g.epsilon = epsilon;
  g.edges = (sim.array() >= epsilon).cast<int>();
  return g;
}

Matrix normalized_adjacency(const IntMatrix& edges) {
  const Index big_h = edges.rows();
  Matrix e_tilde = edges.cast<double>();
  e_tilde.diagonal().array() += 1.0;  // renormalization self-loop
  Vector inv_sqrt_deg(big_h);
  for (Index i = 0; i < big_h; ++i)
    inv_sqrt_deg[i] = 1.0 / std::sqrt(e_tilde.row(i).sum());
  return inv_sqrt_deg.asDiagonal() * e_tilde * inv_sqrt_deg.asDiagonal();
}

Matrix gcn_forward(const Graph& graph, const GcnParams& params, Activation act,
                   Matrix* preact_out) {
  const Matrix s_norm = normalized_adjacency(graph.edges);
  Matrix pre = s_norm * graph.nodes * params.w_g;
  pre.rowwise() += params.b.transpose();
  Matrix out = pre.unaryExpr([act](double x) { return apply_activation(act, x); });
  if (preact_out) *preact_out = std::move(pre);
  return out;
}

Matrix gcn_backward(const Graph& graph, const GcnParams& params, Activation act,
                    const Matrix& preact, const Matrix& dout, Matrix* dw_g, Vector* db) {
  const Matrix s_norm = normalized_adjacency(graph.edges);
  const Matrix dpre = dout.cwiseProduct(
      preact.unaryExpr([act](double x) { return activation_grad(act, x); }));
  if (dw_g) dw_g->noalias() += (s_norm * graph.nodes).transpose() * dpre;
  if (db) *db += dpre.colwise().sum().transpose();
  return s_norm.transpose() * (dpre * params.w_g.transpose());
}

Matrix propagate(const AssocMatrix& assoc, const Matrix& node_repr) {
  if (assoc.superpixels() != node_repr.rows())
    throw DataError("propagate: node count mismatch");
  Matrix z_hat(static_cast<Index>(assoc.owner.size()), node_repr.cols());
  for (Index p = 0; p < z_hat.rows(); ++p) {
    z_hat.row(p) = assoc.weight[static_cast<std::size_t>(p)] *
                   node_repr.row(assoc.owner[static_cast<std::size_t>(p)]);
  }
  return z_hat;
}

Matrix learn_adjacency(const Matrix& node_repr) {
  if (!node_repr.allFinite()) throw NumericError("learn_adjacency: non-finite nodes");
  const Matrix inner = node_repr * node_repr.transpose();
  return inner.unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
}

Matrix update_adjacency(const IntMatrix& prev, const Matrix& learned, double beta) {
  if (beta < 0.0 || beta > 1.0) throw ConfigError("update_adjacency: beta must be in [0,1]");
  if (prev.rows() != learned.rows() || prev.cols() != learned.cols())
    throw DataError("update_adjacency: shape mismatch");
  return beta * learned + (1.0 - beta) * prev.cast<double>();
}

IntMatrix threshold_adjacency(const Matrix& weighted, const IntMatrix& prev,
                              double* chosen_gamma) {
  if (weighted.rows() != prev.rows() || weighted.cols() != prev.cols())
    throw DataError("threshold_adjacency: shape mismatch");
  if (weighted.minCoeff() < 0.0 || weighted.maxCoeff() > 1.0)
    throw DataError("threshold_adjacency: weighted entries must lie in [0,1]");

  const long prev_ones = prev.cast<long>().sum();

  std::set<double, std::greater<double>> candidates;  // larger gamma first
  for (Index i = 0; i < weighted.rows(); ++i)
    for (Index j = 0; j < weighted.cols(); ++j) candidates.insert(weighted(i, j));

  double best_gamma = 1.0;
  long best_objective = -1;
  for (const double gamma : candidates) {
    const long ones = (weighted.array() >= gamma).count();
    const long objective = std::labs(ones - prev_ones);
    // Strict improvement only: iterating from the largest gamma down makes
    // ties resolve toward the sparser graph.
    if (best_objective < 0 || objective < best_objective) {
      best_objective = objective;
      best_gamma = gamma;
    }
  }

  IntMatrix next = (weighted.array() >= best_gamma).cast<int>();
  next = next.cwiseMax(next.transpose().eval());  // symmetrize by logical OR
  if (chosen_gamma) *chosen_gamma = best_gamma;
  return next;
}

void write_edge_list(const IntMatrix& edges, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write edge list: " + path.string());
  for (Index i = 0; i < edges.rows(); ++i)
    for (Index j = 0; j < edges.cols(); ++j)
      if (edges(i, j) != 0) out << i << " " << j << "\n";
}

}  // namespace hsidef
