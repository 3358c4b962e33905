#include <doctest.h>

#include <cmath>
#include <set>

#include "hsidef/graph.hpp"
#include "hsidef/rng.hpp"

using namespace hsidef;

namespace {

SuperpixelMap two_pixel_map(int superpixels, std::vector<int> assignment, int w) {
  SuperpixelMap map;
  map.height = 1;
  map.width = w;
  map.count = superpixels;
  map.assignment = std::move(assignment);
  map.sizes.assign(static_cast<std::size_t>(superpixels), 0);
  for (const int a : map.assignment) map.sizes[static_cast<std::size_t>(a - 1)]++;
  return map;
}

// Brute-force oracle for the threshold search: sweep every candidate and
// track the best |ones - prev_ones|, ties to the larger gamma.
struct ThresholdOracle {
  double gamma;
  long objective;
};

ThresholdOracle threshold_oracle(const Matrix& weighted, const IntMatrix& prev) {
  const long prev_ones = prev.cast<long>().sum();
  std::set<double> values;
  for (Index i = 0; i < weighted.rows(); ++i)
    for (Index j = 0; j < weighted.cols(); ++j) values.insert(weighted(i, j));
  ThresholdOracle best{1.0, -1};
  for (const double gamma : values) {
    const long ones = (weighted.array() >= gamma).count();
    const long objective = std::labs(ones - prev_ones);
    if (best.objective < 0 || objective < best.objective ||
        (objective == best.objective && gamma > best.gamma)) {
      best = {gamma, objective};
    }
  }
  return best;
}

}  // namespace

TEST_CASE("fill_blanks interleaves attention rows and blank vectors") {
  MaskPlan plan;
  plan.l = 3;
  plan.kept = {0, 2};
  plan.masked = {1};
  Matrix attention(2, 2);
  attention << 1, 2, 5, 6;
  Matrix blanks(3, 2);
  blanks << -1, -1, -2, -2, -3, -3;
  const Vector z = fill_blanks(attention, plan, blanks);
  Vector expected(6);
  expected << 1, 2, -2, -2, 5, 6;
  CHECK((z - expected).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("fill_blanks with alpha=0 is a reshape of the attention output") {
  MaskPlan plan;
  plan.l = 2;
  plan.kept = {0, 1};
  Matrix attention(2, 3);
  attention << 1, 2, 3, 4, 5, 6;
  const Vector z = fill_blanks(attention, plan, Matrix::Zero(2, 3));
  Vector expected(6);
  expected << 1, 2, 3, 4, 5, 6;
  CHECK((z - expected).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("fill_blanks zero table fills masked slots with zeros") {
  MaskPlan plan;
  plan.l = 2;
  plan.kept = {1};
  plan.masked = {0};
  Matrix attention(1, 2);
  attention << 7, 8;
  const Vector z = fill_blanks(attention, plan, Matrix::Zero(2, 2));
  CHECK(z[0] == 0.0);
  CHECK(z[1] == 0.0);
  CHECK(z[2] == 7.0);
  CHECK(z[3] == 8.0);
}

TEST_CASE("fill_blanks rejects inconsistent plans") {
  MaskPlan plan;
  plan.l = 2;
  plan.kept = {0, 1};
  CHECK_THROWS_AS(fill_blanks(Matrix::Zero(1, 2), plan, Matrix::Zero(2, 2)), DataError);
}

TEST_CASE("superpixel stats: hand-computed mean and covariance") {
  // Members (0,0) and (2,0): mu = (1,0), unbiased scatter entry = 2.
  Matrix z(2, 2);
  z << 0, 0, 2, 0;
  const auto map = two_pixel_map(1, {1, 1}, 2);
  const double lambda = 0.01;
  const SuperpixelStats stats = superpixel_stats(z, map, lambda);
  CHECK(stats.mu(0, 0) == doctest::Approx(1.0));
  CHECK(stats.mu(0, 1) == doctest::Approx(0.0));
  CHECK(stats.gamma[0](0, 0) == doctest::Approx(2.0 + lambda));
  CHECK(stats.gamma[0](1, 1) == doctest::Approx(lambda));
  CHECK(stats.gamma[0](0, 1) == doctest::Approx(0.0));
}

TEST_CASE("superpixel stats: identical members leave only the ridge") {
  Matrix z(2, 2);
  z << 3, 4, 3, 4;
  const auto map = two_pixel_map(1, {1, 1}, 2);
  const SuperpixelStats stats = superpixel_stats(z, map, 0.5);
  CHECK((stats.gamma[0] - 0.5 * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() ==
        doctest::Approx(0.0));
}

TEST_CASE("superpixel stats: singleton gets mu = row and lambda ridge") {
  Matrix z(2, 2);
  z << 1, 2, 9, 9;
  const auto map = two_pixel_map(2, {1, 2}, 2);
  const SuperpixelStats stats = superpixel_stats(z, map, 0.25);
  CHECK(stats.mu(0, 0) == doctest::Approx(1.0));
  CHECK((stats.gamma[1] - 0.25 * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() ==
        doctest::Approx(0.0));
}

TEST_CASE("association: identity covariance reduces to euclidean distance") {
  Matrix z(2, 2);
  z << 0, 0, 2, 0;
  const auto map = two_pixel_map(1, {1, 1}, 2);
  SuperpixelStats stats;
  stats.mu = Matrix::Zero(1, 2);
  stats.mu << 1, 0;
  stats.gamma = {Matrix::Identity(2, 2)};
  const AssocMatrix assoc = association_matrix(z, stats, map);
  CHECK(assoc.distance[0] == doctest::Approx(1.0));
  CHECK(assoc.distance[1] == doctest::Approx(1.0));
  CHECK(assoc.weight[0] == doctest::Approx(0.5));
}

TEST_CASE("association: scalar hand computation gives distance 2") {
  Matrix z(1, 1);
  z << 3;
  const auto map = two_pixel_map(1, {1}, 1);
  SuperpixelStats stats;
  stats.mu = Matrix::Constant(1, 1, 1.0);
  stats.gamma = {Matrix::Identity(1, 1)};
  const AssocMatrix assoc = association_matrix(z, stats, map);
  CHECK(assoc.distance[0] == doctest::Approx(2.0));
}

TEST_CASE("association: all-equal members floor to uniform weights") {
  Matrix z(3, 2);
  z << 1, 1, 1, 1, 1, 1;
  const auto map = two_pixel_map(1, {1, 1, 1}, 3);
  const SuperpixelStats stats = superpixel_stats(z, map, 1e-3);
  const AssocMatrix assoc = association_matrix(z, stats, map);
  for (int p = 0; p < 3; ++p) CHECK(assoc.weight[static_cast<std::size_t>(p)] ==
                                    doctest::Approx(1.0 / 3.0));
}

TEST_CASE("association columns sum to one") {
  Rng rng(4);
  Matrix z(20, 3);
  for (Index i = 0; i < z.rows(); ++i)
    for (Index j = 0; j < z.cols(); ++j) z(i, j) = rng.uniform(-1.0, 1.0);
  std::vector<int> assignment(20);
  for (int p = 0; p < 20; ++p) assignment[static_cast<std::size_t>(p)] = p % 3 + 1;
  const auto map = two_pixel_map(3, assignment, 20);
  const SuperpixelStats stats = superpixel_stats(z, map, -1.0);
  const AssocMatrix assoc = association_matrix(z, stats, map);
  std::vector<double> col_sum(3, 0.0);
  for (int p = 0; p < 20; ++p)
    col_sum[static_cast<std::size_t>(assoc.owner[static_cast<std::size_t>(p)])] +=
        assoc.weight[static_cast<std::size_t>(p)];
  for (const double s : col_sum) CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("local_repr: weighted-sum hand computation") {
  // Two pixels with weights (0.25, 0.75) and rows (0) and (4): L = 3.
  AssocMatrix assoc;
  assoc.owner = {0, 0};
  assoc.distance = {1, 3};
  assoc.weight = {0.25, 0.75};
  assoc.members = {{0, 1}};
  Matrix z(2, 1);
  z << 0, 4;
  const Matrix nodes = local_repr(assoc, z);
  CHECK(nodes(0, 0) == doctest::Approx(3.0));
}

TEST_CASE("local_repr of zero features is zero") {
  AssocMatrix assoc;
  assoc.owner = {0, 0};
  assoc.distance = {1, 1};
  assoc.weight = {0.5, 0.5};
  assoc.members = {{0, 1}};
  CHECK(local_repr(assoc, Matrix::Zero(2, 3)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("local_repr uniform column equals the member mean") {
  AssocMatrix assoc;
  assoc.owner = {0, 0, 0};
  assoc.distance = {0, 0, 0};
  assoc.weight = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  assoc.members = {{0, 1, 2}};
  Matrix z(3, 2);
  z << 1, 2, 3, 4, 5, 6;
  const Matrix nodes = local_repr(assoc, z);
  CHECK(nodes(0, 0) == doctest::Approx(3.0));
  CHECK(nodes(0, 1) == doctest::Approx(4.0));
}

TEST_CASE("build_graph: identical nodes give the all-ones adjacency") {
  const Matrix nodes = Matrix::Constant(3, 2, 0.7);
  const Graph g = build_graph(nodes, 1.0);
  CHECK(g.epsilon == doctest::Approx(1.0));
  CHECK(g.edges.minCoeff() == 1);
}

TEST_CASE("build_graph: single node") {
  const Graph g = build_graph(Matrix::Constant(1, 2, 0.3), 2.0);
  CHECK(g.epsilon == doctest::Approx(1.0));
  CHECK(g.edges(0, 0) == 1);
}

TEST_CASE("build_graph: two nodes with similarity 0.5 keep only self loops") {
  // |l1 - l2|^2 = sigma^2 * ln 2 makes s12 = 0.5; epsilon = 0.75.
  const double sigma = 1.0;
  Matrix nodes(2, 1);
  nodes << 0.0, std::sqrt(std::log(2.0));
  const Graph g = build_graph(nodes, sigma);
  CHECK(g.epsilon == doctest::Approx(0.75));
  CHECK(g.edges(0, 0) == 1);
  CHECK(g.edges(1, 1) == 1);
  CHECK(g.edges(0, 1) == 0);
  CHECK(g.edges(1, 0) == 0);
}

TEST_CASE("build_graph rejects non-positive sigma with non-coincident nodes") {
  Matrix nodes(2, 1);
  nodes << 0.0, 1.0;
  // sigma <= 0 selects the median heuristic instead of failing.
  const Graph g = build_graph(nodes, -1.0);
  CHECK(g.sigma > 0.0);
}

TEST_CASE("gcn_forward: single node with identity weights is the identity") {
  Graph g;
  g.nodes = Matrix::Constant(1, 3, 2.5);
  g.edges = IntMatrix::Constant(1, 1, 1);
  GcnParams p;
  p.w_g = Matrix::Identity(3, 3);
  p.b = Vector::Zero(3);
  const Matrix out = gcn_forward(g, p, Activation::Identity);
  CHECK((out - g.nodes).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("gcn_forward: zero nodes and bias give zero") {
  Graph g;
  g.nodes = Matrix::Zero(2, 3);
  g.edges = IntMatrix::Identity(2, 2);
  GcnParams p;
  p.w_g = Matrix::Random(3, 3);
  p.b = Vector::Zero(3);
  CHECK(gcn_forward(g, p, Activation::Rectifier).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gcn_forward: identity adjacency with self loops reduces to L") {
  Graph g;
  g.nodes.resize(2, 2);
  g.nodes << 1, 2, 3, 4;
  g.edges = IntMatrix::Identity(2, 2);
  GcnParams p;
  p.w_g = Matrix::Identity(2, 2);
  p.b = Vector::Zero(2);
  const Matrix out = gcn_forward(g, p, Activation::Identity);
  CHECK((out - g.nodes).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("gcn gradients match finite differences") {
  Rng rng(12);
  const int h = 4, t = 6;
  Graph g;
  g.nodes.resize(h, t);
  for (Index i = 0; i < h; ++i)
    for (Index j = 0; j < t; ++j) g.nodes(i, j) = rng.uniform(-1.0, 1.0);
  g.edges = IntMatrix::Zero(h, h);
  g.edges(0, 1) = g.edges(1, 0) = 1;
  g.edges(2, 3) = g.edges(3, 2) = 1;
  g.edges(0, 0) = 1;
  GcnParams p = init_gcn_params(t, 0.1, 3);
  Matrix probe(h, t);
  for (Index i = 0; i < h; ++i)
    for (Index j = 0; j < t; ++j) probe(i, j) = rng.uniform(-1.0, 1.0);

  const auto loss = [&](const Graph& graph, const GcnParams& params) {
    return gcn_forward(graph, params, Activation::Rectifier, nullptr)
        .cwiseProduct(probe)
        .sum();
  };

  Matrix preact;
  gcn_forward(g, p, Activation::Rectifier, &preact);
  Matrix dw = Matrix::Zero(t, t);
  Vector db = Vector::Zero(t);
  const Matrix dnodes =
      gcn_backward(g, p, Activation::Rectifier, preact, probe, &dw, &db);

  const double step = 1e-5;
  const auto rel = [](double fd, double an) {
    return std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8});
  };
  for (Index i = 0; i < t; ++i) {
    for (Index j = 0; j < t; ++j) {
      const double saved = p.w_g(i, j);
      p.w_g(i, j) = saved + step;
      const double up = loss(g, p);
      p.w_g(i, j) = saved - step;
      const double down = loss(g, p);
      p.w_g(i, j) = saved;
      CHECK(rel((up - down) / (2 * step), dw(i, j)) < 1e-4);
    }
    const double saved = p.b[i];
    p.b[i] = saved + step;
    const double up = loss(g, p);
    p.b[i] = saved - step;
    const double down = loss(g, p);
    p.b[i] = saved;
    CHECK(rel((up - down) / (2 * step), db[i]) < 1e-4);
  }
  for (Index i = 0; i < h; ++i) {
    for (Index j = 0; j < t; ++j) {
      const double saved = g.nodes(i, j);
      g.nodes(i, j) = saved + step;
      const double up = loss(g, p);
      g.nodes(i, j) = saved - step;
      const double down = loss(g, p);
      g.nodes(i, j) = saved;
      CHECK(rel((up - down) / (2 * step), dnodes(i, j)) < 1e-4);
    }
  }
}

TEST_CASE("propagate: uniform weights share the node row") {
  AssocMatrix assoc;
  assoc.owner = {0, 0};
  assoc.distance = {0, 0};
  assoc.weight = {0.5, 0.5};
  assoc.members = {{0, 1}};
  Matrix node_repr(1, 2);
  node_repr << 4, 8;
  const Matrix z_hat = propagate(assoc, node_repr);
  CHECK(z_hat(0, 0) == doctest::Approx(2.0));
  CHECK(z_hat(1, 1) == doctest::Approx(4.0));
}

TEST_CASE("propagate: weight 0.25 scales the row (1,2) from (4,8)") {
  AssocMatrix assoc;
  assoc.owner = {0};
  assoc.distance = {1};
  assoc.weight = {0.25};
  assoc.members = {{0}};
  Matrix node_repr(1, 2);
  node_repr << 4, 8;
  const Matrix z_hat = propagate(assoc, node_repr);
  CHECK(z_hat(0, 0) == doctest::Approx(1.0));
  CHECK(z_hat(0, 1) == doctest::Approx(2.0));
}

TEST_CASE("propagate zero nodes is zero") {
  AssocMatrix assoc;
  assoc.owner = {0, 0};
  assoc.distance = {1, 1};
  assoc.weight = {0.3, 0.7};
  assoc.members = {{0, 1}};
  CHECK(propagate(assoc, Matrix::Zero(1, 4)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("learn_adjacency saturation behavior") {
  CHECK((learn_adjacency(Matrix::Zero(3, 2)).array() == 0.5).all());
  Matrix nodes(2, 2);
  nodes << 30, 0, 0, 30;  // orthogonal rows, big norms
  const Matrix learned = learn_adjacency(nodes);
  CHECK(learned(0, 1) == doctest::Approx(0.5));
  CHECK(learned(0, 0) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK((learned - learned.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("update_adjacency endpoints and the paper default") {
  IntMatrix prev = IntMatrix::Constant(1, 1, 1);
  Matrix learned = Matrix::Constant(1, 1, 0.5);
  CHECK(update_adjacency(prev, learned, 0.0)(0, 0) == doctest::Approx(1.0));
  CHECK(update_adjacency(prev, learned, 1.0)(0, 0) == doctest::Approx(0.5));
  CHECK(update_adjacency(prev, learned, 0.1)(0, 0) == doctest::Approx(0.95));
}

TEST_CASE("threshold_adjacency: DERIVED 2x2 example") {
  Matrix weighted(2, 2);
  weighted << 0.9, 0.2, 0.2, 0.8;
  const IntMatrix prev = IntMatrix::Identity(2, 2);
  double gamma = 0.0;
  const IntMatrix next = threshold_adjacency(weighted, prev, &gamma);
  CHECK(gamma == doctest::Approx(0.8));
  CHECK(next(0, 0) == 1);
  CHECK(next(1, 1) == 1);
  CHECK(next(0, 1) == 0);
  CHECK(next(1, 0) == 0);
}

TEST_CASE("threshold_adjacency: exact one-count match wins with objective 0") {
  Matrix weighted(2, 2);
  weighted << 0.6, 0.3, 0.3, 0.1;
  IntMatrix prev = IntMatrix::Zero(2, 2);
  prev(0, 0) = 1;  // one 1
  double gamma = 0.0;
  const IntMatrix next = threshold_adjacency(weighted, prev, &gamma);
  CHECK(gamma == doctest::Approx(0.6));
  CHECK(next.cast<long>().sum() == 1);
}

TEST_CASE("threshold_adjacency: constant 0.5 against all ones keeps all ones") {
  const Matrix weighted = Matrix::Constant(2, 2, 0.5);
  const IntMatrix prev = IntMatrix::Constant(2, 2, 1);
  double gamma = 0.0;
  const IntMatrix next = threshold_adjacency(weighted, prev, &gamma);
  CHECK(gamma == doctest::Approx(0.5));
  CHECK(next.cast<long>().sum() == 4);
}

TEST_CASE("threshold_adjacency matches the brute-force oracle on random instances") {
  Rng rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    const int h = 2 + static_cast<int>(rng.uniform_int(11));  // up to 12
    Matrix weighted(h, h);
    for (Index i = 0; i < h; ++i) {
      for (Index j = 0; j <= i; ++j) {
        const double v = rng.uniform01();
        weighted(i, j) = v;
        weighted(j, i) = v;
      }
    }
    IntMatrix prev(h, h);
    for (Index i = 0; i < h; ++i) {
      for (Index j = 0; j <= i; ++j) {
        const int v = rng.uniform01() < 0.4 ? 1 : 0;
        prev(i, j) = v;
        prev(j, i) = v;
      }
    }
    double gamma = 0.0;
    const IntMatrix next = threshold_adjacency(weighted, prev, &gamma);
    const ThresholdOracle oracle = threshold_oracle(weighted, prev);
    CHECK(gamma == doctest::Approx(oracle.gamma));
    // Optimality: no candidate does strictly better.
    const long achieved =
        std::labs((weighted.array() >= gamma).count() - prev.cast<long>().sum());
    CHECK(achieved == oracle.objective);
    CHECK((next - next.transpose()).cwiseAbs().maxCoeff() == 0);
  }
}
