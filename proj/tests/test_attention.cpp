#include <doctest.h>

#include <cmath>

#include "hsidef/attention.hpp"
#include "hsidef/rng.hpp"

using namespace hsidef;

namespace {

Matrix random_matrix(Index rows, Index cols, Rng& rng, double scale = 1.0) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = scale * rng.uniform(-1.0, 1.0);
  return m;
}

}  // namespace

TEST_CASE("embed with identity weights is the identity") {
  SslParams p = init_ssl_params(3, 3, 2, 0);
  p.w_e = Matrix::Identity(3, 3);
  Matrix patches(2, 3);
  patches << 1, 2, 3, 4, 5, 6;
  CHECK((embed(patches, p) - patches).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("embed is linear: zero in, zero out; doubling scales") {
  Rng rng(1);
  SslParams p = init_ssl_params(4, 5, 2, 2);
  const Matrix x = random_matrix(3, 4, rng);
  CHECK(embed(Matrix::Zero(3, 4), p).cwiseAbs().maxCoeff() == 0.0);
  CHECK((embed(2.0 * x, p) - 2.0 * embed(x, p)).cwiseAbs().maxCoeff() ==
        doctest::Approx(0.0));
}

TEST_CASE("positional table matches the closed form") {
  const PositionalTable table = make_positional_table(4, 2);
  CHECK(table.table(0, 0) == doctest::Approx(0.0));  // sin 0
  CHECK(table.table(0, 1) == doctest::Approx(1.0));  // cos 0
  CHECK(table.table(2, 0) == doctest::Approx(std::sin(2.0)));
  CHECK(table.table(2, 1) == doctest::Approx(std::cos(2.0)));
}

TEST_CASE("positional encoding depends on the original kept indices") {
  const PositionalTable table = make_positional_table(8, 4);
  const Matrix h = Matrix::Constant(2, 4, 0.5);
  const Matrix a = positional_encode(h, {0, 1}, table);
  const Matrix b = positional_encode(h, {2, 5}, table);
  CHECK((a - b).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("positional encoding rejects indices outside the table") {
  const PositionalTable table = make_positional_table(4, 2);
  CHECK_THROWS_AS(positional_encode(Matrix::Zero(1, 2), {4}, table), DataError);
}

TEST_CASE("self-attention with one row returns its value vector") {
  Rng rng(5);
  SslParams p = init_ssl_params(4, 4, 2, 3);
  const Matrix h = random_matrix(1, 4, rng);
  const Matrix a = self_attention(h, p);
  const Matrix v = h * p.w_v;
  CHECK((a - v).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("softmax rows sum to one through identical-row symmetry") {
  Rng rng(6);
  SslParams p = init_ssl_params(4, 4, 2, 4);
  Matrix h(3, 4);
  const Matrix row = random_matrix(1, 4, rng);
  h << row, row, random_matrix(1, 4, rng);
  const Matrix a = self_attention(h, p);
  CHECK((a.row(0) - a.row(1)).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("attention stays finite for inputs of magnitude 50") {
  SslParams p = init_ssl_params(4, 4, 2, 7);
  Matrix h(3, 4);
  h << 50, -50, 50, -50, 50, 50, 50, 50, -50, -50, -50, -50;
  const Matrix a = self_attention(h, p);
  CHECK(a.allFinite());
}

TEST_CASE("attention is permutation-equivariant without positions") {
  Rng rng(8);
  SslParams p = init_ssl_params(4, 4, 3, 8);
  const Matrix h = random_matrix(4, 4, rng);
  Matrix perm(4, 4);
  perm << h.row(2), h.row(0), h.row(3), h.row(1);
  const Matrix a = project_out(self_attention(h, p), p);
  const Matrix b = project_out(self_attention(perm, p), p);
  CHECK((b.row(0) - a.row(2)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((b.row(1) - a.row(0)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((b.row(2) - a.row(3)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((b.row(3) - a.row(1)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("project_out is the plain linear map") {
  Rng rng(9);
  SslParams p = init_ssl_params(4, 3, 3, 9);
  p.w_t = Matrix::Identity(3, 3);
  const Matrix a = random_matrix(2, 3, rng);
  CHECK((project_out(a, p) - a).cwiseAbs().maxCoeff() == 0.0);
  CHECK(project_out(Matrix::Zero(2, 3), p).cwiseAbs().maxCoeff() == 0.0);
  const Matrix b = random_matrix(2, 3, rng);
  p.w_t = random_matrix(3, 3, rng);
  CHECK((project_out(a + b, p) - project_out(a, p) - project_out(b, p))
            .cwiseAbs()
            .maxCoeff() < 1e-12);
}

TEST_CASE("ssl gradients match central finite differences") {
  // r=3, m=4, d=4, n=2 with a scalar probe loss sum(output .* R).
  const int r = 3, m = 4, d = 4, n = 2;
  Rng rng(10);
  SslParams params = init_ssl_params(m, d, n, 10);
  const PositionalTable table = make_positional_table(8, d);
  const Matrix patches = random_matrix(r, m, rng);
  const std::vector<int> kept{0, 2, 5};
  const Matrix probe = random_matrix(r, n, rng);

  const auto loss = [&](const SslParams& p) {
    return ssl_forward(patches, kept, p, table, nullptr).cwiseProduct(probe).sum();
  };

  SslCache cache;
  ssl_forward(patches, kept, params, table, &cache);
  SslGrads grads;
  grads.setZero(params);
  Matrix dpatches;
  ssl_backward(probe, params, cache, &grads, &dpatches);

  const double step = 1e-5;
  const auto check_tensor = [&](Matrix& tensor, const Matrix& analytic) {
    for (Index i = 0; i < tensor.rows(); ++i) {
      for (Index j = 0; j < tensor.cols(); ++j) {
        const double saved = tensor(i, j);
        tensor(i, j) = saved + step;
        const double up = loss(params);
        tensor(i, j) = saved - step;
        const double down = loss(params);
        tensor(i, j) = saved;
        const double fd = (up - down) / (2.0 * step);
        const double rel = std::abs(fd - analytic(i, j)) /
                           std::max({std::abs(fd), std::abs(analytic(i, j)), 1e-8});
        CHECK(rel < 1e-4);
      }
    }
  };
  check_tensor(params.w_e, grads.w_e);
  check_tensor(params.w_q, grads.w_q);
  check_tensor(params.w_k, grads.w_k);
  check_tensor(params.w_v, grads.w_v);
  check_tensor(params.w_t, grads.w_t);

  // Input gradients and the forward-mode tangent agree with differences too.
  Matrix fd_inputs(r, m);
  Matrix probe_patches = patches;
  for (Index i = 0; i < r; ++i) {
    for (Index j = 0; j < m; ++j) {
      const double saved = probe_patches(i, j);
      probe_patches(i, j) = saved + step;
      const double up =
          ssl_forward(probe_patches, kept, params, table, nullptr).cwiseProduct(probe).sum();
      probe_patches(i, j) = saved - step;
      const double down =
          ssl_forward(probe_patches, kept, params, table, nullptr).cwiseProduct(probe).sum();
      probe_patches(i, j) = saved;
      fd_inputs(i, j) = (up - down) / (2.0 * step);
    }
  }
  CHECK((fd_inputs - dpatches).cwiseAbs().maxCoeff() < 1e-6);

  Rng dir_rng(11);
  const Matrix tangent = random_matrix(r, m, dir_rng);
  const Matrix jvp = ssl_jvp(tangent, params, cache);
  const double dot_forward = jvp.cwiseProduct(probe).sum();
  const double dot_reverse = dpatches.cwiseProduct(tangent).sum();
  CHECK(dot_forward == doctest::Approx(dot_reverse).epsilon(1e-9));
}
