#pragma once

#include <cstdint>
#include <vector>

#include "hsidef/masking.hpp"
#include "hsidef/superpixel.hpp"
#include "hsidef/types.hpp"

namespace hsidef {

enum class AssocWeighting { Paper, Inverse };

// Per-superpixel mean and ridge-regularized covariance of the full
// attention features.
struct SuperpixelStats {
  Matrix mu;                  // H x t
  std::vector<Matrix> gamma;  // H regularized covariances, t x t
  double lambda_reg = 0.0;    // <=0 on input selects the scaled-trace default
};

// Pixel-to-superpixel association. Each pixel belongs to exactly one
// superpixel, so the sparse matrix is stored as one (column, weight) pair
// per row plus per-column member lists.
struct AssocMatrix {
  std::vector<int> owner;        // pixel -> superpixel (0-based)
  std::vector<double> distance;  // raw Mahalanobis distance O_{i,owner}
  std::vector<double> weight;    // column-normalized weight, cols sum to 1
  std::vector<std::vector<int>> members;  // superpixel -> pixel ids

  int superpixels() const { return static_cast<int>(members.size()); }
};

struct Graph {
  Matrix nodes;       // H x t local associative representation
  IntMatrix edges;    // H x H binary symmetric adjacency
  double sigma = 0.0;
  double epsilon = 0.0;  // mean similarity threshold
};

struct GcnParams {
  Matrix w_g;  // t x t
  Vector b;    // t
  double beta = 0.1;
};

GcnParams init_gcn_params(int t, double beta, std::uint64_t seed);

// One pixel row of Z: kept slots take the attention rows, masked slots take
// the blank table rows, concatenated in original patch order.
Vector fill_blanks(const Matrix& attention, const MaskPlan& plan, const Matrix& blank_table);

SuperpixelStats superpixel_stats(const Matrix& z, const SuperpixelMap& map, double lambda_reg);

AssocMatrix association_matrix(const Matrix& z, const SuperpixelStats& stats,
                               const SuperpixelMap& map,
                               AssocWeighting weighting = AssocWeighting::Paper);

// L = O~^T Z
Matrix local_repr(const AssocMatrix& assoc, const Matrix& z);

// RBF similarity graph; epsilon is fixed to the mean similarity.
// sigma <= 0 selects sqrt(median pairwise squared node distance).
Graph build_graph(const Matrix& nodes, double sigma);

// L-hat = act(D~^-1/2 (E+I) D~^-1/2 L Wg + b)
Matrix gcn_forward(const Graph& graph, const GcnParams& params, Activation act,
                   Matrix* preact_out = nullptr);

// Backward through gcn_forward; returns d(nodes), accumulates dWg/db.
Matrix gcn_backward(const Graph& graph, const GcnParams& params, Activation act,
                    const Matrix& preact, const Matrix& dout, Matrix* dw_g, Vector* db);

// Z-hat = O~ L-hat
Matrix propagate(const AssocMatrix& assoc, const Matrix& node_repr);

// Symmetric normalization D~^-1/2 (E+I) D~^-1/2 of a binary adjacency.
Matrix normalized_adjacency(const IntMatrix& edges);

// E~ = sigmoid(L-hat L-hat^T)
Matrix learn_adjacency(const Matrix& node_repr);

// E-hat = beta*learned + (1-beta)*previous
Matrix update_adjacency(const IntMatrix& prev, const Matrix& learned, double beta);

// Binarizes at the candidate threshold whose one-count best matches the
// previous adjacency's; ties prefer the larger threshold (sparser graph).
IntMatrix threshold_adjacency(const Matrix& weighted, const IntMatrix& prev,
                              double* chosen_gamma = nullptr);

void write_edge_list(const IntMatrix& edges, const std::filesystem::path& path);

}  // namespace hsidef
