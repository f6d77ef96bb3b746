#pragma once

#include <vector>

#include "stml/matrix.hpp"
#include "stml/model.hpp"
#include "stml/similarity.hpp"

namespace stml {

/// d_ij = ||z_i - z_j|| / mu_i with mu_i = (1/n) sum_k ||z_i - z_k|| (self term included).
///
/// A row whose point coincides with every other point has mu_i = 0; it is
/// stored as all zeros and flagged degenerate, and the losses skip it.
struct RelativeDistanceMatrix {
  Matrix values;
  /// Plain Euclidean distances ||z_i - z_j||.
  Matrix distances;
  Vector row_mean;
  std::vector<bool> degenerate;

  std::size_t size() const { return static_cast<std::size_t>(values.rows()); }
  bool any_degenerate() const;
};

struct LossBreakdown {
  double rc_f = 0.0;
  double rc_g = 0.0;
  double kl = 0.0;
  double total = 0.0;
  double delta = 0.0;
};

struct LossValue {
  double value = 0.0;
  /// Gradient with respect to the embedding rows.
  Matrix grad;
};

RelativeDistanceMatrix relative_distances(const Matrix& embeddings);

/// Pulls dL/dd (n x n, row-relative distances) back onto the embedding rows,
/// including the dependence of mu_i on every distance in row i.
Matrix relative_distance_backward(const Matrix& embeddings, const RelativeDistanceMatrix& rel,
                                  const Matrix& grad_rel);

/// Soft-label contrastive loss over ordered pairs j != i:
///   (1/n) sum w_ij d_ij^2 + (1/n) sum (1 - w_ij) [delta - d_ij]_+^2
LossValue relaxed_contrastive(const Matrix& embeddings, const Matrix& weights, double delta);

/// Value only, from precomputed relative distances.
double relaxed_contrastive_value(const RelativeDistanceMatrix& rel, const Matrix& weights, double delta);

/// Row-wise softmax of -d over j != i. Diagonal entries are 0.
Matrix neg_distance_softmax(const RelativeDistanceMatrix& rel);

/// (1/n) sum_i KL(psi(-d^g_i) || psi(-d^f_i)); the g side is a fixed target.
/// The returned gradient is with respect to the f embeddings only.
LossValue kl_self_distillation(const Matrix& f_embeddings, const Matrix& g_embeddings);

double kl_value(const RelativeDistanceMatrix& rel_f, const RelativeDistanceMatrix& rel_g);

struct StmlLoss {
  LossBreakdown breakdown;
  Matrix grad_f;
  Matrix grad_g;
};

/// 1/2 [L_RC(f) + L_RC(g)] + L_KL(f, g); the KL term is dropped when `use_kl` is false.
StmlLoss stml_loss(const EmbeddingBatch& f, const EmbeddingBatch& g, const Matrix& weights, double delta,
                   bool use_kl = true);

}  // namespace stml
