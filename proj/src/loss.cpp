#include "stml/loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "stml/error.hpp"

namespace stml {

namespace {

void require_pairs(std::size_t n, const char* what) {
  if (n < 2) throw ConfigError(std::string(what) + " needs at least 2 samples");
}

void require_square(const Matrix& m, std::size_t n, const char* what) {
  if (static_cast<std::size_t>(m.rows()) != n || static_cast<std::size_t>(m.cols()) != n)
    throw ShapeError(std::string(what) + ": expected " + std::to_string(n) + "x" + std::to_string(n) +
                     " matrix, got " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
}

}  // namespace

bool RelativeDistanceMatrix::any_degenerate() const {
  return std::find(degenerate.begin(), degenerate.end(), true) != degenerate.end();
}

RelativeDistanceMatrix relative_distances(const Matrix& embeddings) {
  const Eigen::Index n = embeddings.rows();
  require_pairs(static_cast<std::size_t>(n), "relative_distances");
  RelativeDistanceMatrix rel;
  rel.distances = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = (embeddings.row(i) - embeddings.row(j)).norm();
      rel.distances(i, j) = d;
      rel.distances(j, i) = d;
    }
  }
  rel.values = Matrix::Zero(n, n);
  rel.row_mean = Vector::Zero(n);
  rel.degenerate.assign(static_cast<std::size_t>(n), false);
  for (Eigen::Index i = 0; i < n; ++i) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) sum += rel.distances(i, j);
    const double mu = sum / static_cast<double>(n);
    rel.row_mean(i) = mu;
    if (mu == 0.0) {
      rel.degenerate[static_cast<std::size_t>(i)] = true;
      continue;
    }
    for (Eigen::Index j = 0; j < n; ++j) rel.values(i, j) = rel.distances(i, j) / mu;
  }
  return rel;
}

Matrix relative_distance_backward(const Matrix& embeddings, const RelativeDistanceMatrix& rel,
                                  const Matrix& grad_rel) {
  const Eigen::Index n = embeddings.rows();
  require_square(grad_rel, static_cast<std::size_t>(n), "relative_distance_backward");
  const double inv_n = 1.0 / static_cast<double>(n);

  // dL/dD_ij = G_ij / mu_i - (1/n) sum_l G_il D_il / mu_i^2
  Matrix grad_dist = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (rel.degenerate[static_cast<std::size_t>(i)]) continue;
    const double mu = rel.row_mean(i);
    double through_mean = 0.0;
    for (Eigen::Index l = 0; l < n; ++l) through_mean += grad_rel(i, l) * rel.distances(i, l);
    through_mean *= inv_n / (mu * mu);
    for (Eigen::Index j = 0; j < n; ++j) grad_dist(i, j) = grad_rel(i, j) / mu - through_mean;
  }

  Matrix grad = Matrix::Zero(n, embeddings.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double dist = rel.distances(i, j);
      // Coincident points: the norm has no gradient there; take 0.
      if (dist == 0.0) continue;
      const double coeff = grad_dist(i, j) / dist;
      if (coeff == 0.0) continue;
      const auto diff = embeddings.row(i) - embeddings.row(j);
      grad.row(i) += coeff * diff;
      grad.row(j) -= coeff * diff;
    }
  }
  return grad;
}

double relaxed_contrastive_value(const RelativeDistanceMatrix& rel, const Matrix& weights, double delta) {
  const Eigen::Index n = rel.values.rows();
  require_square(weights, static_cast<std::size_t>(n), "relaxed_contrastive");
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (rel.degenerate[static_cast<std::size_t>(i)]) continue;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double d = rel.values(i, j);
      const double w = weights(i, j);
      const double hinge = std::max(0.0, delta - d);
      total += w * d * d + (1.0 - w) * hinge * hinge;
    }
  }
  return total / static_cast<double>(n);
}

LossValue relaxed_contrastive(const Matrix& embeddings, const Matrix& weights, double delta) {
  if (!(delta > 0.0)) throw ConfigError("margin delta must be positive");
  const RelativeDistanceMatrix rel = relative_distances(embeddings);
  const Eigen::Index n = embeddings.rows();
  LossValue out;
  out.value = relaxed_contrastive_value(rel, weights, delta);

  const double inv_n = 1.0 / static_cast<double>(n);
  Matrix grad_rel = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (rel.degenerate[static_cast<std::size_t>(i)]) continue;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double d = rel.values(i, j);
      const double w = weights(i, j);
      // Hinge subgradient at d == delta is 0.
      const double hinge = d < delta ? delta - d : 0.0;
      grad_rel(i, j) = 2.0 * inv_n * (w * d - (1.0 - w) * hinge);
    }
  }
  out.grad = relative_distance_backward(embeddings, rel, grad_rel);
  return out;
}

Matrix neg_distance_softmax(const RelativeDistanceMatrix& rel) {
  const Eigen::Index n = rel.values.rows();
  Matrix p = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double max_logit = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) max_logit = std::max(max_logit, -rel.values(i, j));
    double sum = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      p(i, j) = std::exp(-rel.values(i, j) - max_logit);
      sum += p(i, j);
    }
    p.row(i) /= sum;
  }
  return p;
}

double kl_value(const RelativeDistanceMatrix& rel_f, const RelativeDistanceMatrix& rel_g) {
  const Eigen::Index n = rel_f.values.rows();
  require_square(rel_g.values, static_cast<std::size_t>(n), "kl_self_distillation");
  const Matrix p = neg_distance_softmax(rel_g);
  const Matrix q = neg_distance_softmax(rel_f);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (rel_f.degenerate[static_cast<std::size_t>(i)] || rel_g.degenerate[static_cast<std::size_t>(i)]) continue;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i || p(i, j) == 0.0) continue;
      total += p(i, j) * (std::log(p(i, j)) - std::log(q(i, j)));
    }
  }
  return total / static_cast<double>(n);
}

LossValue kl_self_distillation(const Matrix& f_embeddings, const Matrix& g_embeddings) {
  const auto n = static_cast<std::size_t>(f_embeddings.rows());
  require_pairs(n, "kl_self_distillation");
  if (static_cast<std::size_t>(g_embeddings.rows()) != n)
    throw ShapeError("kl_self_distillation: f and g batches differ in size");
  const RelativeDistanceMatrix rel_f = relative_distances(f_embeddings);
  const RelativeDistanceMatrix rel_g = relative_distances(g_embeddings);
  LossValue out;
  out.value = kl_value(rel_f, rel_g);

  // d/d(d^f_ij) of sum_j p_ij log(p_ij / q_ij) = p_ij - q_ij
  const Matrix p = neg_distance_softmax(rel_g);
  const Matrix q = neg_distance_softmax(rel_f);
  const double inv_n = 1.0 / static_cast<double>(n);
  Matrix grad_rel = Matrix::Zero(f_embeddings.rows(), f_embeddings.rows());
  for (std::size_t i = 0; i < n; ++i) {
    if (rel_f.degenerate[i] || rel_g.degenerate[i]) continue;
    const auto r = static_cast<Eigen::Index>(i);
    grad_rel.row(r) = inv_n * (p.row(r) - q.row(r));
    grad_rel(r, r) = 0.0;
  }
  out.grad = relative_distance_backward(f_embeddings, rel_f, grad_rel);
  return out;
}

StmlLoss stml_loss(const EmbeddingBatch& f, const EmbeddingBatch& g, const Matrix& weights, double delta,
                   bool use_kl) {
  if (f.size() != g.size()) throw ShapeError("stml_loss: f and g batches differ in size");
  const LossValue rc_f = relaxed_contrastive(f.data, weights, delta);
  const LossValue rc_g = relaxed_contrastive(g.data, weights, delta);
  StmlLoss out;
  out.breakdown.rc_f = rc_f.value;
  out.breakdown.rc_g = rc_g.value;
  out.breakdown.delta = delta;
  out.grad_f = 0.5 * rc_f.grad;
  out.grad_g = 0.5 * rc_g.grad;
  if (use_kl) {
    const LossValue kl = kl_self_distillation(f.data, g.data);
    out.breakdown.kl = kl.value;
    out.grad_f += kl.grad;
  }
  out.breakdown.total = 0.5 * (out.breakdown.rc_f + out.breakdown.rc_g) + out.breakdown.kl;
  return out;
}

}  // namespace stml
