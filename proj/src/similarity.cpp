#include "stml/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "stml/error.hpp"

namespace stml {

const char* to_string(SimilarityKind kind) {
  switch (kind) {
    case SimilarityKind::pairwise: return "pairwise";
    case SimilarityKind::contextual_raw: return "contextual_raw";
    case SimilarityKind::contextual_expanded: return "contextual_expanded";
    case SimilarityKind::contextual: return "contextual";
    case SimilarityKind::contextualized: return "contextualized";
  }
  return "unknown";
}

Matrix squared_distances(const Matrix& rows) {
  const Eigen::Index n = rows.rows();
  Matrix dist = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = (rows.row(i) - rows.row(j)).squaredNorm();
      dist(i, j) = d;
      dist(j, i) = d;
    }
  }
  return dist;
}

std::vector<std::vector<std::size_t>> knn_indices(const Matrix& squared_dist, std::size_t k) {
  const auto n = static_cast<std::size_t>(squared_dist.rows());
  if (k == 0 || k > n) {
    throw ConfigError("k must lie in [1, " + std::to_string(n) + "], got " + std::to_string(k));
  }
  std::vector<std::vector<std::size_t>> result(n);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    // Self first regardless of duplicates elsewhere in the batch.
    std::swap(order[0], order[i]);
    auto closer = [&](std::size_t a, std::size_t b) {
      const double da = squared_dist(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a));
      const double db = squared_dist(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b));
      return da != db ? da < db : a < b;
    };
    std::partial_sort(order.begin() + 1, order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), closer);
    result[i].assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  }
  return result;
}

SimilarityMatrix pairwise_similarity(const EmbeddingBatch& batch, double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("sigma must be positive");
  Matrix values = (-squared_distances(batch.data).array() / sigma).exp().matrix();
  return SimilarityMatrix{std::move(values), SimilarityKind::pairwise, sigma};
}

NeighborSets nearest_neighbor_sets(const EmbeddingBatch& batch, std::size_t k) {
  NeighborSets ns;
  ns.k = k;
  ns.nn = knn_indices(squared_distances(batch.data), k);
  const std::size_t n = ns.nn.size();

  // membership[i * n + j] <=> j in nn(i)
  std::vector<char> membership(n * n, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j : ns.nn[i]) membership[i * n + j] = 1;

  ns.reciprocal.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j : ns.nn[i])
      if (membership[j * n + i]) ns.reciprocal[i].push_back(j);
    std::sort(ns.reciprocal[i].begin(), ns.reciprocal[i].end());
  }
  return ns;
}

SimilarityMatrix contextual_raw(const NeighborSets& ns) {
  const std::size_t n = ns.size();
  Matrix values = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  std::vector<std::size_t> common;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& ri = ns.reciprocal[i];
    for (std::size_t j : ri) {
      const auto& rj = ns.reciprocal[j];
      common.clear();
      std::set_intersection(ri.begin(), ri.end(), rj.begin(), rj.end(), std::back_inserter(common));
      values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          static_cast<double>(common.size()) / static_cast<double>(ri.size());
    }
  }
  return SimilarityMatrix{std::move(values), SimilarityKind::contextual_raw, 0.0};
}

std::size_t expansion_size(std::size_t k) { return std::max<std::size_t>(1, k / 2); }

SimilarityMatrix query_expand(const SimilarityMatrix& raw, const NeighborSets& ns) {
  if (raw.size() != ns.size()) throw ShapeError("query_expand: matrix and neighbor sets differ in size");
  const std::size_t m = expansion_size(ns.k);
  const Eigen::Index n = raw.values.rows();
  Matrix values = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& neighbors = ns.nn[static_cast<std::size_t>(i)];
    for (std::size_t t = 0; t < m; ++t) values.row(i) += raw.values.row(static_cast<Eigen::Index>(neighbors[t]));
    values.row(i) /= static_cast<double>(m);
  }
  return SimilarityMatrix{std::move(values), SimilarityKind::contextual_expanded, 0.0};
}

SimilarityMatrix symmetrize_contextual(const SimilarityMatrix& expanded) {
  Matrix values = 0.5 * (expanded.values + expanded.values.transpose());
  return SimilarityMatrix{std::move(values), SimilarityKind::contextual, 0.0};
}

SimilarityMatrix contextualized_similarity(const SimilarityMatrix& pairwise,
                                           const SimilarityMatrix& contextual) {
  if (pairwise.values.rows() != contextual.values.rows() || pairwise.values.cols() != contextual.values.cols())
    throw ShapeError("contextualized_similarity: matrix sizes differ");
  Matrix values = 0.5 * (pairwise.values + contextual.values);
  return SimilarityMatrix{std::move(values), SimilarityKind::contextualized, 0.0};
}

SimilarityResult similarity_pipeline(const EmbeddingBatch& batch, std::size_t k, double sigma) {
  SimilarityMatrix wp = pairwise_similarity(batch, sigma);
  const NeighborSets ns = nearest_neighbor_sets(batch, k);
  SimilarityMatrix wc = symmetrize_contextual(query_expand(contextual_raw(ns), ns));
  SimilarityMatrix w = contextualized_similarity(wp, wc);
  return {std::move(w), std::move(wp), std::move(wc)};
}

}  // namespace stml
