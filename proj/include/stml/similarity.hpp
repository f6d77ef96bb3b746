#pragma once

#include <cstddef>
#include <vector>

#include "stml/matrix.hpp"
#include "stml/model.hpp"

namespace stml {

enum class SimilarityKind { pairwise, contextual_raw, contextual_expanded, contextual, contextualized };

const char* to_string(SimilarityKind kind);

struct SimilarityMatrix {
  Matrix values;
  SimilarityKind kind = SimilarityKind::pairwise;
  /// Kernel bandwidth in squared-distance units; 0 for non-pairwise kinds.
  double sigma = 0.0;

  std::size_t size() const { return static_cast<std::size_t>(values.rows()); }
};

/// k-nearest and k-reciprocal neighbor sets over one batch.
///
/// nn[i] lists the k closest rows to i by Euclidean distance, closest first,
/// ties broken by ascending index; i itself always comes first.
/// reciprocal[i] = { j in nn[i] : i in nn[j] }, sorted ascending.
struct NeighborSets {
  std::size_t k = 0;
  std::vector<std::vector<std::size_t>> nn;
  std::vector<std::vector<std::size_t>> reciprocal;

  std::size_t size() const { return nn.size(); }
};

/// Squared Euclidean distances between all rows, by explicit differences.
Matrix squared_distances(const Matrix& rows);

/// The `k` nearest rows to every row (self included), closest first.
std::vector<std::vector<std::size_t>> knn_indices(const Matrix& squared_dist, std::size_t k);

SimilarityMatrix pairwise_similarity(const EmbeddingBatch& batch, double sigma);

NeighborSets nearest_neighbor_sets(const EmbeddingBatch& batch, std::size_t k);

/// Asymmetric Jaccard overlap of reciprocal sets, gated on j in R_k(i).
SimilarityMatrix contextual_raw(const NeighborSets& ns);

/// Size of the neighborhood averaged over in query expansion: max(1, floor(k/2)).
std::size_t expansion_size(std::size_t k);

/// Row i becomes the mean of raw rows h over the floor(k/2) nearest neighbors of i.
SimilarityMatrix query_expand(const SimilarityMatrix& raw, const NeighborSets& ns);

SimilarityMatrix symmetrize_contextual(const SimilarityMatrix& expanded);

SimilarityMatrix contextualized_similarity(const SimilarityMatrix& pairwise,
                                           const SimilarityMatrix& contextual);

struct SimilarityResult {
  SimilarityMatrix w;
  SimilarityMatrix wp;
  SimilarityMatrix wc;
};

/// Pseudo labels for one batch of teacher embeddings.
SimilarityResult similarity_pipeline(const EmbeddingBatch& batch, std::size_t k, double sigma);

}  // namespace stml
