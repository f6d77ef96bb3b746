#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "stml/matrix.hpp"
#include "stml/similarity.hpp"

namespace stml {

struct RetrievalReport {
  std::map<std::size_t, double> recall_at;
  std::size_t n_queries = 0;
};

struct RocReport {
  double auroc = 0.5;
  /// (fpr, tpr) from (0,0) to (1,1), one point per distinct score threshold.
  std::vector<std::pair<double, double>> curve;
};

/// Fraction of samples whose k nearest other samples contain a same-class sample.
/// Throws ConfigError naming a class with a single member.
RetrievalReport recall_at_k(const Matrix& embeddings, const std::vector<int>& labels,
                            const std::vector<std::size_t>& ks);

/// Mann-Whitney AUROC; ties count one half.
RocReport auroc(const std::vector<double>& scores, const std::vector<bool>& positives);

struct SimilarityAurocs {
  double w = 0.5;
  double wp = 0.5;
  double wc = 0.5;
};

/// AUROC of the upper off-diagonal triangle of `m` against class equivalence.
RocReport matrix_auroc(const Matrix& m, const std::vector<int>& labels);

SimilarityAurocs similarity_auroc_triplet(const SimilarityResult& sims, const std::vector<int>& labels);

struct NeighborRow {
  std::size_t query = 0;
  std::vector<std::size_t> neighbors;
  std::vector<bool> correct;
};

struct NeighborDump {
  std::vector<NeighborRow> rows;
  std::size_t top_n = 0;
  /// Set when the requested top_n was clipped to n - 1.
  std::string note;
};

NeighborDump neighbor_dump(const Matrix& embeddings, const std::vector<int>& labels, std::size_t top_n);

/// `query,rank,neighbor,correct` rows.
std::string format_neighbor_dump(const NeighborDump& dump);

}  // namespace stml
