#include "stml/eval.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "stml/error.hpp"

namespace stml {

namespace {

// Ranked other-sample indices for every query (self excluded), ties by index.
std::vector<std::vector<std::size_t>> ranked_neighbors(const Matrix& embeddings, std::size_t count) {
  const Matrix dist = squared_distances(embeddings);
  const auto nn = knn_indices(dist, count + 1);
  std::vector<std::vector<std::size_t>> out(nn.size());
  for (std::size_t i = 0; i < nn.size(); ++i) out[i].assign(nn[i].begin() + 1, nn[i].end());
  return out;
}

}  // namespace

RetrievalReport recall_at_k(const Matrix& embeddings, const std::vector<int>& labels,
                            const std::vector<std::size_t>& ks) {
  const std::size_t n = labels.size();
  if (static_cast<std::size_t>(embeddings.rows()) != n) throw ShapeError("recall_at_k: labels and rows differ");
  std::map<int, std::size_t> counts;
  for (int label : labels) ++counts[label];
  for (const auto& [label, count] : counts)
    if (count < 2) throw ConfigError("recall_at_k: class " + std::to_string(label) + " has a single member");
  if (ks.empty()) throw ConfigError("recall_at_k: no k requested");
  const std::size_t k_max = *std::max_element(ks.begin(), ks.end());
  for (std::size_t k : ks)
    if (k == 0 || k > n - 1) throw ConfigError("recall_at_k: k must lie in [1, n-1]");

  // First rank at which a same-class neighbor appears; n if none within k_max.
  const auto ranked = ranked_neighbors(embeddings, k_max);
  std::vector<std::size_t> first_hit(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t r = 0; r < ranked[i].size(); ++r) {
      if (labels[ranked[i][r]] == labels[i]) {
        first_hit[i] = r + 1;
        break;
      }
    }
  }
  RetrievalReport report;
  report.n_queries = n;
  for (std::size_t k : ks) {
    const auto hits = std::count_if(first_hit.begin(), first_hit.end(), [k](std::size_t r) { return r <= k; });
    report.recall_at[k] = static_cast<double>(hits) / static_cast<double>(n);
  }
  return report;
}

RocReport auroc(const std::vector<double>& scores, const std::vector<bool>& positives) {
  if (scores.size() != positives.size()) throw ShapeError("auroc: scores and labels differ in length");
  const auto n_pos = static_cast<std::size_t>(std::count(positives.begin(), positives.end(), true));
  const std::size_t n_neg = positives.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw ConfigError("auroc: need at least one positive and one negative");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  // Sweep thresholds from high to low; each tie group moves the curve diagonally,
  // which is the trapezoid that counts ties as one half.
  RocReport report;
  report.curve.emplace_back(0.0, 0.0);
  double area = 0.0;
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::size_t group_tp = 0, group_fp = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      positives[order[j]] ? ++group_tp : ++group_fp;
      ++j;
    }
    area += static_cast<double>(group_fp) * (static_cast<double>(tp) + 0.5 * static_cast<double>(group_tp));
    tp += group_tp;
    fp += group_fp;
    report.curve.emplace_back(static_cast<double>(fp) / static_cast<double>(n_neg),
                              static_cast<double>(tp) / static_cast<double>(n_pos));
    i = j;
  }
  report.auroc = area / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
  return report;
}

RocReport matrix_auroc(const Matrix& m, const std::vector<int>& labels) {
  const std::size_t n = labels.size();
  if (static_cast<std::size_t>(m.rows()) != n || static_cast<std::size_t>(m.cols()) != n)
    throw ShapeError("matrix_auroc: matrix and labels differ in size");
  std::vector<double> scores;
  std::vector<bool> positives;
  scores.reserve(n * (n - 1) / 2);
  positives.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      scores.push_back(m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
      positives.push_back(labels[i] == labels[j]);
    }
  return auroc(scores, positives);
}

SimilarityAurocs similarity_auroc_triplet(const SimilarityResult& sims, const std::vector<int>& labels) {
  return SimilarityAurocs{matrix_auroc(sims.w.values, labels).auroc, matrix_auroc(sims.wp.values, labels).auroc,
                          matrix_auroc(sims.wc.values, labels).auroc};
}

NeighborDump neighbor_dump(const Matrix& embeddings, const std::vector<int>& labels, std::size_t top_n) {
  const std::size_t n = labels.size();
  if (static_cast<std::size_t>(embeddings.rows()) != n) throw ShapeError("neighbor_dump: labels and rows differ");
  NeighborDump dump;
  dump.top_n = top_n;
  if (n < 2) {
    dump.top_n = 0;
    dump.note = "fewer than 2 samples; nothing to retrieve";
    return dump;
  }
  if (top_n > n - 1) {
    dump.top_n = n - 1;
    dump.note = "top_n " + std::to_string(top_n) + " truncated to " + std::to_string(n - 1);
  }
  const auto ranked = ranked_neighbors(embeddings, dump.top_n);
  for (std::size_t i = 0; i < n; ++i) {
    NeighborRow row;
    row.query = i;
    row.neighbors = ranked[i];
    for (std::size_t j : row.neighbors) row.correct.push_back(labels[j] == labels[i]);
    dump.rows.push_back(std::move(row));
  }
  return dump;
}

std::string format_neighbor_dump(const NeighborDump& dump) {
  std::string out = "query,rank,neighbor,correct\n";
  for (const NeighborRow& row : dump.rows)
    for (std::size_t r = 0; r < row.neighbors.size(); ++r)
      out += std::to_string(row.query) + "," + std::to_string(r + 1) + "," + std::to_string(row.neighbors[r]) + "," +
             (row.correct[r] ? "1" : "0") + "\n";
  return out;
}

}  // namespace stml
