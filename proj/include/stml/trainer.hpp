#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "stml/data.hpp"
#include "stml/eval.hpp"
#include "stml/loss.hpp"
#include "stml/model.hpp"
#include "stml/optimizer.hpp"
#include "stml/rng.hpp"
#include "stml/similarity.hpp"

namespace stml {

/// Component switches for ablation runs. At most one of no_contextual,
/// no_pairwise and binarize_weights may be set; the rest combine freely.
struct Ablations {
  bool no_contextual = false;
  bool no_pairwise = false;
  bool binarize_weights = false;
  bool no_momentum = false;
  bool random_batches = false;
  bool no_kl = false;

  static const std::vector<std::string>& names();
  /// Sets one flag by name; throws ConfigError on an unknown name.
  void enable(const std::string& name);
  bool enabled(const std::string& name) const;
  /// Comma-separated enabled flags, or "none".
  std::string to_string() const;
  void validate() const;

  bool operator==(const Ablations&) const = default;
};

struct RunConfig {
  double sigma = 3.0;
  double delta = 1.0;
  double momentum = 0.999;
  std::size_t context_k = 10;
  std::size_t queries = 24;
  std::size_t group_size = 5;
  std::size_t views = 2;
  /// Augmentation noise std as a fraction of the global training-input std.
  double noise_factor = 0.05;
  std::size_t epochs = 60;
  double learning_rate = 1e-4;
  /// 0 selects ceil(train size / (queries * group_size)).
  std::size_t batches_per_epoch = 0;
  std::uint64_t seed = 7;
  ModelDims dims;
  Ablations ablate;

  void validate() const;
  std::size_t batch_rows() const { return queries * group_size; }

  bool operator==(const RunConfig&) const = default;
};

/// Mini-batches of dataset row indices: per query, the query followed by its
/// group_size - 1 nearest neighbors.
struct EpochPlan {
  std::vector<std::vector<std::size_t>> batches;
};

/// `embeddings` are the student f-head embeddings of the training rows.
EpochPlan build_epoch_plan(const Matrix& embeddings, const RunConfig& config, std::size_t n_batches, Rng& rng);

struct AugmentedBatch {
  Matrix inputs;
  /// Row of the un-augmented batch that produced each output row.
  std::vector<std::size_t> source;
};

/// `views` noisy copies of every row: all first-view rows, then all second-view rows, ...
AugmentedBatch augment_views(const Matrix& inputs, std::size_t views, double noise_std, Rng& rng);

/// Pseudo-label matrix actually fed to the loss under the configured ablation.
Matrix apply_ablation(const SimilarityResult& sims, const Ablations& ablate);

struct StepDiagnostics {
  std::optional<SimilarityAurocs> aurocs;
};

struct StepResult {
  LossBreakdown loss;
  StepDiagnostics diagnostics;
};

/// One teacher-labels / student-update / EMA iteration on an already augmented batch.
/// `diag_labels` are used only for AUROC diagnostics, never by the objective.
StepResult train_step(ModelParams& teacher, ModelParams& student, const Matrix& batch_inputs,
                      const RunConfig& config, Adam& optimizer, double learning_rate,
                      const std::vector<int>* diag_labels = nullptr);

struct EpochMetrics {
  std::size_t epoch = 0;
  LossBreakdown loss;
  double recall1_test = 0.0;
  SimilarityAurocs aurocs;
  double lr = 0.0;
};

struct TrainResult {
  ModelParams teacher;
  ModelParams student;
  double initial_recall1 = 0.0;
  std::vector<EpochMetrics> history;
};

/// Called after every epoch with the current models and that epoch's metrics.
using EpochCallback = std::function<void(const EpochMetrics&, const ModelParams& teacher, const ModelParams& student)>;

/// The (teacher, student) pair that train() starts from for this config's seed.
std::pair<ModelParams, ModelParams> initial_models(const RunConfig& config);

/// Student f-head Recall@1 on the test split.
double test_recall1(const ModelParams& student, const LabeledDataset& data);

/// Full training run on the train split of `data`; test split is for metrics only.
TrainResult train(const LabeledDataset& data, const RunConfig& config, const EpochCallback& on_epoch = {});

}  // namespace stml
