#include "stml/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <sstream>

#include "stml/error.hpp"

namespace stml {

const std::vector<std::string>& Ablations::names() {
  static const std::vector<std::string> kNames{"no_contextual", "no_pairwise",    "binarize_weights",
                                               "no_momentum",   "random_batches", "no_kl"};
  return kNames;
}

namespace {

bool* flag(Ablations& a, const std::string& name) {
  if (name == "no_contextual") return &a.no_contextual;
  if (name == "no_pairwise") return &a.no_pairwise;
  if (name == "binarize_weights") return &a.binarize_weights;
  if (name == "no_momentum") return &a.no_momentum;
  if (name == "random_batches") return &a.random_batches;
  if (name == "no_kl") return &a.no_kl;
  return nullptr;
}

double global_std(const Matrix& x) {
  const double mean = x.mean();
  const double var = (x.array() - mean).square().sum() / static_cast<double>(x.size());
  return std::sqrt(var);
}

bool finite(const LossBreakdown& b) {
  return std::isfinite(b.rc_f) && std::isfinite(b.rc_g) && std::isfinite(b.kl) && std::isfinite(b.total);
}

}  // namespace

void Ablations::enable(const std::string& name) {
  bool* f = flag(*this, name);
  if (!f) throw ConfigError("unknown ablation flag '" + name + "'");
  *f = true;
}

bool Ablations::enabled(const std::string& name) const {
  Ablations copy = *this;
  bool* f = flag(copy, name);
  if (!f) throw ConfigError("unknown ablation flag '" + name + "'");
  return *f;
}

std::string Ablations::to_string() const {
  std::string out;
  for (const std::string& name : names()) {
    if (!enabled(name)) continue;
    if (!out.empty()) out += ",";
    out += name;
  }
  return out.empty() ? "none" : out;
}

void Ablations::validate() const {
  if (int(no_contextual) + int(no_pairwise) + int(binarize_weights) > 1)
    throw ConfigError("ablations no_contextual, no_pairwise and binarize_weights are mutually exclusive");
}

void RunConfig::validate() const {
  dims.validate();
  ablate.validate();
  if (!(sigma > 0.0)) throw ConfigError("train.sigma must be positive");
  if (!(delta > 0.0)) throw ConfigError("train.delta must be positive");
  if (!(momentum >= 0.0 && momentum <= 1.0)) throw ConfigError("train.momentum must lie in [0, 1]");
  if (context_k == 0) throw ConfigError("train.context_k must be positive");
  if (queries == 0) throw ConfigError("train.queries must be positive");
  if (group_size == 0) throw ConfigError("train.group_size must be positive");
  if (views == 0) throw ConfigError("train.views must be positive");
  if (queries * group_size * views < 2) throw ConfigError("a batch must hold at least 2 rows");
  if (context_k > queries * group_size * views)
    throw ConfigError("train.context_k exceeds the augmented batch size");
  if (!(noise_factor >= 0.0)) throw ConfigError("train.noise_factor must be non-negative");
  if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate must be positive");
}

EpochPlan build_epoch_plan(const Matrix& embeddings, const RunConfig& config, std::size_t n_batches, Rng& rng) {
  const auto n = static_cast<std::size_t>(embeddings.rows());
  if (n < config.group_size)
    throw ConfigError("dataset has " + std::to_string(n) + " rows, fewer than one group of " +
                      std::to_string(config.group_size));
  EpochPlan plan;
  const std::size_t rows = config.batch_rows();

  if (config.ablate.random_batches) {
    if (rows > n) throw ConfigError("batch of " + std::to_string(rows) + " rows exceeds the dataset");
    for (std::size_t b = 0; b < n_batches; ++b) plan.batches.push_back(rng.sample_without_replacement(n, rows));
    return plan;
  }
  if (config.queries > n) throw ConfigError("more queries per batch than dataset rows");

  std::vector<std::vector<std::size_t>> neighbors;
  if (config.group_size > 1) neighbors = knn_indices(squared_distances(embeddings), config.group_size);

  for (std::size_t b = 0; b < n_batches; ++b) {
    std::vector<std::size_t> batch;
    batch.reserve(rows);
    for (std::size_t q : rng.sample_without_replacement(n, config.queries)) {
      batch.push_back(q);
      if (config.group_size > 1) batch.insert(batch.end(), neighbors[q].begin() + 1, neighbors[q].end());
    }
    plan.batches.push_back(std::move(batch));
  }
  return plan;
}

AugmentedBatch augment_views(const Matrix& inputs, std::size_t views, double noise_std, Rng& rng) {
  if (views == 0) throw ConfigError("views must be at least 1");
  const Eigen::Index n = inputs.rows();
  AugmentedBatch out;
  out.inputs.resize(n * static_cast<Eigen::Index>(views), inputs.cols());
  out.source.reserve(static_cast<std::size_t>(n) * views);
  for (std::size_t v = 0; v < views; ++v) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index row = static_cast<Eigen::Index>(v) * n + i;
      for (Eigen::Index j = 0; j < inputs.cols(); ++j) {
        const double noise = noise_std == 0.0 ? 0.0 : noise_std * rng.normal();
        out.inputs(row, j) = inputs(i, j) + noise;
      }
      out.source.push_back(static_cast<std::size_t>(i));
    }
  }
  return out;
}

Matrix apply_ablation(const SimilarityResult& sims, const Ablations& ablate) {
  ablate.validate();
  if (ablate.no_contextual) return sims.wp.values;
  if (ablate.no_pairwise) return sims.wc.values;
  if (ablate.binarize_weights) return (sims.w.values.array() >= 0.5).cast<double>().matrix();
  return sims.w.values;
}

StepResult train_step(ModelParams& teacher, ModelParams& student, const Matrix& batch_inputs,
                      const RunConfig& config, Adam& optimizer, double learning_rate,
                      const std::vector<int>* diag_labels) {
  if (batch_inputs.rows() < 2) throw ConfigError("train_step needs at least 2 rows");
  const EmbeddingBatch teacher_z = forward_teacher(teacher, batch_inputs);
  const SimilarityResult sims = similarity_pipeline(teacher_z, config.context_k, config.sigma);
  const Matrix weights = apply_ablation(sims, config.ablate);

  const StudentOutput out = forward_student(student, batch_inputs);
  const StmlLoss loss = stml_loss(out.f, out.g, weights, config.delta, !config.ablate.no_kl);
  if (!finite(loss.breakdown) || !loss.grad_f.allFinite() || !loss.grad_g.allFinite()) {
    std::ostringstream msg;
    msg << "non-finite loss: rc_f=" << loss.breakdown.rc_f << " rc_g=" << loss.breakdown.rc_g
        << " kl=" << loss.breakdown.kl << " total=" << loss.breakdown.total;
    throw NumericalError(msg.str());
  }
  const ParamGradient grad = backward_student(student, out.trace, loss.grad_f, loss.grad_g);
  optimizer.step(student, grad, learning_rate);
  ema_update(teacher, student, config.ablate.no_momentum ? 0.0 : config.momentum);

  StepResult result;
  result.loss = loss.breakdown;
  // AUROC needs both same-class and cross-class pairs.
  if (diag_labels && std::adjacent_find(diag_labels->begin(), diag_labels->end(), std::not_equal_to<>()) !=
                         diag_labels->end()) {
    std::set<int> distinct(diag_labels->begin(), diag_labels->end());
    if (distinct.size() < diag_labels->size()) result.diagnostics.aurocs = similarity_auroc_triplet(sims, *diag_labels);
  }
  return result;
}

std::pair<ModelParams, ModelParams> initial_models(const RunConfig& config) {
  Rng root(config.seed);
  Rng init_rng = root.fork();
  return init_models(config.dims, init_rng);
}

double test_recall1(const ModelParams& student, const LabeledDataset& data) {
  const LabeledDataset test = data.subset(Split::test);
  const EmbeddingBatch f = embed_f(student, test.inputs);
  return recall_at_k(f.data, test.labels, {1}).recall_at.at(1);
}

TrainResult train(const LabeledDataset& data, const RunConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  data.validate();
  if (data.dim() != config.dims.d_in)
    throw ConfigError("dataset width " + std::to_string(data.dim()) + " != model.d_in " +
                      std::to_string(config.dims.d_in));

  const LabeledDataset train_set = data.subset(Split::train);
  if (train_set.size() == 0) throw ConfigError("dataset has no training rows");
  const std::size_t n_batches =
      config.batches_per_epoch > 0 ? config.batches_per_epoch
                                   : (train_set.size() + config.batch_rows() - 1) / config.batch_rows();
  const double noise_std = config.noise_factor * global_std(train_set.inputs);

  auto [teacher, student] = initial_models(config);
  Rng root(config.seed);
  root.next_u64();  // consumed by initial_models
  Rng plan_rng = root.fork();
  Rng augment_rng = root.fork();
  Adam optimizer(student.parameter_count());

  TrainResult result;
  result.initial_recall1 = test_recall1(student, data);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = cosine_decay(config.learning_rate, static_cast<double>(epoch) / static_cast<double>(config.epochs));
    const Matrix plan_space = config.ablate.random_batches ? Matrix(train_set.inputs) : embed_f(student, train_set.inputs).data;
    const EpochPlan plan = build_epoch_plan(plan_space, config, n_batches, plan_rng);

    EpochMetrics metrics;
    metrics.epoch = epoch + 1;
    metrics.lr = lr;
    SimilarityAurocs auroc_sum{0.0, 0.0, 0.0};
    std::size_t auroc_steps = 0;
    for (const auto& rows : plan.batches) {
      const LabeledDataset batch = train_set.subset(rows);
      const AugmentedBatch augmented = augment_views(batch.inputs, config.views, noise_std, augment_rng);
      std::vector<int> view_labels;
      view_labels.reserve(augmented.source.size());
      for (std::size_t s : augmented.source) view_labels.push_back(batch.labels[s]);

      StepResult step;
      try {
        step = train_step(teacher, student, augmented.inputs, config, optimizer, lr, &view_labels);
      } catch (const NumericalError& e) {
        throw NumericalError("epoch " + std::to_string(epoch + 1) + ", step " + std::to_string(optimizer.steps() + 1) +
                             ": " + e.what());
      }
      metrics.loss.rc_f += step.loss.rc_f;
      metrics.loss.rc_g += step.loss.rc_g;
      metrics.loss.kl += step.loss.kl;
      metrics.loss.total += step.loss.total;
      if (step.diagnostics.aurocs) {
        auroc_sum.w += step.diagnostics.aurocs->w;
        auroc_sum.wp += step.diagnostics.aurocs->wp;
        auroc_sum.wc += step.diagnostics.aurocs->wc;
        ++auroc_steps;
      }
    }
    const auto count = static_cast<double>(plan.batches.size());
    metrics.loss.rc_f /= count;
    metrics.loss.rc_g /= count;
    metrics.loss.kl /= count;
    metrics.loss.total /= count;
    metrics.loss.delta = config.delta;
    if (auroc_steps > 0) {
      const auto steps = static_cast<double>(auroc_steps);
      metrics.aurocs = SimilarityAurocs{auroc_sum.w / steps, auroc_sum.wp / steps, auroc_sum.wc / steps};
    }
    metrics.recall1_test = test_recall1(student, data);
    result.history.push_back(metrics);
    if (on_epoch) on_epoch(metrics, teacher, student);
  }
  result.teacher = std::move(teacher);
  result.student = std::move(student);
  return result;
}

}  // namespace stml
