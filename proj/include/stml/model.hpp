#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "stml/matrix.hpp"
#include "stml/rng.hpp"

namespace stml {

/// Layer sizes of the embedding network: d_in -> hidden... -> {f: d_f, g: d_g}.
struct ModelDims {
  std::size_t d_in = 16;
  std::vector<std::size_t> hidden{64};
  std::size_t d_f = 8;
  std::size_t d_g = 32;

  /// Throws ConfigError on a zero dimension or d_g <= d_f.
  void validate() const;
  std::size_t trunk_width() const { return hidden.empty() ? d_in : hidden.back(); }
  bool operator==(const ModelDims&) const = default;
};

/// Affine map y = W x + b, with W stored as (out x in).
struct Dense {
  Matrix weight;
  Vector bias;

  std::size_t in() const { return static_cast<std::size_t>(weight.cols()); }
  std::size_t out() const { return static_cast<std::size_t>(weight.rows()); }
  std::size_t size() const { return out() * in() + out(); }
  bool operator==(const Dense& other) const {
    return weight == other.weight && bias == other.bias;
  }
};

enum class ModelRole { teacher, student };

const char* to_string(ModelRole role);
ModelRole parse_role(const std::string& text);

/// Parameters of one network copy: tanh backbone plus affine heads.
///
/// The student carries both heads; the teacher has only the g head. Flat
/// layout is backbone layers in order, then f (student only), then g; each
/// layer contributes its weight row-major followed by its bias.
struct ModelParams {
  ModelDims dims;
  ModelRole role = ModelRole::student;
  std::vector<Dense> backbone;
  std::optional<Dense> head_f;
  Dense head_g;

  /// Zero-valued parameters of the given shape.
  static ModelParams zeros(const ModelDims& dims, ModelRole role);

  std::size_t parameter_count() const;
  std::vector<double> flatten() const;
  /// Inverse of flatten(); throws ShapeError if `flat` has the wrong length.
  static ModelParams unflatten(const ModelDims& dims, ModelRole role, std::span<const double> flat);

  bool operator==(const ModelParams&) const = default;
};

/// Per-parameter gradient; same layout as the student parameters.
using ParamGradient = ModelParams;

enum class EmbeddingRole { teacher_g, student_f, student_g };

struct EmbeddingBatch {
  Matrix data;
  EmbeddingRole role = EmbeddingRole::student_f;
  bool normalized = false;

  std::size_t size() const { return static_cast<std::size_t>(data.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(data.cols()); }
};

/// Activations kept by forward_student for the backward pass.
struct ForwardTrace {
  Matrix inputs;
  /// Post-tanh activation of every backbone layer.
  std::vector<Matrix> activations;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases.
/// The teacher is a copy of the student's backbone and g head.
std::pair<ModelParams, ModelParams> init_models(const ModelDims& dims, Rng& rng);

struct StudentOutput {
  EmbeddingBatch f;
  EmbeddingBatch g;
  ForwardTrace trace;
};

StudentOutput forward_student(const ModelParams& params, const Matrix& inputs);

/// Student f-head embeddings only (no trace).
EmbeddingBatch embed_f(const ModelParams& params, const Matrix& inputs);

/// g-head embeddings, rows L2-normalized. All-zero rows become e1.
EmbeddingBatch forward_teacher(const ModelParams& params, const Matrix& inputs);

/// Gradient of sum_n <grad_f, f> + <grad_g, g> with respect to every student parameter.
ParamGradient backward_student(const ModelParams& params, const ForwardTrace& trace,
                               const Matrix& grad_f, const Matrix& grad_g);

/// theta_t <- m * theta_t + (1 - m) * theta_s over backbone and g head.
void ema_update(ModelParams& teacher, const ModelParams& student, double momentum);

/// Teacher-shaped copy of the student (backbone and g head).
ModelParams teacher_view(const ModelParams& student);

}  // namespace stml
