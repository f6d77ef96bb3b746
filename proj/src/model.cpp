#include "stml/model.hpp"

#include <cmath>
#include <string>

#include "stml/error.hpp"

namespace stml {

namespace {

Dense zero_dense(std::size_t in, std::size_t out) {
  return Dense{Matrix::Zero(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in)),
               Vector::Zero(static_cast<Eigen::Index>(out))};
}

Dense uniform_dense(std::size_t in, std::size_t out, Rng& rng) {
  Dense layer = zero_dense(in, out);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
    for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = rng.uniform(-bound, bound);
  for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = rng.uniform(-bound, bound);
  return layer;
}

// Y = X W^T + 1 b^T
Matrix affine(const Matrix& x, const Dense& layer) {
  Matrix y = x * layer.weight.transpose();
  y.rowwise() += layer.bias.transpose();
  return y;
}

void check_input(const ModelParams& params, const Matrix& inputs) {
  if (static_cast<std::size_t>(inputs.cols()) != params.dims.d_in) {
    throw ShapeError("input width " + std::to_string(inputs.cols()) + " != d_in " +
                     std::to_string(params.dims.d_in));
  }
}

Matrix run_backbone(const ModelParams& params, const Matrix& inputs, std::vector<Matrix>* keep) {
  Matrix h = inputs;
  for (const Dense& layer : params.backbone) {
    h = affine(h, layer).array().tanh().matrix();
    if (keep) keep->push_back(h);
  }
  return h;
}

template <typename Fn>
void for_each_layer(const ModelParams& p, Fn&& fn) {
  for (const Dense& layer : p.backbone) fn(layer);
  if (p.head_f) fn(*p.head_f);
  fn(p.head_g);
}

template <typename Fn>
void for_each_layer(ModelParams& p, Fn&& fn) {
  for (Dense& layer : p.backbone) fn(layer);
  if (p.head_f) fn(*p.head_f);
  fn(p.head_g);
}

}  // namespace

void ModelDims::validate() const {
  if (d_in == 0) throw ConfigError("model.d_in must be positive");
  for (std::size_t h : hidden)
    if (h == 0) throw ConfigError("model.hidden sizes must be positive");
  if (d_f == 0) throw ConfigError("model.d_f must be positive");
  if (d_g == 0) throw ConfigError("model.d_g must be positive");
  if (d_g <= d_f) throw ConfigError("model.d_g must exceed model.d_f");
}

const char* to_string(ModelRole role) { return role == ModelRole::teacher ? "teacher" : "student"; }

ModelRole parse_role(const std::string& text) {
  if (text == "teacher") return ModelRole::teacher;
  if (text == "student") return ModelRole::student;
  throw ParseError("unknown model role '" + text + "'");
}

ModelParams ModelParams::zeros(const ModelDims& dims, ModelRole role) {
  dims.validate();
  ModelParams p;
  p.dims = dims;
  p.role = role;
  std::size_t width = dims.d_in;
  for (std::size_t h : dims.hidden) {
    p.backbone.push_back(zero_dense(width, h));
    width = h;
  }
  if (role == ModelRole::student) p.head_f = zero_dense(width, dims.d_f);
  p.head_g = zero_dense(width, dims.d_g);
  return p;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for_each_layer(*this, [&](const Dense& layer) { n += layer.size(); });
  return n;
}

std::vector<double> ModelParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for_each_layer(*this, [&](const Dense& layer) {
    flat.insert(flat.end(), layer.weight.data(), layer.weight.data() + layer.weight.size());
    flat.insert(flat.end(), layer.bias.data(), layer.bias.data() + layer.bias.size());
  });
  return flat;
}

ModelParams ModelParams::unflatten(const ModelDims& dims, ModelRole role, std::span<const double> flat) {
  ModelParams p = zeros(dims, role);
  if (flat.size() != p.parameter_count()) {
    throw ShapeError("flat parameter vector has " + std::to_string(flat.size()) + " entries, expected " +
                     std::to_string(p.parameter_count()));
  }
  std::size_t offset = 0;
  for_each_layer(p, [&](Dense& layer) {
    std::copy_n(flat.begin() + offset, layer.weight.size(), layer.weight.data());
    offset += static_cast<std::size_t>(layer.weight.size());
    std::copy_n(flat.begin() + offset, layer.bias.size(), layer.bias.data());
    offset += static_cast<std::size_t>(layer.bias.size());
  });
  return p;
}

std::pair<ModelParams, ModelParams> init_models(const ModelDims& dims, Rng& rng) {
  dims.validate();
  ModelParams student;
  student.dims = dims;
  student.role = ModelRole::student;
  std::size_t width = dims.d_in;
  for (std::size_t h : dims.hidden) {
    student.backbone.push_back(uniform_dense(width, h, rng));
    width = h;
  }
  student.head_f = uniform_dense(width, dims.d_f, rng);
  student.head_g = uniform_dense(width, dims.d_g, rng);
  return {teacher_view(student), student};
}

ModelParams teacher_view(const ModelParams& student) {
  ModelParams teacher;
  teacher.dims = student.dims;
  teacher.role = ModelRole::teacher;
  teacher.backbone = student.backbone;
  teacher.head_g = student.head_g;
  return teacher;
}

StudentOutput forward_student(const ModelParams& params, const Matrix& inputs) {
  check_input(params, inputs);
  if (!params.head_f) throw ShapeError("forward_student needs a model with an f head");
  StudentOutput out;
  out.trace.inputs = inputs;
  const Matrix h = run_backbone(params, inputs, &out.trace.activations);
  out.f = EmbeddingBatch{affine(h, *params.head_f), EmbeddingRole::student_f, false};
  out.g = EmbeddingBatch{affine(h, params.head_g), EmbeddingRole::student_g, false};
  return out;
}

EmbeddingBatch embed_f(const ModelParams& params, const Matrix& inputs) {
  check_input(params, inputs);
  if (!params.head_f) throw ShapeError("embed_f needs a model with an f head");
  return EmbeddingBatch{affine(run_backbone(params, inputs, nullptr), *params.head_f),
                        EmbeddingRole::student_f, false};
}

EmbeddingBatch forward_teacher(const ModelParams& params, const Matrix& inputs) {
  check_input(params, inputs);
  Matrix z = affine(run_backbone(params, inputs, nullptr), params.head_g);
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double norm = z.row(i).norm();
    if (norm == 0.0) {
      z.row(i).setZero();
      z(i, 0) = 1.0;
    } else {
      z.row(i) /= norm;
    }
  }
  return EmbeddingBatch{std::move(z), EmbeddingRole::teacher_g, true};
}

ParamGradient backward_student(const ModelParams& params, const ForwardTrace& trace,
                               const Matrix& grad_f, const Matrix& grad_g) {
  if (!params.head_f) throw ShapeError("backward_student needs a student model");
  const Eigen::Index n = trace.inputs.rows();
  if (grad_f.rows() != n || static_cast<std::size_t>(grad_f.cols()) != params.dims.d_f)
    throw ShapeError("grad_f shape does not match the f embeddings");
  if (grad_g.rows() != n || static_cast<std::size_t>(grad_g.cols()) != params.dims.d_g)
    throw ShapeError("grad_g shape does not match the g embeddings");
  if (trace.activations.size() != params.backbone.size())
    throw ShapeError("trace does not match the backbone depth");

  ParamGradient grad = ModelParams::zeros(params.dims, ModelRole::student);
  const Matrix& trunk = trace.activations.empty() ? trace.inputs : trace.activations.back();

  grad.head_f->weight = grad_f.transpose() * trunk;
  grad.head_f->bias = grad_f.colwise().sum().transpose();
  grad.head_g.weight = grad_g.transpose() * trunk;
  grad.head_g.bias = grad_g.colwise().sum().transpose();

  // Both heads feed the same trunk activation.
  Matrix upstream = grad_f * params.head_f->weight + grad_g * params.head_g.weight;
  for (std::size_t l = params.backbone.size(); l-- > 0;) {
    const Matrix& out = trace.activations[l];
    const Matrix& in = l == 0 ? trace.inputs : trace.activations[l - 1];
    const Matrix pre_grad = (upstream.array() * (1.0 - out.array().square())).matrix();
    grad.backbone[l].weight = pre_grad.transpose() * in;
    grad.backbone[l].bias = pre_grad.colwise().sum().transpose();
    if (l > 0) upstream = pre_grad * params.backbone[l].weight;
  }
  return grad;
}

void ema_update(ModelParams& teacher, const ModelParams& student, double momentum) {
  if (teacher.dims != student.dims) throw ShapeError("teacher and student dimensions differ");
  if (!(momentum >= 0.0 && momentum <= 1.0)) throw ConfigError("EMA momentum must lie in [0, 1]");
  const double keep = momentum;
  const double take = 1.0 - momentum;
  auto blend = [&](Dense& t, const Dense& s) {
    t.weight = keep * t.weight + take * s.weight;
    t.bias = keep * t.bias + take * s.bias;
  };
  for (std::size_t l = 0; l < teacher.backbone.size(); ++l) blend(teacher.backbone[l], student.backbone[l]);
  blend(teacher.head_g, student.head_g);
}

}  // namespace stml
