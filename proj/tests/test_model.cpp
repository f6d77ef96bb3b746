#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "stml/error.hpp"
#include "stml/model.hpp"

using namespace stml;

namespace {

// Plain-loop forward pass of a tanh MLP with two affine heads.
std::pair<Matrix, Matrix> reference_forward(const ModelParams& p, const Matrix& x) {
  auto affine = [](const Dense& layer, const std::vector<double>& in) {
    std::vector<double> out(layer.out());
    for (std::size_t o = 0; o < layer.out(); ++o) {
      double s = layer.bias(static_cast<Eigen::Index>(o));
      for (std::size_t i = 0; i < layer.in(); ++i)
        s += layer.weight(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(i)) * in[i];
      out[o] = s;
    }
    return out;
  };
  Matrix f(x.rows(), static_cast<Eigen::Index>(p.dims.d_f));
  Matrix g(x.rows(), static_cast<Eigen::Index>(p.dims.d_g));
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    std::vector<double> h(x.row(r).data(), x.row(r).data() + x.cols());
    for (const Dense& layer : p.backbone) {
      h = affine(layer, h);
      for (double& v : h) v = std::tanh(v);
    }
    const auto fo = affine(*p.head_f, h);
    const auto go = affine(p.head_g, h);
    for (std::size_t c = 0; c < fo.size(); ++c) f(r, static_cast<Eigen::Index>(c)) = fo[c];
    for (std::size_t c = 0; c < go.size(); ++c) g(r, static_cast<Eigen::Index>(c)) = go[c];
  }
  return {f, g};
}

ModelDims small_dims() {
  ModelDims dims;
  dims.d_in = 5;
  dims.hidden = {7, 6};
  dims.d_f = 3;
  dims.d_g = 4;
  return dims;
}

}  // namespace

TEST_CASE("parameter count follows the layer shapes") {
  Rng rng(1);
  const auto [teacher, student] = init_models(ModelDims{}, rng);
  CHECK(student.parameter_count() == 16 * 64 + 64 + 64 * 8 + 8 + 64 * 32 + 32);
  CHECK(teacher.parameter_count() == 16 * 64 + 64 + 64 * 32 + 32);
  CHECK(student.flatten().size() == student.parameter_count());
}

TEST_CASE("teacher starts as an exact copy of the student backbone and g head") {
  Rng rng(3);
  const auto [teacher, student] = init_models(small_dims(), rng);
  CHECK(teacher.role == ModelRole::teacher);
  CHECK_FALSE(teacher.head_f.has_value());
  REQUIRE(teacher.backbone.size() == student.backbone.size());
  for (std::size_t l = 0; l < teacher.backbone.size(); ++l) CHECK(teacher.backbone[l] == student.backbone[l]);
  CHECK(teacher.head_g == student.head_g);
  CHECK(teacher == teacher_view(student));
}

TEST_CASE("initialization is reproducible and bounded by fan-in") {
  Rng a(11), b(11);
  const auto first = init_models(small_dims(), a);
  const auto second = init_models(small_dims(), b);
  CHECK(first.second == second.second);
  for (const Dense& layer : first.second.backbone) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in()));
    CHECK(layer.weight.cwiseAbs().maxCoeff() <= bound);
    CHECK(layer.bias.cwiseAbs().maxCoeff() <= bound);
  }
}

TEST_CASE("invalid dimensions are configuration errors") {
  Rng rng(1);
  ModelDims dims;
  dims.d_f = 0;
  CHECK_THROWS_AS(init_models(dims, rng), ConfigError);
  dims = ModelDims{};
  dims.d_g = dims.d_f;
  CHECK_THROWS_AS(init_models(dims, rng), ConfigError);
  dims = ModelDims{};
  dims.hidden = {64, 0};
  CHECK_THROWS_AS(init_models(dims, rng), ConfigError);
}

TEST_CASE("flatten and unflatten round-trip exactly") {
  Rng rng(5);
  const auto [teacher, student] = init_models(small_dims(), rng);
  const auto flat = student.flatten();
  const ModelParams back = ModelParams::unflatten(student.dims, ModelRole::student, flat);
  CHECK(back == student);
  CHECK(back.flatten() == flat);
  const ModelParams tback = ModelParams::unflatten(teacher.dims, ModelRole::teacher, teacher.flatten());
  CHECK(tback == teacher);

  std::vector<double> short_flat(flat.begin(), flat.end() - 1);
  CHECK_THROWS_AS(ModelParams::unflatten(student.dims, ModelRole::student, short_flat), ShapeError);
}

TEST_CASE("flat layout is backbone, then f, then g, weights row-major before bias") {
  ModelDims dims;
  dims.d_in = 2;
  dims.hidden = {2};
  dims.d_f = 1;
  dims.d_g = 2;
  std::vector<double> flat(dims.d_in * 2 + 2 + 2 * 1 + 1 + 2 * 2 + 2);
  for (std::size_t i = 0; i < flat.size(); ++i) flat[i] = static_cast<double>(i);
  const ModelParams p = ModelParams::unflatten(dims, ModelRole::student, flat);
  CHECK(p.backbone[0].weight(0, 1) == 1.0);
  CHECK(p.backbone[0].weight(1, 0) == 2.0);
  CHECK(p.backbone[0].bias(1) == 5.0);
  CHECK(p.head_f->weight(0, 1) == 7.0);
  CHECK(p.head_f->bias(0) == 8.0);
  CHECK(p.head_g.weight(1, 0) == 11.0);
  CHECK(p.head_g.bias(1) == 14.0);
}

TEST_CASE("forward pass") {
  SUBCASE("zero parameters give zero embeddings") {
    const ModelParams p = ModelParams::zeros(small_dims(), ModelRole::student);
    Rng rng(2);
    const auto out = forward_student(p, oracle::random_matrix(rng, 4, 5));
    CHECK(out.f.data.isZero(0.0));
    CHECK(out.g.data.isZero(0.0));
    CHECK(out.f.role == EmbeddingRole::student_f);
    CHECK(out.g.role == EmbeddingRole::student_g);
  }
  SUBCASE("no hidden layers reduces f to an affine map") {
    ModelDims dims;
    dims.d_in = 3;
    dims.hidden = {};
    dims.d_f = 2;
    dims.d_g = 3;
    Rng rng(4);
    auto [teacher, student] = init_models(dims, rng);
    const Matrix x = oracle::random_matrix(rng, 5, 3);
    const auto out = forward_student(student, x);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const Vector expected = student.head_f->weight * x.row(r).transpose() + student.head_f->bias;
      CHECK(oracle::max_abs_diff(out.f.data.row(r), expected.transpose()) <= 1e-15);
    }
  }
  SUBCASE("matches a plain-loop reimplementation") {
    Rng rng(9);
    const auto [teacher, student] = init_models(small_dims(), rng);
    const Matrix x = oracle::random_matrix(rng, 6, 5);
    const auto out = forward_student(student, x);
    const auto [f, g] = reference_forward(student, x);
    CHECK(oracle::max_abs_diff(out.f.data, f) <= 1e-12);
    CHECK(oracle::max_abs_diff(out.g.data, g) <= 1e-12);
    CHECK(oracle::max_abs_diff(embed_f(student, x).data, f) <= 1e-12);
  }
  SUBCASE("wrong input width is a shape error") {
    Rng rng(1);
    const auto [teacher, student] = init_models(small_dims(), rng);
    CHECK_THROWS_AS(forward_student(student, Matrix::Zero(2, 4)), ShapeError);
    CHECK_THROWS_AS(forward_teacher(teacher, Matrix::Zero(2, 6)), ShapeError);
  }
}

TEST_CASE("teacher embeddings are unit rows") {
  Rng rng(21);
  const auto [teacher, student] = init_models(small_dims(), rng);
  const auto out = forward_teacher(teacher, oracle::random_matrix(rng, 10, 5, 3.0));
  CHECK(out.normalized);
  CHECK(out.role == EmbeddingRole::teacher_g);
  for (Eigen::Index r = 0; r < out.data.rows(); ++r) CHECK(std::abs(out.data.row(r).norm() - 1.0) <= 1e-9);

  SUBCASE("identity layer leaves unit rows alone") {
    ModelDims dims;
    dims.d_in = 3;
    dims.hidden = {};
    dims.d_f = 2;
    dims.d_g = 3;
    ModelParams id = ModelParams::zeros(dims, ModelRole::teacher);
    id.head_g.weight = Matrix::Identity(3, 3);
    Matrix x(1, 3);
    x << 0.6, 0.0, -0.8;
    CHECK(forward_teacher(id, x).data == x);
    // A zero row has no direction; it is mapped to the first basis vector.
    const Matrix zero = Matrix::Zero(1, 3);
    const Matrix out_zero = forward_teacher(id, zero).data;
    CHECK(out_zero(0, 0) == 1.0);
    CHECK(out_zero(0, 1) == 0.0);
    CHECK(out_zero(0, 2) == 0.0);
  }
}

TEST_CASE("backward pass") {
  Rng rng(13);
  const auto [teacher, student] = init_models(small_dims(), rng);
  const Matrix x = oracle::random_matrix(rng, 4, 5);
  const auto out = forward_student(student, x);

  SUBCASE("zero upstream gradient gives zero parameter gradient") {
    const ParamGradient grad = backward_student(student, out.trace, Matrix::Zero(4, 3), Matrix::Zero(4, 4));
    for (double v : grad.flatten()) CHECK(v == 0.0);
  }

  SUBCASE("affine head gradient is grad_f transposed times the input") {
    ModelDims dims;
    dims.d_in = 3;
    dims.hidden = {};
    dims.d_f = 2;
    dims.d_g = 3;
    auto [t, s] = init_models(dims, rng);
    const Matrix xs = oracle::random_matrix(rng, 5, 3);
    const Matrix gf = oracle::random_matrix(rng, 5, 2);
    const auto trace = forward_student(s, xs).trace;
    const ParamGradient grad = backward_student(s, trace, gf, Matrix::Zero(5, 3));
    const Matrix expected = gf.transpose() * xs;
    CHECK(oracle::max_abs_diff(grad.head_f->weight, expected) <= 1e-14);
    CHECK(grad.head_g.weight.isZero(0.0));
  }

  SUBCASE("matches central finite differences") {
    const Matrix gf = oracle::random_matrix(rng, 4, 3);
    const Matrix gg = oracle::random_matrix(rng, 4, 4);
    const ParamGradient grad = backward_student(student, out.trace, gf, gg);
    const auto analytic = grad.flatten();
    auto theta = student.flatten();
    const double h = 1e-6;
    auto objective = [&](const std::vector<double>& flat) {
      const ModelParams p = ModelParams::unflatten(student.dims, ModelRole::student, flat);
      const auto o = forward_student(p, x);
      return (o.f.data.cwiseProduct(gf)).sum() + (o.g.data.cwiseProduct(gg)).sum();
    };
    double worst = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double keep = theta[i];
      theta[i] = keep + h;
      const double up = objective(theta);
      theta[i] = keep - h;
      const double down = objective(theta);
      theta[i] = keep;
      const double numeric = (up - down) / (2 * h);
      const double scale = std::max({std::abs(numeric), std::abs(analytic[i]), 1e-3});
      worst = std::max(worst, std::abs(numeric - analytic[i]) / scale);
    }
    CHECK(worst <= 1e-5);
  }

  SUBCASE("gradient shape mismatch is a shape error") {
    CHECK_THROWS_AS(backward_student(student, out.trace, Matrix::Zero(4, 2), Matrix::Zero(4, 4)), ShapeError);
    CHECK_THROWS_AS(backward_student(student, out.trace, Matrix::Zero(3, 3), Matrix::Zero(4, 4)), ShapeError);
  }
}

TEST_CASE("EMA update") {
  Rng rng(17);
  auto [teacher, student] = init_models(small_dims(), rng);
  auto moved = student.flatten();
  for (double& v : moved) v += rng.normal();
  student = ModelParams::unflatten(student.dims, ModelRole::student, moved);

  SUBCASE("m = 1 leaves the teacher untouched") {
    const ModelParams before = teacher;
    ema_update(teacher, student, 1.0);
    CHECK(teacher == before);
  }
  SUBCASE("m = 0 copies the student backbone and g head") {
    ema_update(teacher, student, 0.0);
    CHECK(teacher == teacher_view(student));
  }
  SUBCASE("interior momentum is the convex combination") {
    const auto before = teacher.flatten();
    const auto target = teacher_view(student).flatten();
    const double m = 0.999;
    ema_update(teacher, student, m);
    const auto after = teacher.flatten();
    double worst = 0.0;
    for (std::size_t i = 0; i < after.size(); ++i) {
      const double expected = m * before[i] + (1.0 - m) * target[i];
      worst = std::max(worst, std::abs(after[i] - expected) / std::max(std::abs(expected), 1e-300));
    }
    CHECK(worst <= 1e-15);
  }
  SUBCASE("scalar example") {
    ModelDims dims;
    dims.d_in = 1;
    dims.hidden = {};
    dims.d_f = 1;
    dims.d_g = 2;
    ModelParams t = ModelParams::zeros(dims, ModelRole::teacher);
    ModelParams s = ModelParams::zeros(dims, ModelRole::student);
    t.head_g.weight(0, 0) = 1.0;
    ema_update(t, s, 0.999);
    CHECK(t.head_g.weight(0, 0) == 0.999);
  }
  SUBCASE("momentum outside [0, 1] is rejected") {
    CHECK_THROWS_AS(ema_update(teacher, student, 1.5), ConfigError);
    CHECK_THROWS_AS(ema_update(teacher, student, -0.1), ConfigError);
  }
}
