#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "stml/error.hpp"
#include "stml/similarity.hpp"

using namespace stml;

namespace {

EmbeddingBatch batch_of(const Matrix& rows) {
  EmbeddingBatch b;
  b.data = rows;
  b.role = EmbeddingRole::teacher_g;
  b.normalized = true;
  return b;
}

EmbeddingBatch line(std::initializer_list<double> xs) {
  Matrix m(static_cast<Eigen::Index>(xs.size()), 1);
  Eigen::Index r = 0;
  for (double x : xs) m(r++, 0) = x;
  return batch_of(m);
}

SimilarityMatrix matrix_of(const Matrix& values, SimilarityKind kind) {
  SimilarityMatrix s;
  s.values = values;
  s.kind = kind;
  return s;
}

bool symmetric(const Matrix& m, double tol = 1e-12) { return oracle::max_abs_diff(m, m.transpose()) <= tol; }

bool in_unit_interval(const Matrix& m) { return m.minCoeff() >= 0.0 && m.maxCoeff() <= 1.0; }

}  // namespace

TEST_CASE("pairwise kernel values") {
  Matrix z(3, 2);
  z << 1, 0, 0, 1, -1, 0;
  const auto w2 = pairwise_similarity(batch_of(z), 2.0);
  CHECK(w2.kind == SimilarityKind::pairwise);
  CHECK(w2.values(0, 1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  CHECK(w2.values(0, 1) == doctest::Approx(0.367879).epsilon(1e-6));
  const auto w4 = pairwise_similarity(batch_of(z), 4.0);
  CHECK(w4.values(0, 2) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  for (Eigen::Index i = 0; i < 3; ++i) CHECK(w4.values(i, i) == 1.0);
  CHECK(symmetric(w4.values, 0.0));
  CHECK_THROWS_AS(pairwise_similarity(batch_of(z), 0.0), ConfigError);
  CHECK_THROWS_AS(pairwise_similarity(batch_of(z), -1.0), ConfigError);
}

TEST_CASE("nearest neighbors and reciprocal sets") {
  SUBCASE("k = 1 keeps only the point itself") {
    Rng rng(2);
    const auto ns = nearest_neighbor_sets(batch_of(oracle::random_matrix(rng, 6, 3)), 1);
    for (std::size_t i = 0; i < ns.size(); ++i) {
      CHECK(ns.nn[i] == std::vector<std::size_t>{i});
      CHECK(ns.reciprocal[i] == std::vector<std::size_t>{i});
    }
  }
  SUBCASE("hand-enumerated points on a line") {
    const auto ns = nearest_neighbor_sets(line({0.0, 0.1, 0.25, 1.0}), 2);
    CHECK(ns.reciprocal[0] == std::vector<std::size_t>{0, 1});
    CHECK(ns.reciprocal[1] == std::vector<std::size_t>{0, 1});
    CHECK(ns.reciprocal[2] == std::vector<std::size_t>{2});
    CHECK(ns.reciprocal[3] == std::vector<std::size_t>{3});
  }
  SUBCASE("ties go to the lower index and duplicates still rank self first") {
    const auto ns = nearest_neighbor_sets(line({0.0, 1.0, -1.0, 0.0}), 3);
    CHECK(ns.nn[0] == std::vector<std::size_t>{0, 3, 1});
    CHECK(ns.nn[3] == std::vector<std::size_t>{3, 0, 1});
  }
  SUBCASE("k outside [1, n] is a configuration error") {
    CHECK_THROWS_AS(nearest_neighbor_sets(line({0.0, 1.0}), 3), ConfigError);
    CHECK_THROWS_AS(nearest_neighbor_sets(line({0.0, 1.0}), 0), ConfigError);
  }
  SUBCASE("agrees with full-row sorting on random batches") {
    Rng rng(31);
    for (int trial = 0; trial < 40; ++trial) {
      const auto n = static_cast<std::size_t>(2 + rng.below(31));
      const auto k = static_cast<std::size_t>(1 + rng.below(n));
      const Matrix z = oracle::random_matrix(rng, static_cast<Eigen::Index>(n), 3);
      const auto ns = nearest_neighbor_sets(batch_of(z), k);
      const auto nn = oracle::knn(z, k);
      CHECK(ns.nn == nn);
      CHECK(ns.reciprocal == oracle::reciprocal(nn));
      for (std::size_t i = 0; i < n; ++i) {
        CHECK(oracle::contains(ns.reciprocal[i], i));
        for (std::size_t j : ns.reciprocal[i]) {
          CHECK(oracle::contains(ns.nn[i], j));
          CHECK(oracle::contains(ns.reciprocal[j], i));
        }
      }
    }
  }
}

TEST_CASE("asymmetric Jaccard overlap") {
  NeighborSets ns;
  ns.k = 4;
  // i = 0, j = 1, a = 2, b = 3
  ns.nn = {{0, 1, 2, 3}, {1, 0, 2, 3}, {2, 0, 1, 3}, {3, 1, 2, 0}};
  ns.reciprocal = {{0, 1, 2}, {0, 1, 2, 3}, {0, 1, 2}, {1, 3}};
  const auto raw = contextual_raw(ns);
  CHECK(raw.kind == SimilarityKind::contextual_raw);
  CHECK(raw.values(0, 1) == 1.0);
  CHECK(raw.values(1, 0) == 0.75);
  CHECK(raw.values(0, 3) == 0.0);
  for (Eigen::Index i = 0; i < 4; ++i) CHECK(raw.values(i, i) == 1.0);
}

TEST_CASE("query expansion") {
  CHECK(expansion_size(1) == 1);
  CHECK(expansion_size(2) == 1);
  CHECK(expansion_size(3) == 1);
  CHECK(expansion_size(10) == 5);

  Rng rng(8);
  SUBCASE("k = 2 averages over the point alone") {
    const auto ns = nearest_neighbor_sets(batch_of(oracle::random_matrix(rng, 9, 2)), 2);
    const auto raw = contextual_raw(ns);
    CHECK(query_expand(raw, ns).values == raw.values);
  }
  SUBCASE("identical rows are a fixed point") {
    const auto ns = nearest_neighbor_sets(batch_of(oracle::random_matrix(rng, 6, 2)), 4);
    Matrix rows(6, 6);
    for (Eigen::Index i = 0; i < 6; ++i) rows.row(i) << 0.5, 0.25, 1.0, 0.0, 0.125, 0.75;
    const auto out = query_expand(matrix_of(rows, SimilarityKind::contextual_raw), ns);
    CHECK(oracle::max_abs_diff(out.values, rows) <= 1e-15);
  }
  SUBCASE("matches the triple loop") {
    for (int trial = 0; trial < 20; ++trial) {
      const auto n = static_cast<std::size_t>(3 + rng.below(12));
      const auto k = static_cast<std::size_t>(1 + rng.below(n));
      const Matrix z = oracle::random_matrix(rng, static_cast<Eigen::Index>(n), 2);
      const auto ns = nearest_neighbor_sets(batch_of(z), k);
      const auto raw = contextual_raw(ns);
      const Matrix expected = oracle::expand(raw.values, ns.nn, k);
      CHECK(oracle::max_abs_diff(query_expand(raw, ns).values, expected) <= 1e-12);
    }
  }
}

TEST_CASE("symmetrization and combination") {
  Matrix a(2, 2);
  a << 1, 1, 0, 1;
  const auto sym = symmetrize_contextual(matrix_of(a, SimilarityKind::contextual_expanded));
  CHECK(sym.values(0, 1) == 0.5);
  CHECK(sym.values(1, 0) == 0.5);
  CHECK(symmetrize_contextual(sym).values == sym.values);

  Matrix p(2, 2), c(2, 2);
  p << 1, 0.8, 0.8, 1;
  c << 1, 0.2, 0.2, 1;
  const auto w = contextualized_similarity(matrix_of(p, SimilarityKind::pairwise),
                                           matrix_of(c, SimilarityKind::contextual));
  CHECK(w.values(0, 1) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(w.values(0, 0) == 1.0);
  CHECK_THROWS_AS(contextualized_similarity(matrix_of(p, SimilarityKind::pairwise),
                                            matrix_of(Matrix::Ones(3, 3), SimilarityKind::contextual)),
                  ShapeError);
}

TEST_CASE("pipeline end cases") {
  SUBCASE("two identical points") {
    Matrix z(2, 2);
    z << 0.6, 0.8, 0.6, 0.8;
    const auto r2 = similarity_pipeline(batch_of(z), 2, 3.0);
    CHECK(r2.w.values == Matrix::Ones(2, 2));
    // With k = 1 each reciprocal set is the point alone, so only the kernel half survives.
    const auto r1 = similarity_pipeline(batch_of(z), 1, 3.0);
    CHECK(r1.wc.values(0, 1) == 0.0);
    CHECK(r1.w.values(0, 1) == 0.5);
  }
  SUBCASE("separated singletons with k = 1 keep half the kernel") {
    const auto r = similarity_pipeline(batch_of(oracle::normalize_rows(Matrix::Identity(4, 4))), 1, 3.0);
    for (Eigen::Index i = 0; i < 4; ++i)
      for (Eigen::Index j = 0; j < 4; ++j) {
        if (i == j) continue;
        CHECK(r.wc.values(i, j) == 0.0);
        CHECK(r.w.values(i, j) == doctest::Approx(r.wp.values(i, j) / 2).epsilon(1e-15));
      }
  }
}

TEST_CASE("pipeline matches the straight-line oracle and keeps its invariants") {
  Rng rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    const auto n = static_cast<std::size_t>(2 + rng.below(23));
    const auto k = static_cast<std::size_t>(1 + rng.below(n));
    const double sigma = rng.uniform(0.5, 4.0);
    const Matrix z = oracle::normalize_rows(oracle::random_matrix(rng, static_cast<Eigen::Index>(n), 4));
    const auto r = similarity_pipeline(batch_of(z), k, sigma);

    const auto nn = oracle::knn(z, k);
    const Matrix wp = oracle::pairwise(z, sigma);
    const Matrix wc = oracle::symmetrize(oracle::expand(oracle::jaccard(oracle::reciprocal(nn)), nn, k));
    const Matrix w = oracle::average(wp, wc);
    CHECK(oracle::max_abs_diff(r.wp.values, wp) <= 1e-12);
    CHECK(oracle::max_abs_diff(r.wc.values, wc) <= 1e-12);
    CHECK(oracle::max_abs_diff(r.w.values, w) <= 1e-12);

    CHECK(symmetric(r.w.values));
    CHECK(symmetric(r.wp.values));
    CHECK(symmetric(r.wc.values));
    CHECK(in_unit_interval(r.w.values));
    CHECK(in_unit_interval(r.wc.values));
    CHECK(r.wp.values.diagonal().isOnes(0.0));
    CHECK((r.w.values.array() >= r.wp.values.array().min(r.wc.values.array())).all());
    CHECK((r.w.values.array() <= r.wp.values.array().max(r.wc.values.array())).all());
  }
}

TEST_CASE("a duplicated shared neighbor does not shrink the overlap") {
  // Rows 0 and 1 share neighbor 2; adding a copy of 2 can only add shared members.
  const auto before = nearest_neighbor_sets(line({0.0, 0.2, 0.1, 5.0, 5.1, 5.2, 5.3}), 4);
  const auto after = nearest_neighbor_sets(line({0.0, 0.2, 0.1, 5.0, 5.1, 5.2, 5.3, 0.1}), 4);
  auto overlap = [](const NeighborSets& ns) {
    std::size_t shared = 0;
    for (std::size_t a : ns.reciprocal[0]) shared += oracle::contains(ns.reciprocal[1], a) ? 1 : 0;
    return shared;
  };
  CHECK(oracle::contains(before.reciprocal[0], 2));
  CHECK(oracle::contains(before.reciprocal[1], 2));
  CHECK(overlap(after) >= overlap(before));
}

TEST_CASE("four relation cases order the focal-pair similarity") {
  auto focal = [](const EmbeddingBatch& b) {
    return similarity_pipeline(b, fixtures::kProbeK, fixtures::kProbeSigma).w.values(0, 1);
  };
  const double a = focal(fixtures::close_unshared());
  const double b = focal(fixtures::close_shared());
  const double c = focal(fixtures::far_unshared());
  const double d = focal(fixtures::far_shared());
  CHECK(b > a);
  CHECK(a > c);
  CHECK(b > d);
  CHECK(d > c);
}
