#pragma once

// Hand-built unit-circle batches for the four relation cases between a focal
// pair (rows 0 and 1). All use kProbeK neighbors and the default bandwidth.
//   close_unshared:  near each other, but each sits on the edge of its own cluster
//   close_shared:    both inside one tight cluster
//   far_unshared:    in opposite clusters
//   far_shared:      far apart, bridged by a cluster both treat as neighbors

#include <cmath>
#include <vector>

#include "stml/matrix.hpp"
#include "stml/model.hpp"

namespace fixtures {

inline constexpr std::size_t kProbeK = 5;
inline constexpr double kProbeSigma = 3.0;

inline stml::EmbeddingBatch on_circle(const std::vector<double>& angles) {
  stml::EmbeddingBatch batch;
  batch.data.resize(static_cast<Eigen::Index>(angles.size()), 2);
  for (std::size_t i = 0; i < angles.size(); ++i) {
    batch.data(static_cast<Eigen::Index>(i), 0) = std::cos(angles[i]);
    batch.data(static_cast<Eigen::Index>(i), 1) = std::sin(angles[i]);
  }
  batch.role = stml::EmbeddingRole::teacher_g;
  batch.normalized = true;
  return batch;
}

inline stml::EmbeddingBatch close_unshared() {
  return on_circle({0.0, 0.3, -0.05, -0.1, -0.15, -0.2, 0.35, 0.4, 0.45, 0.5, 3.0, 3.05, 3.1, 3.15, 3.2});
}

inline stml::EmbeddingBatch close_shared() {
  return on_circle({0.0, 0.04, 0.01, 0.02, 0.03, 2.0, 2.05, 2.1, 2.15, 2.2, 4.0, 4.05, 4.1, 4.15, 4.2});
}

inline stml::EmbeddingBatch far_unshared() {
  return on_circle({0.0, 3.14, 0.05, 0.1, 0.15, 0.2, 3.19, 3.24, 3.29, 3.34, 1.6, 1.65, 1.7, 1.75, 1.8});
}

inline stml::EmbeddingBatch far_shared() {
  return on_circle({0.0, 1.6, 0.78, 0.8, 0.82, 3.5, 3.55, 3.6, 3.65, 3.7, 4.2, 4.25, 4.3, 4.35, 4.4});
}

}  // namespace fixtures
