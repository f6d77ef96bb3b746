#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "stml/matrix.hpp"

namespace stml {

enum class Split { train, test };

struct GeneratorSpec {
  std::size_t num_classes = 16;
  std::size_t samples_per_class = 50;
  std::size_t d_in = 16;
  double class_separation = 4.0;
  double intra_std = 1.0;
  bool warp = true;
  std::uint64_t seed = 7;

  void validate() const;
  bool operator==(const GeneratorSpec&) const = default;
};

/// Samples with class ids. The first half of the classes (by id) form the
/// train split and the second half the test split.
struct LabeledDataset {
  Matrix inputs;
  std::vector<int> labels;
  std::vector<Split> splits;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(inputs.cols()); }

  std::vector<std::size_t> indices(Split split) const;
  /// Rows of one split, in dataset order, with their labels.
  LabeledDataset subset(Split split) const;
  LabeledDataset subset(const std::vector<std::size_t>& rows) const;

  /// Throws ConfigError if splits share a class, a class has < 2 samples, or an input is non-finite.
  void validate() const;

  bool operator==(const LabeledDataset&) const = default;
};

/// Gaussian classes around centers on a sphere, optionally pushed through a
/// fixed random smooth invertible warp.
LabeledDataset generate(const GeneratorSpec& spec);

/// The invertible warp applied by generate(); exposed for tests.
///
/// Built from the generator seed: orthogonal mixing, a per-coordinate cubic
/// stretch u + a u^3 (strictly monotone), then a second orthogonal mixing.
struct Warp {
  Matrix first_rotation;
  Vector stretch;
  Matrix second_rotation;

  static Warp random(std::size_t dim, std::uint64_t seed);
  Matrix apply(const Matrix& points) const;
};

/// 1 iff labels agree, as doubles.
Matrix class_equivalence(const std::vector<int>& labels);

/// CSV with header `id,class,x0,...`; floats use 17 significant digits.
/// Splits are not stored: they are re-derived from the class ids on load.
void save_dataset(const LabeledDataset& data, const std::filesystem::path& path);
LabeledDataset load_dataset(const std::filesystem::path& path);

std::string dataset_header(std::size_t dim);

}  // namespace stml
