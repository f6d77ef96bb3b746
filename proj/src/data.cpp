#include "stml/data.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "stml/csv.hpp"
#include "stml/error.hpp"
#include "stml/rng.hpp"

namespace stml {

namespace {

Matrix random_orthogonal(std::size_t dim, Rng& rng) {
  const auto d = static_cast<Eigen::Index>(dim);
  Matrix gauss(d, d);
  for (Eigen::Index r = 0; r < d; ++r)
    for (Eigen::Index c = 0; c < d; ++c) gauss(r, c) = rng.normal();
  Eigen::HouseholderQR<Matrix> qr(gauss);
  Matrix q = qr.householderQ();
  // Sign convention so Q does not depend on the QR implementation's choice.
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index c = 0; c < d; ++c)
    if (r(c, c) < 0.0) q.col(c) = -q.col(c);
  return q;
}

std::vector<Split> derive_splits(const std::vector<int>& labels) {
  std::set<int> classes(labels.begin(), labels.end());
  std::vector<int> ordered(classes.begin(), classes.end());
  const std::size_t n_train = ordered.size() / 2;
  std::map<int, Split> by_class;
  for (std::size_t c = 0; c < ordered.size(); ++c) by_class[ordered[c]] = c < n_train ? Split::train : Split::test;
  std::vector<Split> splits;
  splits.reserve(labels.size());
  for (int label : labels) splits.push_back(by_class[label]);
  return splits;
}

}  // namespace

void GeneratorSpec::validate() const {
  if (num_classes < 4 || num_classes % 2 != 0) throw ConfigError("data.num_classes must be even and >= 4");
  if (samples_per_class < 2) throw ConfigError("data.samples_per_class must be >= 2");
  if (d_in == 0) throw ConfigError("data.d_in must be positive");
  if (!(class_separation > 0.0)) throw ConfigError("data.class_separation must be positive");
  if (!(intra_std > 0.0)) throw ConfigError("data.intra_std must be positive");
}

std::vector<std::size_t> LabeledDataset::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < splits.size(); ++i)
    if (splits[i] == split) out.push_back(i);
  return out;
}

LabeledDataset LabeledDataset::subset(Split split) const { return subset(indices(split)); }

LabeledDataset LabeledDataset::subset(const std::vector<std::size_t>& rows) const {
  LabeledDataset out;
  out.inputs.resize(static_cast<Eigen::Index>(rows.size()), inputs.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.inputs.row(static_cast<Eigen::Index>(r)) = inputs.row(static_cast<Eigen::Index>(rows[r]));
    out.labels.push_back(labels[rows[r]]);
    out.splits.push_back(splits[rows[r]]);
  }
  return out;
}

void LabeledDataset::validate() const {
  if (static_cast<std::size_t>(inputs.rows()) != labels.size() || splits.size() != labels.size())
    throw ShapeError("dataset rows, labels and splits differ in length");
  if (!inputs.allFinite()) throw ConfigError("dataset contains non-finite inputs");
  std::map<int, std::size_t> counts;
  std::map<int, Split> split_of;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ++counts[labels[i]];
    const auto [it, inserted] = split_of.emplace(labels[i], splits[i]);
    if (!inserted && it->second != splits[i])
      throw ConfigError("class " + std::to_string(labels[i]) + " appears in both splits");
  }
  for (const auto& [label, count] : counts)
    if (count < 2) throw ConfigError("class " + std::to_string(label) + " has fewer than 2 samples");
}

Warp Warp::random(std::size_t dim, std::uint64_t seed) {
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  Warp warp;
  warp.first_rotation = random_orthogonal(dim, rng);
  warp.stretch = Vector(static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < warp.stretch.size(); ++i) warp.stretch(i) = rng.uniform(0.5, 1.5);
  warp.second_rotation = random_orthogonal(dim, rng);
  return warp;
}

Matrix Warp::apply(const Matrix& points) const {
  Matrix u = points * first_rotation.transpose();
  for (Eigen::Index r = 0; r < u.rows(); ++r)
    for (Eigen::Index c = 0; c < u.cols(); ++c) {
      const double x = u(r, c);
      u(r, c) = x + stretch(c) * x * x * x;
    }
  return u * second_rotation.transpose();
}

LabeledDataset generate(const GeneratorSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const auto dim = static_cast<Eigen::Index>(spec.d_in);
  const std::size_t n = spec.num_classes * spec.samples_per_class;

  Matrix centers(static_cast<Eigen::Index>(spec.num_classes), dim);
  for (Eigen::Index c = 0; c < centers.rows(); ++c) {
    for (Eigen::Index j = 0; j < dim; ++j) centers(c, j) = rng.normal();
    double norm = centers.row(c).norm();
    while (norm == 0.0) {
      for (Eigen::Index j = 0; j < dim; ++j) centers(c, j) = rng.normal();
      norm = centers.row(c).norm();
    }
    centers.row(c) *= spec.class_separation / norm;
  }

  LabeledDataset data;
  data.inputs.resize(static_cast<Eigen::Index>(n), dim);
  data.labels.reserve(n);
  Eigen::Index row = 0;
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    for (std::size_t s = 0; s < spec.samples_per_class; ++s, ++row) {
      for (Eigen::Index j = 0; j < dim; ++j)
        data.inputs(row, j) = centers(static_cast<Eigen::Index>(c), j) + spec.intra_std * rng.normal();
      data.labels.push_back(static_cast<int>(c));
    }
  }
  if (spec.warp) data.inputs = Warp::random(spec.d_in, spec.seed).apply(data.inputs);
  data.splits = derive_splits(data.labels);
  return data;
}

Matrix class_equivalence(const std::vector<int>& labels) {
  const auto n = static_cast<Eigen::Index>(labels.size());
  Matrix eq(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      eq(i, j) = labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)] ? 1.0 : 0.0;
  return eq;
}

std::string dataset_header(std::size_t dim) {
  std::string header = "id,class";
  for (std::size_t j = 0; j < dim; ++j) header += ",x" + std::to_string(j);
  return header;
}

void save_dataset(const LabeledDataset& data, const std::filesystem::path& path) {
  std::string out = dataset_header(data.dim()) + "\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    out += std::to_string(i) + "," + std::to_string(data.labels[i]);
    for (Eigen::Index j = 0; j < data.inputs.cols(); ++j)
      out += "," + format_double(data.inputs(static_cast<Eigen::Index>(i), j));
    out += "\n";
  }
  write_file_atomic(path, out);
}

LabeledDataset load_dataset(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  auto lines = split(text, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw ParseError(path.string() + ": empty dataset file", 1);

  const auto header = split(lines[0], ',');
  if (header.size() < 3) throw ParseError("expected header '" + dataset_header(1) + "' (with x0..x{d-1})", 1);
  const std::size_t dim = header.size() - 2;
  if (trim(lines[0]) != dataset_header(dim))
    throw ParseError("expected header '" + dataset_header(dim) + "'", 1);

  LabeledDataset data;
  data.inputs.resize(static_cast<Eigen::Index>(lines.size() - 1), static_cast<Eigen::Index>(dim));
  for (std::size_t l = 1; l < lines.size(); ++l) {
    const std::size_t line_no = l + 1;
    const auto fields = split(lines[l], ',');
    if (fields.size() != dim + 2)
      throw ParseError("expected " + std::to_string(dim + 2) + " fields, got " + std::to_string(fields.size()),
                       line_no);
    if (parse_integer(fields[0], line_no) != static_cast<long long>(l - 1))
      throw ParseError("ids must run 0,1,2,... in order", line_no);
    data.labels.push_back(static_cast<int>(parse_integer(fields[1], line_no)));
    for (std::size_t j = 0; j < dim; ++j)
      data.inputs(static_cast<Eigen::Index>(l - 1), static_cast<Eigen::Index>(j)) =
          parse_double(fields[j + 2], line_no);
  }
  if (data.labels.empty()) throw ParseError(path.string() + ": dataset has no rows", 2);
  data.splits = derive_splits(data.labels);
  return data;
}

}  // namespace stml
