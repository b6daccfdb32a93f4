#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace arbsvrg {

using Vector = Eigen::VectorXd;
using DenseRows = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor>;

enum class TaskKind { regression, classification };

/// One nonzero feature of a row; `index` is 0-based in memory.
struct Feature {
  std::size_t index;
  double value;
};

/// Immutable design matrix plus labels.
///
/// Rows are held sparse as (index, value) pairs unless more than half of the
/// entries are nonzero, in which case a dense row-major block is used. All
/// numerical access goes through the row primitives below so callers never
/// branch on the storage.
class Dataset {
 public:
  enum class Storage { dense, sparse };

  /// Builds from per-row features; picks the storage from the density.
  /// Throws ValidationError on empty input, out-of-range indices or
  /// non-finite values.
  static Dataset from_rows(std::string name, std::size_t dim,
                           const std::vector<std::vector<Feature>>& rows,
                           std::vector<double> labels);

  static Dataset from_dense(std::string name, DenseRows rows, Vector labels);

  std::size_t n() const noexcept { return static_cast<std::size_t>(labels_.size()); }
  std::size_t d() const noexcept { return dim_; }
  const std::string& name() const noexcept { return name_; }
  Storage storage() const noexcept { return storage_; }
  const Vector& labels() const noexcept { return labels_; }
  double label(std::size_t i) const { return labels_[static_cast<Eigen::Index>(i)]; }

  double row_dot(std::size_t i, const Vector& x) const;
  /// out += scale * a_i
  void add_row(std::size_t i, double scale, Vector& out) const;
  double row_squared_norm(std::size_t i) const;
  /// Nonzero entries of row i (for dense storage, the nonzero coordinates).
  std::vector<Feature> row_features(std::size_t i) const;

  /// out = A x
  void multiply(const Vector& x, Vector& out) const;
  /// out = A^T r
  void multiply_transpose(const Vector& r, Vector& out) const;

  double value(std::size_t i, std::size_t j) const;

  /// Dense copy, convenient for small problems and tests.
  DenseRows to_dense() const;

  /// Same content, labels and dimension; storage kind is ignored.
  friend bool operator==(const Dataset& a, const Dataset& b);

 private:
  Dataset() = default;

  std::string name_;
  std::size_t dim_ = 0;
  Storage storage_ = Storage::dense;
  DenseRows dense_;
  SparseRows sparse_;
  Vector labels_;
};

struct ParseOptions {
  /// Overrides d = max index (needed when trailing features are absent).
  std::optional<std::size_t> dimension;
  /// Map {0,1} and {1,2} label sets onto {-1,+1}.
  bool remap_binary_labels = true;
};

/// Reads `<label> <idx>:<val> ...` lines with 1-based, strictly increasing
/// indices. `#` starts a comment. Throws ParseError with the line number.
Dataset parse_libsvm(const std::filesystem::path& path, const ParseOptions& options = {});
Dataset parse_libsvm_text(const std::string& text, std::string name,
                          const ParseOptions& options = {});

/// Writes with 17 significant digits so parsing the output reproduces the
/// doubles exactly.
std::string to_libsvm_text(const Dataset& ds);
void write_libsvm(const Dataset& ds, const std::filesystem::path& path);

struct SyntheticSpec {
  std::size_t n = 1000;
  std::size_t d = 50;
  std::uint64_t seed = 1;
  TaskKind kind = TaskKind::regression;
  double noise = 0.0;
};

/// Gaussian rows and hidden Gaussian weights. Regression labels are
/// <a_i, x_true> + noise * xi_i; classification labels are the sign of the
/// margin, flipped with probability `noise`.
Dataset generate_synthetic(const SyntheticSpec& spec);

/// Divides every nonzero column by its Euclidean norm.
Dataset scale_columns(const Dataset& ds);

}  // namespace arbsvrg
