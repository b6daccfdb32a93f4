#include "arbsvrg/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string_view>

#include "arbsvrg/errors.hpp"

namespace arbsvrg {
namespace {

constexpr double kDenseThreshold = 0.5;

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw ValidationError(std::string("non-finite ") + what);
  }
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

bool parse_double(std::string_view token, double& out) {
  // from_chars rejects a leading '+', which LIBSVM files use for labels.
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  const auto* end = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(token.data(), end, out);
  return ec == std::errc() && ptr == end;
}

bool parse_index(std::string_view token, std::size_t& out) {
  const auto* end = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(token.data(), end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace

Dataset Dataset::from_rows(std::string name, std::size_t dim,
                           const std::vector<std::vector<Feature>>& rows,
                           std::vector<double> labels) {
  if (rows.empty()) throw ValidationError("dataset has no rows");
  if (dim == 0) throw ValidationError("dataset dimension must be >= 1");
  if (rows.size() != labels.size()) {
    throw ValidationError("row count and label count differ");
  }
  std::size_t nnz = 0;
  for (const auto& row : rows) {
    for (const auto& f : row) {
      if (f.index >= dim) throw ValidationError("feature index out of range");
      check_finite(f.value, "feature value");
    }
    nnz += row.size();
  }
  for (double y : labels) check_finite(y, "label");

  Dataset ds;
  ds.name_ = std::move(name);
  ds.dim_ = dim;
  ds.labels_ = Eigen::Map<const Vector>(labels.data(), idx(labels.size()));
  const double density =
      static_cast<double>(nnz) / (static_cast<double>(rows.size()) * static_cast<double>(dim));
  if (density > kDenseThreshold) {
    ds.storage_ = Storage::dense;
    ds.dense_ = DenseRows::Zero(idx(rows.size()), idx(dim));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (const auto& f : rows[i]) ds.dense_(idx(i), idx(f.index)) = f.value;
    }
  } else {
    ds.storage_ = Storage::sparse;
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(nnz);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (const auto& f : rows[i]) triplets.emplace_back(idx(i), idx(f.index), f.value);
    }
    ds.sparse_.resize(idx(rows.size()), idx(dim));
    ds.sparse_.setFromTriplets(triplets.begin(), triplets.end());
    ds.sparse_.makeCompressed();
  }
  return ds;
}

Dataset Dataset::from_dense(std::string name, DenseRows rows, Vector labels) {
  if (rows.rows() == 0 || rows.cols() == 0) throw ValidationError("dataset is empty");
  if (rows.rows() != labels.size()) throw ValidationError("row count and label count differ");
  if (!rows.allFinite()) throw ValidationError("non-finite feature value");
  if (!labels.allFinite()) throw ValidationError("non-finite label");
  Dataset ds;
  ds.name_ = std::move(name);
  ds.dim_ = static_cast<std::size_t>(rows.cols());
  ds.storage_ = Storage::dense;
  ds.dense_ = std::move(rows);
  ds.labels_ = std::move(labels);
  return ds;
}

double Dataset::row_dot(std::size_t i, const Vector& x) const {
  if (storage_ == Storage::dense) return dense_.row(idx(i)).dot(x);
  double s = 0.0;
  for (SparseRows::InnerIterator it(sparse_, idx(i)); it; ++it) s += it.value() * x[it.index()];
  return s;
}

void Dataset::add_row(std::size_t i, double scale, Vector& out) const {
  if (storage_ == Storage::dense) {
    out.noalias() += scale * dense_.row(idx(i)).transpose();
    return;
  }
  for (SparseRows::InnerIterator it(sparse_, idx(i)); it; ++it) out[it.index()] += scale * it.value();
}

double Dataset::row_squared_norm(std::size_t i) const {
  if (storage_ == Storage::dense) return dense_.row(idx(i)).squaredNorm();
  double s = 0.0;
  for (SparseRows::InnerIterator it(sparse_, idx(i)); it; ++it) s += it.value() * it.value();
  return s;
}

std::vector<Feature> Dataset::row_features(std::size_t i) const {
  std::vector<Feature> out;
  if (storage_ == Storage::dense) {
    for (Eigen::Index j = 0; j < dense_.cols(); ++j) {
      const double v = dense_(idx(i), j);
      if (v != 0.0) out.push_back({static_cast<std::size_t>(j), v});
    }
    return out;
  }
  for (SparseRows::InnerIterator it(sparse_, idx(i)); it; ++it) {
    if (it.value() != 0.0) out.push_back({static_cast<std::size_t>(it.index()), it.value()});
  }
  return out;
}

void Dataset::multiply(const Vector& x, Vector& out) const {
  if (storage_ == Storage::dense) {
    out.noalias() = dense_ * x;
  } else {
    out.noalias() = sparse_ * x;
  }
}

void Dataset::multiply_transpose(const Vector& r, Vector& out) const {
  if (storage_ == Storage::dense) {
    out.noalias() = dense_.transpose() * r;
  } else {
    out.noalias() = sparse_.transpose() * r;
  }
}

double Dataset::value(std::size_t i, std::size_t j) const {
  if (storage_ == Storage::dense) return dense_(idx(i), idx(j));
  return sparse_.coeff(idx(i), idx(j));
}

DenseRows Dataset::to_dense() const {
  if (storage_ == Storage::dense) return dense_;
  return DenseRows(sparse_);
}

bool operator==(const Dataset& a, const Dataset& b) {
  if (a.dim_ != b.dim_ || a.n() != b.n()) return false;
  if (a.labels_ != b.labels_) return false;
  for (std::size_t i = 0; i < a.n(); ++i) {
    const auto ra = a.row_features(i);
    const auto rb = b.row_features(i);
    if (ra.size() != rb.size()) return false;
    for (std::size_t k = 0; k < ra.size(); ++k) {
      if (ra[k].index != rb[k].index || ra[k].value != rb[k].value) return false;
    }
  }
  return true;
}

Dataset parse_libsvm_text(const std::string& text, std::string name, const ParseOptions& options) {
  std::vector<std::vector<Feature>> rows;
  std::vector<double> labels;
  std::size_t max_index = 0;

  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line(raw);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    std::vector<std::string_view> tokens;
    std::size_t pos = 0;
    while (pos < line.size()) {
      const auto start = line.find_first_not_of(" \t", pos);
      if (start == std::string_view::npos) break;
      auto stop = line.find_first_of(" \t", start);
      if (stop == std::string_view::npos) stop = line.size();
      tokens.push_back(line.substr(start, stop - start));
      pos = stop;
    }

    double label = 0.0;
    if (!parse_double(tokens.front(), label) || !std::isfinite(label)) {
      throw ParseError(line_no, "non-numeric label '" + std::string(tokens.front()) + "'");
    }
    std::vector<Feature> row;
    std::size_t previous = 0;
    for (std::size_t k = 1; k < tokens.size(); ++k) {
      const auto tok = tokens[k];
      const auto colon = tok.find(':');
      if (colon == std::string_view::npos) {
        throw ParseError(line_no, "expected idx:val, got '" + std::string(tok) + "'");
      }
      std::size_t index = 0;
      double value = 0.0;
      if (!parse_index(tok.substr(0, colon), index) || index == 0) {
        throw ParseError(line_no, "bad feature index in '" + std::string(tok) + "'");
      }
      if (!parse_double(tok.substr(colon + 1), value) || !std::isfinite(value)) {
        throw ParseError(line_no, "non-numeric feature value in '" + std::string(tok) + "'");
      }
      if (index <= previous) {
        throw ParseError(line_no, "feature indices must be strictly increasing");
      }
      previous = index;
      max_index = std::max(max_index, index);
      row.push_back({index - 1, value});
    }
    rows.push_back(std::move(row));
    labels.push_back(label);
  }
  if (rows.empty()) throw ParseError(line_no, "no data lines in '" + name + "'");

  std::size_t dim = max_index;
  if (options.dimension) {
    if (*options.dimension < max_index) {
      throw ValidationError("dimension override " + std::to_string(*options.dimension) +
                            " is smaller than the largest feature index " +
                            std::to_string(max_index));
    }
    dim = *options.dimension;
  }
  if (dim == 0) throw ParseError(line_no, "no features in '" + name + "'");

  if (options.remap_binary_labels) {
    const std::set<double> distinct(labels.begin(), labels.end());
    const auto within = [&](std::initializer_list<double> allowed) {
      return std::all_of(distinct.begin(), distinct.end(), [&](double y) {
        return std::find(allowed.begin(), allowed.end(), y) != allowed.end();
      });
    };
    if (within({-1.0, 1.0})) {
      // already canonical
    } else if (within({0.0, 1.0})) {
      for (double& y : labels) y = (y == 0.0) ? -1.0 : 1.0;
    } else if (within({1.0, 2.0})) {
      for (double& y : labels) y = (y == 1.0) ? -1.0 : 1.0;
    }
  }
  return Dataset::from_rows(std::move(name), dim, rows, std::move(labels));
}

Dataset parse_libsvm(const std::filesystem::path& path, const ParseOptions& options) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open dataset file '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_libsvm_text(buffer.str(), path.stem().string(), options);
}

std::string to_libsvm_text(const Dataset& ds) {
  std::string out;
  char buf[64];
  for (std::size_t i = 0; i < ds.n(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", ds.label(i));
    out += buf;
    for (const auto& f : ds.row_features(i)) {
      std::snprintf(buf, sizeof buf, " %zu:%.17g", f.index + 1, f.value);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

void write_libsvm(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  out << to_libsvm_text(ds);
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.n == 0 || spec.d == 0) throw ValidationError("synthetic data needs n, d >= 1");
  if (!(spec.noise >= 0.0)) throw ValidationError("noise must be >= 0");
  if (spec.kind == TaskKind::classification && spec.noise > 1.0) {
    throw ValidationError("classification noise is a flip probability in [0, 1]");
  }
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Vector x_true(idx(spec.d));
  for (auto& v : x_true) v = gauss(rng);
  DenseRows rows(idx(spec.n), idx(spec.d));
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    for (Eigen::Index j = 0; j < rows.cols(); ++j) rows(i, j) = gauss(rng);
  }
  Vector margins = rows * x_true;
  Vector labels(idx(spec.n));
  if (spec.kind == TaskKind::regression) {
    for (Eigen::Index i = 0; i < labels.size(); ++i) {
      const double xi = gauss(rng);
      labels[i] = spec.noise == 0.0 ? margins[i] : margins[i] + spec.noise * xi;
    }
  } else {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (Eigen::Index i = 0; i < labels.size(); ++i) {
      double y = margins[i] >= 0.0 ? 1.0 : -1.0;
      if (unif(rng) < spec.noise) y = -y;
      labels[i] = y;
    }
  }
  char name[96];
  std::snprintf(name, sizeof name, "synthetic-%s-n%zu-d%zu-s%llu",
                spec.kind == TaskKind::regression ? "regression" : "classification", spec.n,
                spec.d, static_cast<unsigned long long>(spec.seed));
  return Dataset::from_dense(name, std::move(rows), std::move(labels));
}

Dataset scale_columns(const Dataset& ds) {
  std::vector<double> sq(ds.d(), 0.0);
  std::vector<std::vector<Feature>> rows(ds.n());
  for (std::size_t i = 0; i < ds.n(); ++i) {
    rows[i] = ds.row_features(i);
    for (const auto& f : rows[i]) sq[f.index] += f.value * f.value;
  }
  std::vector<double> norms(ds.d(), 1.0);
  for (std::size_t j = 0; j < ds.d(); ++j) {
    const double norm = std::sqrt(sq[j]);
    // Columns already at unit norm are left alone so scaling is idempotent.
    if (norm > 0.0 && std::abs(norm - 1.0) > 1e-12) norms[j] = norm;
  }
  for (auto& row : rows) {
    for (auto& f : row) f.value /= norms[f.index];
  }
  std::vector<double> labels(ds.labels().data(), ds.labels().data() + ds.labels().size());
  return Dataset::from_rows(ds.name(), ds.d(), rows, std::move(labels));
}

}  // namespace arbsvrg
