#include "arbsvrg/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "arbsvrg/errors.hpp"

namespace arbsvrg {
namespace {

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

constexpr std::size_t kSaturated = std::numeric_limits<std::size_t>::max();

std::size_t binomial_saturating(std::size_t n, std::size_t k) {
  k = std::min(k, n - k);
  // C(n, k) built as a product of exact intermediate binomials.
  unsigned __int128 acc = 1;
  for (std::size_t i = 1; i <= k; ++i) {
    acc = acc * (n - k + i) / i;
    if (acc > kSaturated) return kSaturated;
  }
  return static_cast<std::size_t>(acc);
}

void check_probability_vector(const std::vector<double>& p, const char* what) {
  if (p.empty()) throw ValidationError(std::string(what) + ": empty probability vector");
  double sum = 0.0;
  for (double v : p) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ValidationError(std::string(what) + ": probabilities must be > 0 (proper sampling)");
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ValidationError(std::string(what) + ": probabilities must sum to 1");
  }
}

}  // namespace

std::string to_string(SamplingKind kind) {
  switch (kind) {
    case SamplingKind::b_nice: return "b_nice";
    case SamplingKind::single_element: return "single_element";
    case SamplingKind::partition: return "partition";
    case SamplingKind::independent: return "independent";
  }
  return "unknown";
}

SamplingKind sampling_kind_from_string(const std::string& name) {
  if (name == "b_nice" || name == "b-nice") return SamplingKind::b_nice;
  if (name == "single_element" || name == "single-element" || name == "importance") {
    return SamplingKind::single_element;
  }
  if (name == "partition") return SamplingKind::partition;
  if (name == "independent") return SamplingKind::independent;
  throw ValidationError("unknown sampling kind '" + name + "'");
}

SamplingScheme SamplingScheme::b_nice(std::size_t n, std::size_t b) {
  if (n == 0) throw ValidationError("sampling needs n >= 1");
  if (b < 1 || b > n) throw ValidationError("b-nice sampling needs 1 <= b <= n");
  SamplingScheme s;
  s.kind_ = SamplingKind::b_nice;
  s.n_ = n;
  s.batch_ = b;
  s.inclusion_.assign(n, static_cast<double>(b) / static_cast<double>(n));
  s.finish();
  return s;
}

SamplingScheme SamplingScheme::single_element(std::vector<double> probabilities) {
  check_probability_vector(probabilities, "single-element sampling");
  SamplingScheme s;
  s.kind_ = SamplingKind::single_element;
  s.n_ = probabilities.size();
  s.batch_ = 1;
  s.inclusion_ = probabilities;
  s.selection_ = std::move(probabilities);
  s.finish();
  return s;
}

SamplingScheme SamplingScheme::partition(std::vector<std::vector<std::size_t>> blocks,
                                         std::vector<double> block_probabilities) {
  if (blocks.empty()) throw ValidationError("partition sampling needs at least one block");
  if (blocks.size() != block_probabilities.size()) {
    throw ValidationError("partition sampling: one probability per block required");
  }
  check_probability_vector(block_probabilities, "partition sampling");
  std::size_t n = 0;
  for (const auto& b : blocks) {
    if (b.empty()) throw ValidationError("partition sampling: empty block");
    n += b.size();
  }
  SamplingScheme s;
  s.kind_ = SamplingKind::partition;
  s.n_ = n;
  s.block_of_.assign(n, kSaturated);
  s.inclusion_.assign(n, 0.0);
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    for (std::size_t i : blocks[k]) {
      if (i >= n || s.block_of_[i] != kSaturated) {
        throw ValidationError("partition sampling: blocks must partition {0..n-1}");
      }
      s.block_of_[i] = k;
      s.inclusion_[i] = block_probabilities[k];
    }
  }
  s.batch_ = blocks.front().size();
  s.blocks_ = std::move(blocks);
  s.selection_ = std::move(block_probabilities);
  s.finish();
  return s;
}

SamplingScheme SamplingScheme::uniform_partition(std::size_t n, std::size_t b) {
  if (n == 0 || b < 1 || b > n) throw ValidationError("uniform partition needs 1 <= b <= n");
  std::vector<std::vector<std::size_t>> blocks;
  std::vector<double> probs;
  for (std::size_t start = 0; start < n; start += b) {
    const std::size_t stop = std::min(n, start + b);
    std::vector<std::size_t> block(stop - start);
    std::iota(block.begin(), block.end(), start);
    probs.push_back(static_cast<double>(block.size()) / static_cast<double>(n));
    blocks.push_back(std::move(block));
  }
  return partition(std::move(blocks), std::move(probs));
}

SamplingScheme SamplingScheme::independent(std::vector<double> probabilities) {
  if (probabilities.empty()) throw ValidationError("independent sampling needs n >= 1");
  for (double p : probabilities) {
    if (!(p > 0.0 && p <= 1.0)) {
      throw ValidationError("independent sampling: probabilities must lie in (0, 1]");
    }
  }
  SamplingScheme s;
  s.kind_ = SamplingKind::independent;
  s.n_ = probabilities.size();
  s.inclusion_ = std::move(probabilities);
  s.finish();
  s.batch_ = static_cast<std::size_t>(std::llround(s.expected_size_));
  return s;
}

void SamplingScheme::finish() {
  expected_size_ = std::accumulate(inclusion_.begin(), inclusion_.end(), 0.0);
  if (kind_ == SamplingKind::b_nice) expected_size_ = static_cast<double>(batch_);
}

double SamplingScheme::pair_inclusion(std::size_t i, std::size_t j) const {
  if (i >= n_ || j >= n_) throw std::out_of_range("pair_inclusion index");
  if (i == j) return inclusion_[i];
  switch (kind_) {
    case SamplingKind::b_nice: {
      const double n = static_cast<double>(n_);
      const double b = static_cast<double>(batch_);
      return b * (b - 1.0) / (n * (n - 1.0));
    }
    case SamplingKind::independent: return inclusion_[i] * inclusion_[j];
    case SamplingKind::partition:
      return block_of_[i] == block_of_[j] ? selection_[block_of_[i]] : 0.0;
    case SamplingKind::single_element: return 0.0;
  }
  return 0.0;
}

std::string SamplingScheme::describe() const {
  std::ostringstream out;
  out << to_string(kind_) << "(n=" << n_;
  if (kind_ == SamplingKind::b_nice || kind_ == SamplingKind::partition) out << ", b=" << batch_;
  if (kind_ == SamplingKind::independent) out << ", E|S|=" << expected_size_;
  if (kind_ == SamplingKind::partition) out << ", blocks=" << blocks_.size();
  out << ")";
  return out.str();
}

Vector SampleRealization::dense(std::size_t n) const {
  Vector v = Vector::Zero(idx(n));
  for (std::size_t k = 0; k < indices.size(); ++k) v[idx(indices[k])] = weights[k];
  return v;
}

Sampler::Sampler(const SamplingScheme& scheme) : scheme_(&scheme) {
  switch (scheme.kind()) {
    case SamplingKind::b_nice:
      permutation_.resize(scheme.n());
      std::iota(permutation_.begin(), permutation_.end(), std::size_t{0});
      current_.indices.reserve(scheme.batch_size());
      break;
    case SamplingKind::single_element:
    case SamplingKind::partition: {
      const auto sel = scheme.selection_probabilities();
      selector_ = std::discrete_distribution<std::size_t>(sel.begin(), sel.end());
      break;
    }
    case SamplingKind::independent:
      current_.indices.reserve(scheme.n());
      break;
  }
}

const SampleRealization& Sampler::draw(Rng& rng) {
  const SamplingScheme& s = *scheme_;
  current_.indices.clear();
  current_.weights.clear();
  switch (s.kind()) {
    case SamplingKind::b_nice: {
      const std::size_t n = s.n();
      const std::size_t b = s.batch_size();
      // Partial Fisher-Yates: the first b slots of any permutation become a
      // uniform b-subset, so the buffer never needs resetting.
      if (b < n) {
        for (std::size_t k = 0; k < b; ++k) {
          std::uniform_int_distribution<std::size_t> pick(k, n - 1);
          std::swap(permutation_[k], permutation_[pick(rng)]);
        }
        current_.indices.assign(permutation_.begin(), permutation_.begin() + static_cast<std::ptrdiff_t>(b));
      } else {
        current_.indices.resize(n);
        std::iota(current_.indices.begin(), current_.indices.end(), std::size_t{0});
      }
      const double w = static_cast<double>(n) / static_cast<double>(b);
      current_.weights.assign(current_.indices.size(), w);
      break;
    }
    case SamplingKind::single_element: {
      const std::size_t i = selector_(rng);
      current_.indices.push_back(i);
      current_.weights.push_back(1.0 / s.inclusion(i));
      break;
    }
    case SamplingKind::partition: {
      const std::size_t k = selector_(rng);
      const double w = 1.0 / s.selection_probabilities()[k];
      current_.indices = s.blocks()[k];
      current_.weights.assign(current_.indices.size(), w);
      break;
    }
    case SamplingKind::independent: {
      for (std::size_t i = 0; i < s.n(); ++i) {
        const double p = s.inclusion(i);
        if (coin_(rng) < p) {
          current_.indices.push_back(i);
          current_.weights.push_back(1.0 / p);
        }
      }
      break;
    }
  }
  return current_;
}

SampleRealization draw(const SamplingScheme& scheme, Rng& rng) {
  Sampler sampler(scheme);
  return sampler.draw(rng);
}

std::size_t support_size(const SamplingScheme& scheme) {
  switch (scheme.kind()) {
    case SamplingKind::b_nice: return binomial_saturating(scheme.n(), scheme.batch_size());
    case SamplingKind::single_element: return scheme.n();
    case SamplingKind::partition: return scheme.blocks().size();
    case SamplingKind::independent: {
      std::size_t random_coins = 0;
      for (double p : scheme.inclusion_probabilities()) random_coins += (p < 1.0) ? 1 : 0;
      if (random_coins >= 63) return kSaturated;
      return std::size_t{1} << random_coins;
    }
  }
  return kSaturated;
}

std::vector<WeightedRealization> enumerate_support(const SamplingScheme& scheme,
                                                   std::size_t max_support) {
  const std::size_t size = support_size(scheme);
  if (size > max_support) {
    throw ValidationError("sampling support has " +
                          (size == kSaturated ? std::string("too many") : std::to_string(size)) +
                          " elements, above the enumeration limit of " +
                          std::to_string(max_support));
  }
  std::vector<WeightedRealization> out;
  out.reserve(size);
  const std::size_t n = scheme.n();
  switch (scheme.kind()) {
    case SamplingKind::b_nice: {
      const std::size_t b = scheme.batch_size();
      const double prob = 1.0 / static_cast<double>(size);
      const double w = static_cast<double>(n) / static_cast<double>(b);
      std::vector<std::size_t> combo(b);
      std::iota(combo.begin(), combo.end(), std::size_t{0});
      while (true) {
        out.push_back({prob, {combo, std::vector<double>(b, w)}});
        // next combination in lexicographic order
        std::size_t k = b;
        while (k > 0 && combo[k - 1] == n - b + k - 1) --k;
        if (k == 0) break;
        ++combo[k - 1];
        for (std::size_t j = k; j < b; ++j) combo[j] = combo[j - 1] + 1;
      }
      break;
    }
    case SamplingKind::single_element:
      for (std::size_t i = 0; i < n; ++i) {
        const double p = scheme.inclusion(i);
        out.push_back({p, {{i}, {1.0 / p}}});
      }
      break;
    case SamplingKind::partition:
      for (std::size_t k = 0; k < scheme.blocks().size(); ++k) {
        const double p = scheme.selection_probabilities()[k];
        const auto& block = scheme.blocks()[k];
        out.push_back({p, {block, std::vector<double>(block.size(), 1.0 / p)}});
      }
      break;
    case SamplingKind::independent: {
      std::vector<std::size_t> random_coins;
      std::vector<std::size_t> always;
      for (std::size_t i = 0; i < n; ++i) {
        (scheme.inclusion(i) < 1.0 ? random_coins : always).push_back(i);
      }
      for (std::size_t mask = 0; mask < size; ++mask) {
        WeightedRealization wr;
        wr.probability = 1.0;
        std::vector<bool> chosen(n, false);
        for (std::size_t i : always) chosen[i] = true;
        for (std::size_t bit = 0; bit < random_coins.size(); ++bit) {
          const std::size_t i = random_coins[bit];
          const double p = scheme.inclusion(i);
          if ((mask >> bit) & 1U) {
            chosen[i] = true;
            wr.probability *= p;
          } else {
            wr.probability *= 1.0 - p;
          }
        }
        for (std::size_t i = 0; i < n; ++i) {
          if (chosen[i]) {
            wr.realization.indices.push_back(i);
            wr.realization.weights.push_back(1.0 / scheme.inclusion(i));
          }
        }
        out.push_back(std::move(wr));
      }
      break;
    }
  }
  return out;
}

Eigen::MatrixXd variance_matrix(const SamplingScheme& scheme) {
  const std::size_t n = scheme.n();
  Eigen::MatrixXd var(idx(n), idx(n));
  for (std::size_t i = 0; i < n; ++i) {
    const double pi = scheme.inclusion(i);
    var(idx(i), idx(i)) = 1.0 / pi - 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = scheme.pair_inclusion(i, j) / (pi * scheme.inclusion(j)) - 1.0;
      var(idx(i), idx(j)) = v;
      var(idx(j), idx(i)) = v;
    }
  }
  return var;
}

double variance_max_eigenvalue(const SamplingScheme& scheme) {
  const double n = static_cast<double>(scheme.n());
  switch (scheme.kind()) {
    case SamplingKind::b_nice: {
      const double b = static_cast<double>(scheme.batch_size());
      if (scheme.batch_size() == scheme.n()) return 0.0;
      return n * (n - b) / (b * (n - 1.0));
    }
    case SamplingKind::partition: {
      // Var(v) = blockdiag(J_B / p_B) - 1 1^T. Both terms act on the span of
      // the block indicators, so the spectrum reduces to the K x K matrix
      // diag(|B| / p_B) - c c^T with c_B = sqrt(|B|); the rest is zero.
      const auto k = static_cast<Eigen::Index>(scheme.blocks().size());
      if (k == 1) return 0.0;
      Vector c(k);
      Eigen::MatrixXd reduced = Eigen::MatrixXd::Zero(k, k);
      for (Eigen::Index j = 0; j < k; ++j) {
        const double size = static_cast<double>(scheme.blocks()[static_cast<std::size_t>(j)].size());
        c[j] = std::sqrt(size);
        reduced(j, j) = size / scheme.selection_probabilities()[static_cast<std::size_t>(j)];
      }
      reduced -= c * c.transpose();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(reduced, Eigen::EigenvaluesOnly);
      return std::max(0.0, solver.eigenvalues().maxCoeff());
    }
    case SamplingKind::independent: {
      const auto p = scheme.inclusion_probabilities();
      return 1.0 / *std::min_element(p.begin(), p.end()) - 1.0;
    }
    case SamplingKind::single_element: {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(variance_matrix(scheme),
                                                            Eigen::EigenvaluesOnly);
      return solver.eigenvalues().maxCoeff();
    }
  }
  return 0.0;
}

WeightMeanEstimate estimate_weight_means(const SamplingScheme& scheme, std::size_t draws,
                                         Rng& rng) {
  if (draws < 2) throw ValidationError("Monte-Carlo estimate needs at least 2 draws");
  const std::size_t n = scheme.n();
  Vector sum = Vector::Zero(idx(n));
  Vector sum_sq = Vector::Zero(idx(n));
  Sampler sampler(scheme);
  for (std::size_t t = 0; t < draws; ++t) {
    const auto& r = sampler.draw(rng);
    for (std::size_t k = 0; k < r.size(); ++k) {
      sum[idx(r.indices[k])] += r.weights[k];
      sum_sq[idx(r.indices[k])] += r.weights[k] * r.weights[k];
    }
  }
  const double m = static_cast<double>(draws);
  WeightMeanEstimate est;
  est.mean = sum / m;
  est.standard_error.resize(idx(n));
  for (Eigen::Index i = 0; i < est.mean.size(); ++i) {
    const double var = std::max(0.0, (sum_sq[i] - m * est.mean[i] * est.mean[i]) / (m - 1.0));
    est.standard_error[i] = std::sqrt(var / m);
  }
  return est;
}

std::vector<double> partition_block_smoothness(const SamplingScheme& scheme,
                                               const LossModel& model) {
  std::vector<double> out;
  if (scheme.kind() != SamplingKind::partition) return out;
  if (scheme.n() != model.n()) throw ValidationError("sampling and model sizes differ");
  out.reserve(scheme.blocks().size());
  for (const auto& block : scheme.blocks()) out.push_back(block_smoothness(model, block));
  return out;
}

double expected_smoothness(const SamplingScheme& scheme, const SmoothnessProfile& profile,
                           std::span<const double> block_smoothness) {
  if (scheme.n() != profile.n) throw ValidationError("sampling and profile sizes differ");
  const double n = static_cast<double>(scheme.n());
  const double l_max = profile.max_smoothness;
  const double l = profile.smoothness;
  const auto& li = profile.example_smoothness;
  switch (scheme.kind()) {
    case SamplingKind::b_nice: {
      const std::size_t b_count = scheme.batch_size();
      if (b_count == scheme.n()) return l;
      const double b = static_cast<double>(b_count);
      return ((n - b) / (n - 1.0)) / b * l_max + (n / b) * ((b - 1.0) / (n - 1.0)) * l;
    }
    case SamplingKind::single_element: {
      double top = 0.0;
      for (std::size_t i = 0; i < scheme.n(); ++i) {
        const double l_i = li.empty() ? l_max : li[i];
        top = std::max(top, l_i / scheme.inclusion(i));
      }
      return top / n;
    }
    case SamplingKind::partition: {
      if (block_smoothness.size() != scheme.blocks().size()) {
        throw ValidationError("partition sampling needs one smoothness constant per block");
      }
      double top = 0.0;
      for (std::size_t k = 0; k < block_smoothness.size(); ++k) {
        top = std::max(top, block_smoothness[k] / scheme.selection_probabilities()[k]);
      }
      return top / n;
    }
    case SamplingKind::independent: {
      double top = 0.0;
      for (std::size_t i = 0; i < scheme.n(); ++i) {
        const double p = scheme.inclusion(i);
        const double l_i = li.empty() ? l_max : li[i];
        top = std::max(top, (1.0 - p) / p * l_i / n);
      }
      return l + top;
    }
  }
  return 0.0;
}

double expected_residual(const SamplingScheme& scheme, const SmoothnessProfile& profile,
                         std::span<const double> block_smoothness) {
  if (scheme.n() != profile.n) throw ValidationError("sampling and profile sizes differ");
  const double n = static_cast<double>(scheme.n());
  const double l_max = profile.max_smoothness;
  switch (scheme.kind()) {
    case SamplingKind::b_nice: {
      if (scheme.batch_size() == scheme.n()) return 0.0;
      const double b = static_cast<double>(scheme.batch_size());
      return ((n - b) / (n - 1.0)) / b * l_max;
    }
    case SamplingKind::partition:
    case SamplingKind::independent:
      return variance_max_eigenvalue(scheme) / n * l_max;
    case SamplingKind::single_element:
      return expected_smoothness(scheme, profile, block_smoothness);
  }
  return 0.0;
}

double expected_residual_from_variance(const SamplingScheme& scheme,
                                       const SmoothnessProfile& profile) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(variance_matrix(scheme),
                                                        Eigen::EigenvaluesOnly);
  const double top = std::max(0.0, solver.eigenvalues().maxCoeff());
  return top / static_cast<double>(scheme.n()) * profile.max_smoothness;
}

ConstantPair sampling_constants(const SamplingScheme& scheme, const LossModel& model,
                                const SmoothnessProfile& profile) {
  const auto blocks = partition_block_smoothness(scheme, model);
  return {expected_smoothness(scheme, profile, blocks),
          expected_residual(scheme, profile, blocks)};
}

void add_subsampled_gradient(const LossModel& model, const Vector& x, const SampleRealization& r,
                             double scale, Vector& out) {
  const double inv_n = scale / static_cast<double>(model.n());
  for (std::size_t k = 0; k < r.size(); ++k) {
    model.add_gradient_i(x, r.indices[k], r.weights[k] * inv_n, out);
  }
}

Vector subsampled_gradient(const LossModel& model, const Vector& x, const SampleRealization& r) {
  Vector out = Vector::Zero(idx(model.d()));
  add_subsampled_gradient(model, x, r, 1.0, out);
  return out;
}

}  // namespace arbsvrg
