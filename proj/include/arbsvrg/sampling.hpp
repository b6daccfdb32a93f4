#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "arbsvrg/dataset.hpp"
#include "arbsvrg/problem.hpp"

namespace arbsvrg {

using Rng = std::mt19937_64;

enum class SamplingKind { b_nice, single_element, partition, independent };

std::string to_string(SamplingKind kind);
SamplingKind sampling_kind_from_string(const std::string& name);

/// A proper sampling over [n] (every index has positive inclusion
/// probability). Immutable once built; draws take an external generator.
class SamplingScheme {
 public:
  /// Uniform over all subsets of size b.
  static SamplingScheme b_nice(std::size_t n, std::size_t b);
  /// Exactly one index, drawn with probabilities p (summing to 1).
  static SamplingScheme single_element(std::vector<double> probabilities);
  /// Exactly one block of a partition of [n], drawn with `block_probabilities`.
  static SamplingScheme partition(std::vector<std::vector<std::size_t>> blocks,
                                  std::vector<double> block_probabilities);
  /// Contiguous blocks of size b (the last may be shorter), P(B) = |B| / n.
  static SamplingScheme uniform_partition(std::size_t n, std::size_t b);
  /// Every index included independently with its own probability in (0, 1].
  static SamplingScheme independent(std::vector<double> probabilities);

  SamplingKind kind() const noexcept { return kind_; }
  std::size_t n() const noexcept { return n_; }
  /// Subset size for b-nice; expected subset size otherwise.
  double expected_batch_size() const noexcept { return expected_size_; }
  std::size_t batch_size() const noexcept { return batch_; }

  std::span<const double> inclusion_probabilities() const noexcept { return inclusion_; }
  double inclusion(std::size_t i) const { return inclusion_.at(i); }
  /// P(i in S and j in S); equals inclusion(i) when i == j.
  double pair_inclusion(std::size_t i, std::size_t j) const;

  /// Selection probabilities: per index (single element) or per block (partition).
  std::span<const double> selection_probabilities() const noexcept { return selection_; }
  const std::vector<std::vector<std::size_t>>& blocks() const noexcept { return blocks_; }

  std::string describe() const;

 private:
  SamplingScheme() = default;
  void finish();

  SamplingKind kind_ = SamplingKind::b_nice;
  std::size_t n_ = 0;
  std::size_t batch_ = 0;
  double expected_size_ = 0.0;
  std::vector<double> inclusion_;
  std::vector<double> selection_;
  std::vector<std::vector<std::size_t>> blocks_;
  std::vector<std::size_t> block_of_;
};

/// A drawn subset S with the sampling-vector weights v_i = 1 / p_i on S.
struct SampleRealization {
  std::vector<std::size_t> indices;
  std::vector<double> weights;

  std::size_t size() const noexcept { return indices.size(); }
  /// v as a dense length-n vector.
  Vector dense(std::size_t n) const;
};

/// Reusable draw state for one scheme; not shared between threads.
class Sampler {
 public:
  explicit Sampler(const SamplingScheme& scheme);

  /// Overwrites and returns the internal realization.
  const SampleRealization& draw(Rng& rng);

 private:
  const SamplingScheme* scheme_;
  SampleRealization current_;
  std::vector<std::size_t> permutation_;
  std::discrete_distribution<std::size_t> selector_;
  std::uniform_real_distribution<double> coin_{0.0, 1.0};
};

SampleRealization draw(const SamplingScheme& scheme, Rng& rng);

struct WeightedRealization {
  double probability = 0.0;
  SampleRealization realization;
};

/// The full law of the sampling. Throws ValidationError if the support has
/// more than `max_support` elements.
std::vector<WeightedRealization> enumerate_support(const SamplingScheme& scheme,
                                                   std::size_t max_support = 1'000'000);

/// Size of the support without building it (saturates at SIZE_MAX).
std::size_t support_size(const SamplingScheme& scheme);

/// Var(v) = E[(v - 1)(v - 1)^T] assembled from the closed-form inclusion and
/// pairwise-inclusion probabilities.
Eigen::MatrixXd variance_matrix(const SamplingScheme& scheme);

/// Closed-form largest eigenvalue of Var(v) for b-nice, partition and
/// independent samplings.
double variance_max_eigenvalue(const SamplingScheme& scheme);

/// Monte-Carlo estimate of E[v_i] for schemes too large to enumerate.
struct WeightMeanEstimate {
  Vector mean;
  Vector standard_error;
};
WeightMeanEstimate estimate_weight_means(const SamplingScheme& scheme, std::size_t draws,
                                         Rng& rng);

/// Per-block smoothness constants for partition schemes (smoothness of the
/// block sum), in block order. Empty for other kinds.
std::vector<double> partition_block_smoothness(const SamplingScheme& scheme,
                                               const LossModel& model);

/// Expected smoothness constant. Partition schemes need the per-block
/// constants from partition_block_smoothness.
double expected_smoothness(const SamplingScheme& scheme, const SmoothnessProfile& profile,
                           std::span<const double> block_smoothness = {});

/// Expected residual constant.
double expected_residual(const SamplingScheme& scheme, const SmoothnessProfile& profile,
                         std::span<const double> block_smoothness = {});

/// rho from the numerically computed top eigenvalue of Var(v):
/// lambda_max(Var(v)) L_max / n. Valid for every scheme.
double expected_residual_from_variance(const SamplingScheme& scheme,
                                       const SmoothnessProfile& profile);

struct ConstantPair {
  double expected_smoothness = 0.0;
  double expected_residual = 0.0;
};

ConstantPair sampling_constants(const SamplingScheme& scheme, const LossModel& model,
                                const SmoothnessProfile& profile);

/// grad f_v(x) = (1/n) sum_{i in S} v_i grad f_i(x).
Vector subsampled_gradient(const LossModel& model, const Vector& x, const SampleRealization& r);
/// out += scale * grad f_v(x)
void add_subsampled_gradient(const LossModel& model, const Vector& x, const SampleRealization& r,
                             double scale, Vector& out);

}  // namespace arbsvrg
