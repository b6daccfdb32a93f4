#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "arbsvrg/problem.hpp"
#include "arbsvrg/sampling.hpp"

namespace arbsvrg {

/// Known minimizer used to report suboptimality and distances.
struct Reference {
  Vector x;
  double value = 0.0;
};

struct TraceRecord {
  std::uint64_t grad_evals = 0;  // cumulative individual grad f_i evaluations
  double epoch_equiv = 0.0;      // grad_evals / n
  double wall_s = 0.0;
  double objective = 0.0;        // f at the tracked iterate
  double suboptimality = 0.0;    // f - f*, NaN without a reference
  std::optional<double> dist_sq;
  std::optional<double> lyapunov;
};

struct RunMetadata {
  std::string algorithm;
  std::string sampling;
  std::uint64_t seed = 0;
  std::map<std::string, double> parameters;
};

struct RunTrace {
  std::vector<TraceRecord> records;
  Vector final_iterate;
  RunMetadata metadata;
  /// alpha_0 .. alpha_K for L-SVRG-D when step-size recording is on.
  std::vector<double> step_sizes;
};

/// How Free-SVRG picks the next reference point from the inner iterates.
enum class ReferencePointRule {
  weighted_average,  // w_s = sum_t p_t x_s^t
  sampled_iterate,   // w_s = x_s^t with probability p_t
};

struct FreeSvrgConfig {
  std::size_t m = 1;
  double alpha = 0.0;
  SamplingScheme scheme = SamplingScheme::b_nice(1, 1);
  std::size_t outer_iters = 1;
  std::uint64_t seed = 0;
  /// Strong convexity used by the averaging weights.
  double strong_convexity = 0.0;
  /// When set, traces carry the Lyapunov value |x - x*|^2 + 8 a^2 rho S_m (f(w) - f*).
  std::optional<double> expected_residual;
  ReferencePointRule reference_rule = ReferencePointRule::weighted_average;
};

struct LSvrgDConfig {
  double p = 1.0;
  double alpha = 0.0;
  SamplingScheme scheme = SamplingScheme::b_nice(1, 1);
  std::size_t total_iters = 1;
  std::uint64_t seed = 0;
  /// When set, traces carry |x - x*|^2 + 8 a_k^2 L / (p (3 - 2p)) (f(w) - f*).
  std::optional<double> expected_smoothness;
  /// Iterations between trace records; 0 means round(n / E|S|).
  std::size_t record_every = 0;
  bool record_step_sizes = false;
};

struct SvrgConfig {
  std::size_t m = 1;
  double alpha = 0.0;
  SamplingScheme scheme = SamplingScheme::b_nice(1, 1);
  std::size_t outer_iters = 1;
  std::uint64_t seed = 0;
};

/// Geometric averaging weights S_m = sum_i (1 - a mu)^(m-1-i) and
/// p_t = (1 - a mu)^(m-1-t) / S_m. Requires 0 <= alpha * mu < 1.
struct InnerWeights {
  double normalizer = 0.0;
  std::vector<double> weights;
};
InnerWeights inner_weights(double alpha, double mu, std::size_t m);

/// grad f_v(x) - grad f_v(w) + grad f(w), sharing the realization between
/// both subsampled terms. Costs 2|S| individual gradients.
Vector variance_reduced_gradient(const LossModel& model, const Vector& x, const Vector& w,
                                 const Vector& grad_f_w, const SampleRealization& r);
void variance_reduced_gradient_into(const LossModel& model, const Vector& x, const Vector& w,
                                    const Vector& grad_f_w, const SampleRealization& r,
                                    Vector& out);

/// Free-SVRG: inner loops continue from the last inner iterate and the
/// reference point is the geometrically weighted average of the loop's
/// iterates. One trace record per outer loop plus the starting point.
RunTrace run_free_svrg(const LossModel& model, const FreeSvrgConfig& cfg, const Vector& x0,
                       const std::optional<Reference>& reference = std::nullopt);

/// Loopless SVRG with decreasing step sizes: each step tosses a p-coin that
/// either resets (w, alpha_k) to (x^k, alpha) or shrinks alpha_k by sqrt(1 - p).
RunTrace run_lsvrg_d(const LossModel& model, const LSvrgDConfig& cfg, const Vector& x0,
                     const std::optional<Reference>& reference = std::nullopt);

/// Classic SVRG: every inner loop restarts from the reference point, which is
/// then replaced by the plain average of the m inner iterates.
RunTrace run_reference_svrg(const LossModel& model, const SvrgConfig& cfg, const Vector& x0,
                            const std::optional<Reference>& reference = std::nullopt);

/// Step-size process of L-SVRG-D in isolation: alpha after `resets` coin
/// outcomes. After j consecutive non-resets alpha_k = alpha (1 - p)^(j/2).
class DecreasingStepSize {
 public:
  DecreasingStepSize(double alpha, double p);

  double current() const noexcept { return current_; }
  std::size_t steps_since_reset() const noexcept { return since_reset_; }
  /// Applies one coin outcome.
  void advance(bool reset);

 private:
  double initial_;
  double p_;
  double current_;
  std::size_t since_reset_ = 0;
};

/// E[alpha_k] for the L-SVRG-D step-size process started at alpha_0 = alpha.
double expected_step_size(double alpha, double p, std::size_t k);
/// E[alpha_k^2].
double expected_squared_step_size(double alpha, double p, std::size_t k);

}  // namespace arbsvrg
