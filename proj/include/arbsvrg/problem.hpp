#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "arbsvrg/dataset.hpp"

namespace arbsvrg {

enum class LossFamily { ridge, logistic };

std::string to_string(LossFamily family);
LossFamily loss_family_from_string(const std::string& name);

/// Finite-sum objective f(x) = (1/n) sum_i f_i(x) with
///   ridge:    f_i(x) = 1/2 (<a_i,x> - y_i)^2        + lambda/2 |x|^2
///   logistic: f_i(x) = log(1 + exp(-y_i <a_i,x>))   + lambda/2 |x|^2
///
/// lambda = 0 is accepted for evaluation; anything that needs strong
/// convexity (reference solves, tuning) rejects it.
class LossModel {
 public:
  LossModel(std::shared_ptr<const Dataset> data, LossFamily family, double lambda);

  const Dataset& data() const noexcept { return *data_; }
  std::shared_ptr<const Dataset> data_ptr() const noexcept { return data_; }
  LossFamily family() const noexcept { return family_; }
  double lambda() const noexcept { return lambda_; }
  std::size_t n() const noexcept { return data_->n(); }
  std::size_t d() const noexcept { return data_->d(); }

  double value(const Vector& x) const;
  double value_i(const Vector& x, std::size_t i) const;

  Vector gradient_i(const Vector& x, std::size_t i) const;
  /// out += scale * grad f_i(x), without allocating.
  void add_gradient_i(const Vector& x, std::size_t i, double scale, Vector& out) const;
  Vector full_gradient(const Vector& x) const;
  /// out += scale * (grad of the data term of f_i at x minus the same at w).
  /// Exactly zero when x == w; the regularizer part is left to the caller.
  void add_data_gradient_difference_i(const Vector& x, const Vector& w, std::size_t i,
                                      double scale, Vector& out) const;

  /// Curvature bound of the data term in the margin: 1 (ridge) or 1/4 (logistic).
  double curvature_bound() const noexcept;

 private:
  double data_loss(double margin, double label) const;
  double data_loss_derivative(double margin, double label) const;

  std::shared_ptr<const Dataset> data_;
  LossFamily family_;
  double lambda_;
};

/// Smoothness and strong-convexity constants of a LossModel.
struct SmoothnessProfile {
  std::vector<double> example_smoothness;  // L_i, one per example
  double max_smoothness = 0.0;             // max_i L_i
  double smoothness = 0.0;                 // L, smoothness of f
  double strong_convexity = 0.0;           // mu
  std::size_t n = 0;

  /// Builds a profile from the four scalar constants only (per-example values
  /// unknown); used by tuning studies over synthetic constant tuples.
  static SmoothnessProfile from_constants(std::size_t n, double max_smoothness,
                                          double smoothness, double strong_convexity);

  /// mu <= L <= L_max <= n L, with mu > 0.
  bool is_consistent(double rel_tol = 1e-9) const;
};

struct PowerIterationOptions {
  double rel_tol = 1e-8;
  std::size_t max_iters = 10000;
};

struct EigenEstimate {
  double value = 0.0;
  std::size_t iterations = 0;
};

/// Largest eigenvalue of a symmetric PSD operator given by `apply(v, out)`.
/// Throws ConvergenceError if the Rayleigh quotient has not settled to
/// `rel_tol` within `max_iters`.
EigenEstimate largest_eigenvalue(const std::function<void(const Vector&, Vector&)>& apply,
                                 std::size_t dim, const PowerIterationOptions& options = {});

/// Extreme eigenvalues of A^T A / n. The smallest comes from the largest
/// eigenvalue of (c I - G) with c the largest eigenvalue of G.
struct GramSpectrum {
  double largest = 0.0;
  double smallest = 0.0;
};
GramSpectrum gram_spectrum(const Dataset& data, const PowerIterationOptions& options = {});

SmoothnessProfile smoothness_profile(const LossModel& model,
                                     const PowerIterationOptions& options = {});

/// Smoothness constant of sum_{i in rows} f_i.
double block_smoothness(const LossModel& model, std::span<const std::size_t> rows,
                        const PowerIterationOptions& options = {});

struct ReferenceSolution {
  Vector x;
  double value = 0.0;
  double gradient_norm = 0.0;
  std::size_t iterations = 0;
};

/// Full gradient descent with step 1/L until |grad f(x)| <= tol * mu, started
/// at `start` (the origin by default). Throws ConvergenceError (with the
/// achieved gradient norm) when `max_iters` runs out.
ReferenceSolution reference_solution(const LossModel& model, double tol,
                                     const SmoothnessProfile& profile,
                                     std::size_t max_iters = 2'000'000,
                                     const std::optional<Vector>& start = std::nullopt);
ReferenceSolution reference_solution(const LossModel& model, double tol);

}  // namespace arbsvrg
