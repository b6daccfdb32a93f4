#include "arbsvrg/problem.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "arbsvrg/errors.hpp"

namespace arbsvrg {
namespace {

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

Vector start_vector(std::size_t dim) {
  std::mt19937_64 rng(0x5eed5eedULL);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector v(idx(dim));
  for (auto& c : v) c = gauss(rng);
  return v.normalized();
}

}  // namespace

std::string to_string(LossFamily family) {
  return family == LossFamily::ridge ? "ridge" : "logistic";
}

LossFamily loss_family_from_string(const std::string& name) {
  if (name == "ridge") return LossFamily::ridge;
  if (name == "logistic") return LossFamily::logistic;
  throw ValidationError("unknown loss '" + name + "' (expected ridge or logistic)");
}

LossModel::LossModel(std::shared_ptr<const Dataset> data, LossFamily family, double lambda)
    : data_(std::move(data)), family_(family), lambda_(lambda) {
  if (!data_) throw ValidationError("loss model needs a dataset");
  if (!(lambda_ >= 0.0) || !std::isfinite(lambda_)) {
    throw ValidationError("regularizer lambda must be finite and >= 0");
  }
}

double LossModel::curvature_bound() const noexcept {
  return family_ == LossFamily::ridge ? 1.0 : 0.25;
}

double LossModel::data_loss(double margin, double label) const {
  if (family_ == LossFamily::ridge) {
    const double r = margin - label;
    return 0.5 * r * r;
  }
  const double t = label * margin;
  return t >= 0.0 ? std::log1p(std::exp(-t)) : -t + std::log1p(std::exp(t));
}

double LossModel::data_loss_derivative(double margin, double label) const {
  if (family_ == LossFamily::ridge) return margin - label;
  const double t = label * margin;
  // d/dt log(1 + e^{-t}) = -1 / (1 + e^{t})
  double s;
  if (t >= 0.0) {
    const double e = std::exp(-t);
    s = e / (1.0 + e);
  } else {
    s = 1.0 / (1.0 + std::exp(t));
  }
  return -label * s;
}

double LossModel::value_i(const Vector& x, std::size_t i) const {
  return data_loss(data_->row_dot(i, x), data_->label(i)) + 0.5 * lambda_ * x.squaredNorm();
}

double LossModel::value(const Vector& x) const {
  Vector margins;
  data_->multiply(x, margins);
  double sum = 0.0;
  for (std::size_t i = 0; i < n(); ++i) sum += data_loss(margins[idx(i)], data_->label(i));
  return sum / static_cast<double>(n()) + 0.5 * lambda_ * x.squaredNorm();
}

void LossModel::add_gradient_i(const Vector& x, std::size_t i, double scale, Vector& out) const {
  const double g = data_loss_derivative(data_->row_dot(i, x), data_->label(i));
  data_->add_row(i, scale * g, out);
  out.noalias() += (scale * lambda_) * x;
}

void LossModel::add_data_gradient_difference_i(const Vector& x, const Vector& w, std::size_t i,
                                               double scale, Vector& out) const {
  const double y = data_->label(i);
  const double diff =
      data_loss_derivative(data_->row_dot(i, x), y) - data_loss_derivative(data_->row_dot(i, w), y);
  if (diff != 0.0) data_->add_row(i, scale * diff, out);
}

Vector LossModel::gradient_i(const Vector& x, std::size_t i) const {
  Vector out = Vector::Zero(idx(d()));
  add_gradient_i(x, i, 1.0, out);
  return out;
}

Vector LossModel::full_gradient(const Vector& x) const {
  Vector margins;
  data_->multiply(x, margins);
  for (std::size_t i = 0; i < n(); ++i) {
    margins[idx(i)] = data_loss_derivative(margins[idx(i)], data_->label(i));
  }
  Vector out;
  data_->multiply_transpose(margins, out);
  out /= static_cast<double>(n());
  out.noalias() += lambda_ * x;
  return out;
}

SmoothnessProfile SmoothnessProfile::from_constants(std::size_t n, double max_smoothness,
                                                    double smoothness,
                                                    double strong_convexity) {
  SmoothnessProfile p;
  p.n = n;
  p.max_smoothness = max_smoothness;
  p.smoothness = smoothness;
  p.strong_convexity = strong_convexity;
  return p;
}

bool SmoothnessProfile::is_consistent(double rel_tol) const {
  const double slack = 1.0 + rel_tol;
  return strong_convexity > 0.0 && strong_convexity <= smoothness * slack &&
         smoothness <= max_smoothness * slack &&
         max_smoothness <= static_cast<double>(n) * smoothness * slack;
}

EigenEstimate largest_eigenvalue(const std::function<void(const Vector&, Vector&)>& apply,
                                 std::size_t dim, const PowerIterationOptions& options) {
  Vector v = start_vector(dim);
  Vector w(idx(dim));
  double previous = 0.0;
  for (std::size_t it = 1; it <= options.max_iters; ++it) {
    apply(v, w);
    const double rayleigh = v.dot(w);
    const double norm = w.norm();
    if (norm == 0.0) return {0.0, it};  // v landed in the null space: operator is zero
    v = w / norm;
    if (it > 1 && std::abs(rayleigh - previous) <= options.rel_tol * std::abs(rayleigh)) {
      return {rayleigh, it};
    }
    previous = rayleigh;
  }
  throw ConvergenceError("power iteration did not reach relative tolerance " +
                         std::to_string(options.rel_tol) + " in " +
                         std::to_string(options.max_iters) + " iterations");
}

GramSpectrum gram_spectrum(const Dataset& data, const PowerIterationOptions& options) {
  const double inv_n = 1.0 / static_cast<double>(data.n());
  Vector margins;
  const auto gram = [&](const Vector& v, Vector& out) {
    data.multiply(v, margins);
    data.multiply_transpose(margins, out);
    out *= inv_n;
  };
  GramSpectrum s;
  s.largest = largest_eigenvalue(gram, data.d(), options).value;
  if (s.largest <= 0.0) return s;
  const double shift = s.largest;
  const auto complement = [&](const Vector& v, Vector& out) {
    gram(v, out);
    out = shift * v - out;
  };
  const double top = largest_eigenvalue(complement, data.d(), options).value;
  s.smallest = std::clamp(shift - top, 0.0, s.largest);
  return s;
}

SmoothnessProfile smoothness_profile(const LossModel& model, const PowerIterationOptions& options) {
  const double c = model.curvature_bound();
  const double lambda = model.lambda();
  SmoothnessProfile p;
  p.n = model.n();
  p.example_smoothness.resize(p.n);
  for (std::size_t i = 0; i < p.n; ++i) {
    p.example_smoothness[i] = c * model.data().row_squared_norm(i) + lambda;
  }
  p.max_smoothness = *std::max_element(p.example_smoothness.begin(), p.example_smoothness.end());
  const GramSpectrum spectrum = gram_spectrum(model.data(), options);
  p.smoothness = c * spectrum.largest + lambda;
  // The logistic Hessian is only PSD in the data term, so mu falls back to lambda.
  p.strong_convexity =
      model.family() == LossFamily::ridge ? spectrum.smallest + lambda : lambda;
  // The Rayleigh quotient underestimates the top eigenvalue by O(rel_tol); keep
  // the ordering exact.
  p.smoothness = std::min(p.smoothness, p.max_smoothness);
  p.strong_convexity = std::min(p.strong_convexity, p.smoothness);
  return p;
}

double block_smoothness(const LossModel& model, std::span<const std::size_t> rows,
                        const PowerIterationOptions& options) {
  const Dataset& data = model.data();
  const auto gram = [&](const Vector& v, Vector& out) {
    out.setZero(idx(data.d()));
    for (std::size_t i : rows) data.add_row(i, data.row_dot(i, v), out);
  };
  double top = 0.0;
  if (rows.size() == 1) {
    top = data.row_squared_norm(rows.front());
  } else {
    top = largest_eigenvalue(gram, data.d(), options).value;
  }
  return model.curvature_bound() * top + static_cast<double>(rows.size()) * model.lambda();
}

ReferenceSolution reference_solution(const LossModel& model, double tol,
                                     const SmoothnessProfile& profile, std::size_t max_iters,
                                     const std::optional<Vector>& start) {
  if (!(tol > 0.0)) throw ValidationError("reference tolerance must be > 0");
  if (!(profile.strong_convexity > 0.0)) {
    throw ValidationError("reference solve needs a strongly convex objective (lambda > 0)");
  }
  const double step = 1.0 / profile.smoothness;
  const double target = tol * profile.strong_convexity;
  ReferenceSolution out;
  if (start && static_cast<std::size_t>(start->size()) != model.d()) {
    throw ValidationError("reference start point has the wrong dimension");
  }
  out.x = start ? *start : Vector::Zero(idx(model.d()));
  Vector g = model.full_gradient(out.x);
  double gnorm = g.norm();
  std::size_t it = 0;
  while (gnorm > target) {
    if (it == max_iters) {
      throw ConvergenceError("reference gradient descent stopped after " +
                             std::to_string(max_iters) + " iterations with |grad f| = " +
                             std::to_string(gnorm) + " (target " + std::to_string(target) + ")");
    }
    out.x.noalias() -= step * g;
    g = model.full_gradient(out.x);
    gnorm = g.norm();
    ++it;
  }
  out.value = model.value(out.x);
  out.gradient_norm = gnorm;
  out.iterations = it;
  return out;
}

ReferenceSolution reference_solution(const LossModel& model, double tol) {
  return reference_solution(model, tol, smoothness_profile(model));
}

}  // namespace arbsvrg
