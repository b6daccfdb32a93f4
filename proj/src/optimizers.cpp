#include "arbsvrg/optimizers.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "arbsvrg/errors.hpp"

namespace arbsvrg {
namespace {

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

constexpr double kDivergenceNormSq = 1e30;  // |x| > 1e15

void check_iterate(const Vector& x, double step, std::size_t iteration) {
  const double norm_sq = x.squaredNorm();
  if (!std::isfinite(norm_sq)) throw DivergenceError("non-finite iterate", step, iteration);
  if (norm_sq > kDivergenceNormSq) throw DivergenceError("iterate norm above 1e15", step, iteration);
}

/// Wall clock that can be paused while trace records are evaluated.
class RunClock {
 public:
  RunClock() : start_(Clock::now()) {}
  void pause() { paused_at_ = Clock::now(); }
  void resume() { excluded_ += Clock::now() - paused_at_; }
  double seconds() const {
    return std::chrono::duration<double>(paused_at_ - start_ - excluded_).count();
  }

 private:
  using Clock = std::chrono::steady_clock;
  Clock::time_point start_;
  Clock::time_point paused_at_{};
  Clock::duration excluded_{0};
};

class TraceRecorder {
 public:
  TraceRecorder(const LossModel& model, const std::optional<Reference>& reference)
      : model_(model), reference_(reference) {}

  /// Records f at x; `lyapunov_tail` is the function-gap part of the
  /// Lyapunov value (coefficient times f(w) - f*) when known.
  void record(RunTrace& trace, std::uint64_t evals, double wall, const Vector& x,
              const std::optional<std::pair<double, const Vector*>>& lyapunov_tail) const {
    TraceRecord rec;
    rec.grad_evals = evals;
    rec.epoch_equiv = static_cast<double>(evals) / static_cast<double>(model_.n());
    rec.wall_s = wall;
    rec.objective = model_.value(x);
    if (reference_) {
      // Float error in f* can leave a tiny negative gap.
      rec.suboptimality = std::max(0.0, rec.objective - reference_->value);
      rec.dist_sq = (x - reference_->x).squaredNorm();
      if (lyapunov_tail) {
        const auto [coefficient, w] = *lyapunov_tail;
        const double gap = std::max(0.0, model_.value(*w) - reference_->value);
        rec.lyapunov = *rec.dist_sq + coefficient * gap;
      }
    } else {
      rec.suboptimality = std::numeric_limits<double>::quiet_NaN();
    }
    trace.records.push_back(rec);
  }

 private:
  const LossModel& model_;
  const std::optional<Reference>& reference_;
};

void check_common(const LossModel& model, const SamplingScheme& scheme, const Vector& x0,
                  double alpha) {
  if (scheme.n() != model.n()) throw ValidationError("sampling size differs from dataset size");
  if (static_cast<std::size_t>(x0.size()) != model.d()) {
    throw ValidationError("starting point has the wrong dimension");
  }
  if (!x0.allFinite()) throw ValidationError("starting point must be finite");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ValidationError("step size must be > 0");
}

}  // namespace

InnerWeights inner_weights(double alpha, double mu, std::size_t m) {
  if (m < 1) throw ValidationError("inner loop length must be >= 1");
  const double am = alpha * mu;
  if (!(am >= 0.0) || am >= 1.0) {
    throw ValidationError("averaging weights need 0 <= alpha * mu < 1 (got " +
                          std::to_string(am) + ")");
  }
  const double q = 1.0 - am;
  InnerWeights out;
  out.weights.resize(m);
  // powers q^(m-1-t), built from the last (t = m-1, power 0) backwards
  double power = 1.0;
  for (std::size_t t = m; t-- > 0;) {
    out.weights[t] = power;
    power *= q;
  }
  double sum = 0.0;
  for (std::size_t t = 0; t < m; ++t) sum += out.weights[t];
  out.normalizer = sum;
  for (double& w : out.weights) w /= sum;
  return out;
}

void variance_reduced_gradient_into(const LossModel& model, const Vector& x, const Vector& w,
                                    const Vector& grad_f_w, const SampleRealization& r,
                                    Vector& out) {
  out = grad_f_w;
  const double inv_n = 1.0 / static_cast<double>(model.n());
  double weight_sum = 0.0;
  for (std::size_t k = 0; k < r.size(); ++k) {
    const double scale = r.weights[k] * inv_n;
    model.add_data_gradient_difference_i(x, w, r.indices[k], scale, out);
    weight_sum += scale;
  }
  if (model.lambda() != 0.0) out.noalias() += (weight_sum * model.lambda()) * (x - w);
}

Vector variance_reduced_gradient(const LossModel& model, const Vector& x, const Vector& w,
                                 const Vector& grad_f_w, const SampleRealization& r) {
  Vector out;
  variance_reduced_gradient_into(model, x, w, grad_f_w, r, out);
  return out;
}

RunTrace run_free_svrg(const LossModel& model, const FreeSvrgConfig& cfg, const Vector& x0,
                       const std::optional<Reference>& reference) {
  check_common(model, cfg.scheme, x0, cfg.alpha);
  if (cfg.m < 1) throw ValidationError("inner loop length must be >= 1");
  const InnerWeights weights = inner_weights(cfg.alpha, cfg.strong_convexity, cfg.m);
  const double q = 1.0 - cfg.alpha * cfg.strong_convexity;
  const std::size_t n = model.n();

  RunTrace trace;
  trace.metadata.algorithm = "free_svrg";
  trace.metadata.sampling = cfg.scheme.describe();
  trace.metadata.seed = cfg.seed;
  trace.metadata.parameters = {{"m", static_cast<double>(cfg.m)},
                               {"alpha", cfg.alpha},
                               {"b", cfg.scheme.expected_batch_size()},
                               {"outer_iters", static_cast<double>(cfg.outer_iters)},
                               {"mu", cfg.strong_convexity},
                               {"S_m", weights.normalizer}};
  if (cfg.expected_residual) trace.metadata.parameters["rho"] = *cfg.expected_residual;
  trace.metadata.parameters["sampled_reference"] =
      cfg.reference_rule == ReferencePointRule::sampled_iterate ? 1.0 : 0.0;

  const double psi_coefficient =
      cfg.expected_residual
          ? 8.0 * cfg.alpha * cfg.alpha * *cfg.expected_residual * weights.normalizer
          : 0.0;
  const TraceRecorder recorder(model, reference);
  const auto lyapunov = [&](const Vector& w) -> std::optional<std::pair<double, const Vector*>> {
    if (!cfg.expected_residual) return std::nullopt;
    return std::make_pair(psi_coefficient, &w);
  };

  Rng rng(cfg.seed);
  Sampler sampler(cfg.scheme);
  std::discrete_distribution<std::size_t> pick_reference(weights.weights.begin(),
                                                         weights.weights.end());

  Vector x = x0;
  Vector w = x0;
  Vector grad_w(idx(model.d()));
  Vector g(idx(model.d()));
  Vector acc(idx(model.d()));
  std::uint64_t evals = 0;
  std::size_t iteration = 0;

  RunClock clock;
  clock.pause();
  recorder.record(trace, evals, clock.seconds(), x, lyapunov(w));
  clock.resume();

  for (std::size_t s = 1; s <= cfg.outer_iters; ++s) {
    grad_w = model.full_gradient(w);
    evals += n;
    acc.setZero();
    const std::size_t chosen =
        cfg.reference_rule == ReferencePointRule::sampled_iterate ? pick_reference(rng) : 0;
    for (std::size_t t = 0; t < cfg.m; ++t) {
      if (cfg.reference_rule == ReferencePointRule::weighted_average) {
        // Horner form of sum_t q^(m-1-t) x^t
        acc *= q;
        acc += x;
      } else if (t == chosen) {
        acc = x;
      }
      const SampleRealization& r = sampler.draw(rng);
      variance_reduced_gradient_into(model, x, w, grad_w, r, g);
      evals += 2 * r.size();
      x.noalias() -= cfg.alpha * g;
      check_iterate(x, cfg.alpha, ++iteration);
    }
    if (cfg.reference_rule == ReferencePointRule::weighted_average) {
      w = acc / weights.normalizer;
    } else {
      w = acc;
    }
    clock.pause();
    recorder.record(trace, evals, clock.seconds(), x, lyapunov(w));
    clock.resume();
  }
  trace.final_iterate = x;
  return trace;
}

DecreasingStepSize::DecreasingStepSize(double alpha, double p)
    : initial_(alpha), p_(p), current_(alpha) {
  if (!(p > 0.0 && p <= 1.0)) throw ValidationError("reset probability must lie in (0, 1]");
}

void DecreasingStepSize::advance(bool reset) {
  if (reset) {
    since_reset_ = 0;
    current_ = initial_;
    return;
  }
  ++since_reset_;
  current_ = initial_ * std::pow(1.0 - p_, static_cast<double>(since_reset_) / 2.0);
}

double expected_step_size(double alpha, double p, std::size_t k) {
  const double q = 1.0 - p;
  const double kk = static_cast<double>(k);
  return (std::pow(q, (3.0 * kk + 2.0) / 2.0) * (1.0 - std::sqrt(q)) + p) /
         (1.0 - std::pow(q, 1.5)) * alpha;
}

double expected_squared_step_size(double alpha, double p, std::size_t k) {
  const double q = 1.0 - p;
  return (1.0 + std::pow(q, 2.0 * static_cast<double>(k) + 1.0)) / (2.0 - p) * alpha * alpha;
}

RunTrace run_lsvrg_d(const LossModel& model, const LSvrgDConfig& cfg, const Vector& x0,
                     const std::optional<Reference>& reference) {
  check_common(model, cfg.scheme, x0, cfg.alpha);
  DecreasingStepSize step(cfg.alpha, cfg.p);
  const std::size_t n = model.n();
  std::size_t period = cfg.record_every;
  if (period == 0) {
    const double ratio = static_cast<double>(n) / std::max(cfg.scheme.expected_batch_size(), 1.0);
    period = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(ratio)));
  }

  RunTrace trace;
  trace.metadata.algorithm = "lsvrg_d";
  trace.metadata.sampling = cfg.scheme.describe();
  trace.metadata.seed = cfg.seed;
  trace.metadata.parameters = {{"p", cfg.p},
                               {"alpha", cfg.alpha},
                               {"b", cfg.scheme.expected_batch_size()},
                               {"total_iters", static_cast<double>(cfg.total_iters)},
                               {"record_every", static_cast<double>(period)}};
  if (cfg.expected_smoothness) {
    trace.metadata.parameters["expected_smoothness"] = *cfg.expected_smoothness;
  }

  const double psi_scale =
      cfg.expected_smoothness ? 8.0 * *cfg.expected_smoothness / (cfg.p * (3.0 - 2.0 * cfg.p))
                              : 0.0;
  const TraceRecorder recorder(model, reference);
  const auto lyapunov = [&](const Vector& w) -> std::optional<std::pair<double, const Vector*>> {
    if (!cfg.expected_smoothness) return std::nullopt;
    return std::make_pair(psi_scale * step.current() * step.current(), &w);
  };

  Rng rng(cfg.seed);
  Sampler sampler(cfg.scheme);
  std::bernoulli_distribution coin(cfg.p);

  Vector x = x0;
  Vector w = x0;
  Vector g(idx(model.d()));
  RunClock clock;
  Vector grad_w = model.full_gradient(w);
  std::uint64_t evals = n;
  if (cfg.record_step_sizes) trace.step_sizes.push_back(step.current());

  clock.pause();
  recorder.record(trace, evals, clock.seconds(), x, lyapunov(w));
  clock.resume();

  for (std::size_t k = 0; k < cfg.total_iters; ++k) {
    const SampleRealization& r = sampler.draw(rng);
    const bool reset = coin(rng);
    variance_reduced_gradient_into(model, x, w, grad_w, r, g);
    evals += 2 * r.size();
    if (reset) w = x;  // the reference becomes x^k, the iterate before this step
    x.noalias() -= step.current() * g;
    check_iterate(x, step.current(), k + 1);
    if (reset) {
      grad_w = model.full_gradient(w);
      evals += n;
    }
    step.advance(reset);
    if (cfg.record_step_sizes) trace.step_sizes.push_back(step.current());
    if ((k + 1) % period == 0 || k + 1 == cfg.total_iters) {
      clock.pause();
      recorder.record(trace, evals, clock.seconds(), x, lyapunov(w));
      clock.resume();
    }
  }
  trace.final_iterate = x;
  return trace;
}

RunTrace run_reference_svrg(const LossModel& model, const SvrgConfig& cfg, const Vector& x0,
                            const std::optional<Reference>& reference) {
  check_common(model, cfg.scheme, x0, cfg.alpha);
  if (cfg.m < 1) throw ValidationError("inner loop length must be >= 1");
  const std::size_t n = model.n();

  RunTrace trace;
  trace.metadata.algorithm = "svrg";
  trace.metadata.sampling = cfg.scheme.describe();
  trace.metadata.seed = cfg.seed;
  trace.metadata.parameters = {{"m", static_cast<double>(cfg.m)},
                               {"alpha", cfg.alpha},
                               {"b", cfg.scheme.expected_batch_size()},
                               {"outer_iters", static_cast<double>(cfg.outer_iters)}};
  const TraceRecorder recorder(model, reference);

  Rng rng(cfg.seed);
  Sampler sampler(cfg.scheme);
  Vector w = x0;
  Vector x(idx(model.d()));
  Vector g(idx(model.d()));
  Vector grad_w(idx(model.d()));
  Vector sum(idx(model.d()));
  std::uint64_t evals = 0;
  std::size_t iteration = 0;

  RunClock clock;
  clock.pause();
  recorder.record(trace, evals, clock.seconds(), w, std::nullopt);
  clock.resume();

  for (std::size_t s = 1; s <= cfg.outer_iters; ++s) {
    grad_w = model.full_gradient(w);
    evals += n;
    x = w;
    sum.setZero();
    for (std::size_t t = 0; t < cfg.m; ++t) {
      const SampleRealization& r = sampler.draw(rng);
      variance_reduced_gradient_into(model, x, w, grad_w, r, g);
      evals += 2 * r.size();
      x.noalias() -= cfg.alpha * g;
      check_iterate(x, cfg.alpha, ++iteration);
      sum += x;
    }
    w = sum / static_cast<double>(cfg.m);
    clock.pause();
    recorder.record(trace, evals, clock.seconds(), w, std::nullopt);
    clock.resume();
  }
  trace.final_iterate = w;
  return trace;
}

}  // namespace arbsvrg
