#include "arbsvrg/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "arbsvrg/errors.hpp"

namespace arbsvrg {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_batch(double b, std::size_t n) {
  if (!(b >= 1.0) || b > static_cast<double>(n)) {
    throw ValidationError("batch size must lie in [1, n]");
  }
}

void check_epsilon(double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ValidationError("epsilon must lie in (0, 1)");
}

void check_mu(double mu) {
  if (!(mu > 0.0)) throw ValidationError("tuning needs mu > 0");
}

void check_profile(const SmoothnessProfile& profile) {
  if (profile.n < 1) throw ValidationError("profile has n = 0");
  check_mu(profile.strong_convexity);
}

void check_probability(double p) {
  if (!(p > 0.0 && p <= 1.0)) throw ValidationError("reset probability must lie in (0, 1]");
}

BatchChoice finish(double continuous, std::size_t n, std::string regime) {
  const double upper = static_cast<double>(n);
  BatchChoice out;
  out.continuous = std::isnan(continuous) ? 1.0 : std::clamp(continuous, 1.0, upper);
  out.b = static_cast<std::size_t>(std::floor(out.continuous));
  out.b = std::clamp<std::size_t>(out.b, 1, n);
  out.regime = std::move(regime);
  return out;
}

ConstantPair bnice_constants(double b, const SmoothnessProfile& profile) {
  return {bnice_expected_smoothness(b, profile), bnice_expected_residual(b, profile)};
}

}  // namespace

double bnice_expected_smoothness(double b, const SmoothnessProfile& profile) {
  check_batch(b, profile.n);
  const double n = static_cast<double>(profile.n);
  if (b == n) return profile.smoothness;
  return ((n - b) / (n - 1.0)) / b * profile.max_smoothness +
         (n / b) * ((b - 1.0) / (n - 1.0)) * profile.smoothness;
}

double bnice_expected_residual(double b, const SmoothnessProfile& profile) {
  check_batch(b, profile.n);
  const double n = static_cast<double>(profile.n);
  if (b == n) return 0.0;
  return ((n - b) / (n - 1.0)) / b * profile.max_smoothness;
}

double step_size_free(const ConstantPair& constants) {
  return 1.0 / (2.0 * (constants.expected_smoothness + 2.0 * constants.expected_residual));
}

double step_size_free(double b, const SmoothnessProfile& profile) {
  return step_size_free(bnice_constants(b, profile));
}

double zeta(double p) {
  check_probability(p);
  // 1 - (1-p)^{3/2} loses all digits for tiny p; expm1/log1p keep them.
  const double head = -std::expm1(1.5 * std::log1p(-p));
  return (7.0 - 4.0 * p) * head / (p * (2.0 - p) * (3.0 - 2.0 * p));
}

double step_size_lsvrgd(double p, double b, const SmoothnessProfile& profile) {
  return 1.0 / (2.0 * zeta(p) * bnice_expected_smoothness(b, profile));
}

double total_complexity_free(const ConstantPair& constants, double batch, double m, double mu,
                             std::size_t n, double epsilon) {
  check_epsilon(epsilon);
  check_mu(mu);
  if (!(m >= 1.0)) throw ValidationError("loop length must be >= 1");
  const double kappa = (constants.expected_smoothness + 2.0 * constants.expected_residual) / mu;
  return 2.0 * (static_cast<double>(n) / m + 2.0 * batch) * std::max(kappa, m) *
         std::log(1.0 / epsilon);
}

double total_complexity_free(double b, double m, const SmoothnessProfile& profile,
                             double epsilon) {
  check_profile(profile);
  return total_complexity_free(bnice_constants(b, profile), b, m, profile.strong_convexity,
                               profile.n, epsilon);
}

double total_complexity_lsvrgd(const ConstantPair& constants, double batch, double p, double mu,
                               std::size_t n, double epsilon) {
  check_epsilon(epsilon);
  check_mu(mu);
  const double rate = 1.5 * zeta(p) * constants.expected_smoothness / mu;
  return 2.0 * (2.0 * batch + p * static_cast<double>(n)) * std::max(rate, 1.0 / p) *
         std::log(1.0 / epsilon);
}

double total_complexity_lsvrgd(double b, double p, const SmoothnessProfile& profile,
                               double epsilon) {
  check_profile(profile);
  return total_complexity_lsvrgd(bnice_constants(b, profile), b, p, profile.strong_convexity,
                                 profile.n, epsilon);
}

double optimal_loop_continuous(double b, const SmoothnessProfile& profile) {
  check_profile(profile);
  const ConstantPair c = bnice_constants(b, profile);
  return (c.expected_smoothness + 2.0 * c.expected_residual) / profile.strong_convexity;
}

std::size_t optimal_loop(double b, const SmoothnessProfile& profile) {
  const double m = std::ceil(optimal_loop_continuous(b, profile));
  return m < 1.0 ? 1 : static_cast<std::size_t>(m);
}

BatchChoice optimal_batch_m_eq_n(const SmoothnessProfile& profile) {
  check_profile(profile);
  const std::size_t count = profile.n;
  if (count == 1) return finish(1.0, 1, "n = 1");
  const double n = static_cast<double>(count);
  const double l_max = profile.max_smoothness;
  const double l = profile.smoothness;
  const double mu = profile.strong_convexity;

  const double spread = 3.0 * l_max - l;
  const double excess = n * l - 3.0 * l_max;  // > 0 iff L_max < nL/3
  const double b_hat = excess > 0.0 ? std::sqrt((n / 2.0) * spread / excess) : kInf;
  const double b_tilde = spread * n / (n * (n - 1.0) * mu - n * l + 3.0 * l_max);

  if (n * mu <= l) {
    if (excess <= 0.0) return finish(n, count, "n <= L/mu, L_max >= nL/3");
    return finish(b_hat, count, "n <= L/mu, L_max < nL/3");
  }
  if (n * mu < 3.0 * l_max) {
    if (excess <= 0.0) return finish(b_tilde, count, "L/mu < n < 3L_max/mu, L_max >= nL/3");
    return finish(std::min(b_hat, b_tilde), count, "L/mu < n < 3L_max/mu, L_max < nL/3");
  }
  return finish(1.0, count, "n >= 3L_max/mu");
}

BatchChoice optimal_batch_m_eq_n_over_b(const SmoothnessProfile& profile) {
  check_profile(profile);
  const std::size_t count = profile.n;
  if (count == 1) return finish(1.0, 1, "n = 1");
  const double n = static_cast<double>(count);
  const double l_max = profile.max_smoothness;
  const double l = profile.smoothness;
  const double mu = profile.strong_convexity;

  if (n * mu > 3.0 * l_max) {
    const double b_bar = (n * (n - 1.0) * mu - n * (3.0 * l_max - l)) / (n * l - 3.0 * l_max);
    return finish(b_bar, count, "n > 3L_max/mu");
  }
  if (n * l > 3.0 * l_max) return finish(1.0, count, "3L_max/L < n <= 3L_max/mu");
  return finish(n, count, "n <= 3L_max/L");
}

BatchChoice optimal_batch_lsvrgd(const SmoothnessProfile& profile) {
  check_profile(profile);
  const std::size_t count = profile.n;
  if (count == 1) return finish(1.0, 1, "n = 1");
  const double n = static_cast<double>(count);
  const double l_max = profile.max_smoothness;
  const double l = profile.smoothness;
  const double mu = profile.strong_convexity;
  const double t = 1.5 * zeta(1.0 / n);

  const double spread = l_max - l;
  const double excess = n * l - l_max;
  double b_hat;
  if (spread <= 0.0) {
    b_hat = 1.0;  // homogeneous smoothness: batching does not shrink L(b)
  } else {
    b_hat = excess > 0.0 ? std::sqrt((n / 2.0) * spread / excess) : kInf;
  }

  if (n * mu >= t * l_max) return finish(1.0, count, "n >= (3 zeta/2) L_max/mu");
  if (n * mu > t * l) {
    const double b_tilde = t * n * spread / (mu * n * (n - 1.0) - t * excess);
    return finish(std::min(b_tilde, b_hat), count,
                  "(3 zeta/2) L/mu < n < (3 zeta/2) L_max/mu");
  }
  return finish(b_hat, count, "n <= (3 zeta/2) L/mu");
}

GridOptimum brute_force_optimal_batch(std::size_t n,
                                      const std::function<double(std::size_t)>& complexity_fn) {
  if (n < 1 || n > 1'000'000) throw ValidationError("grid search needs 1 <= n <= 1e6");
  GridOptimum out;
  out.values.resize(n);
  out.complexity = kInf;
  for (std::size_t b = 1; b <= n; ++b) {
    const double c = complexity_fn(b);
    out.values[b - 1] = c;
    if (c < out.complexity) {
      out.complexity = c;
      out.b = b;
    }
  }
  return out;
}

TuneTable tuning_table(const SmoothnessProfile& profile, double epsilon, bool all_b) {
  check_profile(profile);
  check_epsilon(epsilon);
  TuneTable table;
  table.optimum = optimal_batch_m_eq_n(profile);
  const std::size_t n = profile.n;

  std::vector<std::size_t> batches;
  if (all_b) {
    for (std::size_t b = 1; b <= n; ++b) batches.push_back(b);
  } else {
    const auto root = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n))));
    batches = {1, table.optimum.b, std::clamp<std::size_t>(root, 1, n), n};
    std::sort(batches.begin(), batches.end());
    batches.erase(std::unique(batches.begin(), batches.end()), batches.end());
  }

  const auto root = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n))));
  for (std::size_t b : batches) {
    TuneRow row;
    row.b = b;
    const double bd = static_cast<double>(b);
    const ConstantPair c = bnice_constants(bd, profile);
    row.expected_smoothness = c.expected_smoothness;
    row.expected_residual = c.expected_residual;
    row.alpha = step_size_free(c);
    row.m_star = optimal_loop(bd, profile);
    row.complexity = total_complexity_free(bd, static_cast<double>(n), profile, epsilon);
    std::vector<std::string> labels;
    if (b == table.optimum.b) labels.emplace_back("b*");
    if (b == 1) labels.emplace_back("1");
    if (b == root) labels.emplace_back("sqrt(n)");
    if (b == n) labels.emplace_back("n");
    for (std::size_t k = 0; k < labels.size(); ++k) {
      row.label += (k ? "|" : "") + labels[k];
    }
    table.rows.push_back(row);
  }
  return table;
}

}  // namespace arbsvrg
