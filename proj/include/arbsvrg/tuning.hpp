#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "arbsvrg/problem.hpp"
#include "arbsvrg/sampling.hpp"

namespace arbsvrg {

// Closed forms below use b-nice constants. Batch sizes are real-valued so the
// same expressions serve the continuous analysis and the integer grid.

double bnice_expected_smoothness(double b, const SmoothnessProfile& profile);
double bnice_expected_residual(double b, const SmoothnessProfile& profile);

/// 1 / (2 (L(b) + 2 rho(b))) for b-nice sampling; 1/(2L) when n == 1.
double step_size_free(double b, const SmoothnessProfile& profile);
/// Same rule from an arbitrary scheme's constants.
double step_size_free(const ConstantPair& constants);

/// (7 - 4p)(1 - (1 - p)^{3/2}) / (p (2 - p)(3 - 2p)), in [7/4, 3].
double zeta(double p);
/// 1 / (2 zeta(p) L(b)).
double step_size_lsvrgd(double p, double b, const SmoothnessProfile& profile);

/// 2 (n/m + 2 E|S|) max{(L + 2 rho)/mu, m} log(1/eps) for any scheme's constants.
double total_complexity_free(const ConstantPair& constants, double batch, double m,
                             double mu, std::size_t n, double epsilon);
double total_complexity_free(double b, double m, const SmoothnessProfile& profile,
                             double epsilon);

/// 2 (2 E|S| + p n) max{(3 zeta_p / 2) L / mu, 1/p} log(1/eps).
double total_complexity_lsvrgd(const ConstantPair& constants, double batch, double p,
                               double mu, std::size_t n, double epsilon);
double total_complexity_lsvrgd(double b, double p, const SmoothnessProfile& profile,
                               double epsilon);

/// (L(b) + 2 rho(b)) / mu, before rounding.
double optimal_loop_continuous(double b, const SmoothnessProfile& profile);
/// ceil of the continuous optimum, at least 1.
std::size_t optimal_loop(double b, const SmoothnessProfile& profile);

/// Closed-form optimal mini-batch: the integer answer plus the continuous
/// point it was floored from and the regime that selected it.
struct BatchChoice {
  std::size_t b = 1;
  double continuous = 1.0;
  std::string regime;
};

/// Loop length m = n.
BatchChoice optimal_batch_m_eq_n(const SmoothnessProfile& profile);
/// Loop length m = n / b. Every b in [1, floor(b_bar)] is optimal in the
/// first regime; the largest is returned.
BatchChoice optimal_batch_m_eq_n_over_b(const SmoothnessProfile& profile);
/// L-SVRG-D with p = 1/n.
BatchChoice optimal_batch_lsvrgd(const SmoothnessProfile& profile);

struct GridOptimum {
  std::size_t b = 1;
  double complexity = 0.0;
  std::vector<double> values;  // values[b - 1] = complexity_fn(b)
};

/// Exact argmin over b in [1, n]; ties go to the smaller b.
GridOptimum brute_force_optimal_batch(std::size_t n,
                                      const std::function<double(std::size_t)>& complexity_fn);

struct TuneRow {
  std::string label;  // "1", "b*", "sqrt(n)", "n" or "" for grid rows
  std::size_t b = 1;
  double expected_smoothness = 0.0;
  double expected_residual = 0.0;
  double alpha = 0.0;
  std::size_t m_star = 1;
  double complexity = 0.0;  // Free-SVRG with m = n
};

struct TuneTable {
  BatchChoice optimum;
  std::vector<TuneRow> rows;
};

/// Rows for b in {1, b*, sqrt(n), n} (deduplicated, ascending), or every b in
/// [1, n] when `all_b` is set; the closed-form b* row is labelled either way.
TuneTable tuning_table(const SmoothnessProfile& profile, double epsilon, bool all_b = false);

}  // namespace arbsvrg
