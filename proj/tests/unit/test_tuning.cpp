#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "arbsvrg/errors.hpp"
#include "arbsvrg/tuning.hpp"

namespace arbsvrg {
namespace {

// mu <= L <= L_max <= n L, spread over several orders of magnitude.
SmoothnessProfile random_profile(std::mt19937_64& rng, std::size_t max_n = 400) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t n = 2 + static_cast<std::size_t>(unit(rng) * static_cast<double>(max_n - 1));
  const double nd = static_cast<double>(n);
  const double l = std::pow(10.0, -1.0 + 2.0 * unit(rng));
  const double l_max = l * std::pow(nd, unit(rng));
  const double mu = l * std::pow(10.0, -4.0 * unit(rng));
  return SmoothnessProfile::from_constants(n, std::min(l_max, nd * l), l, mu);
}

// Complexity with the kappa term written out in full.
double expanded_complexity(double n, double b, double m, double l_max, double l, double mu,
                           double eps) {
  const double kappa = 3.0 / b * (n - b) / (n - 1.0) * l_max / mu + n / b * (b - 1.0) / (n - 1.0) * l / mu;
  return 2.0 * (n / m + 2.0 * b) * std::max(kappa, m) * std::log(1.0 / eps);
}

// Grid minimum is attained by the floor or the ceiling of the continuous point.
void expect_neighbor_rule(const BatchChoice& choice, const GridOptimum& grid,
                          const std::function<double(std::size_t)>& fn, std::size_t n,
                          const SmoothnessProfile& p) {
  const auto lo = static_cast<std::size_t>(std::floor(choice.continuous));
  const auto hi = std::min<std::size_t>(n, static_cast<std::size_t>(std::ceil(choice.continuous)));
  const double best = std::min(fn(lo), fn(hi));
  EXPECT_LE(best, grid.complexity * (1.0 + 1e-9))
      << "n=" << n << " Lmax=" << p.max_smoothness << " L=" << p.smoothness
      << " mu=" << p.strong_convexity << " regime=" << choice.regime << " b*=" << choice.b
      << " grid b=" << grid.b;
  EXPECT_EQ(choice.b, std::max<std::size_t>(1, lo));
}

TEST(StepSize, Endpoints) {
  const SmoothnessProfile p = SmoothnessProfile::from_constants(50, 20.0, 2.0, 0.1);
  EXPECT_DOUBLE_EQ(step_size_free(1.0, p), 1.0 / 120.0);
  EXPECT_DOUBLE_EQ(step_size_free(50.0, p), 0.25);
  const SmoothnessProfile one = SmoothnessProfile::from_constants(1, 3.0, 3.0, 1.0);
  EXPECT_DOUBLE_EQ(step_size_free(1.0, one), 1.0 / 6.0);
}

TEST(StepSize, ClosedFormAndMonotone) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const SmoothnessProfile p = random_profile(rng);
    const double n = static_cast<double>(p.n);
    double prev = 0.0;
    for (std::size_t bi = 1; bi <= p.n; ++bi) {
      const double b = static_cast<double>(bi);
      const double alpha = step_size_free(b, p);
      const double direct = 0.5 * b * (n - 1.0) / (3.0 * (n - b) * p.max_smoothness + n * (b - 1.0) * p.smoothness);
      EXPECT_NEAR(alpha, direct, 1e-12 * direct);
      EXPECT_GE(alpha, prev * (1.0 - 1e-12));
      EXPECT_LE(alpha, 1.0 / (2.0 * p.strong_convexity) * (1.0 + 1e-12));
      prev = alpha;
    }
  }
}

TEST(Zeta, EndpointsAndMonotone) {
  EXPECT_DOUBLE_EQ(zeta(1.0), 3.0);
  EXPECT_GE(zeta(1e-8), 1.75);
  EXPECT_LE(zeta(1e-8), 1.7500001);
  double prev = 0.0;
  for (int k = 1; k <= 10000; ++k) {
    const double z = zeta(k / 10000.0);
    EXPECT_GE(z, 1.75);
    EXPECT_LE(z, 3.0 + 1e-15);
    EXPECT_GE(z, prev);
    prev = z;
  }
  EXPECT_THROW(zeta(0.0), ValidationError);
  EXPECT_THROW(zeta(1.5), ValidationError);
}

TEST(Zeta, MatchesNaiveFormulaAwayFromZero) {
  for (double p : {0.01, 0.1, 0.5, 0.9}) {
    const double naive = (7.0 - 4.0 * p) * (1.0 - std::pow(1.0 - p, 1.5)) / (p * (2.0 - p) * (3.0 - 2.0 * p));
    EXPECT_NEAR(zeta(p), naive, 1e-12);
  }
}

TEST(Complexity, FullBatchSingleStep) {
  const SmoothnessProfile p = SmoothnessProfile::from_constants(80, 30.0, 4.0, 0.02);
  const double eps = 1e-4;
  EXPECT_NEAR(total_complexity_free(80.0, 1.0, p, eps), 6.0 * 80.0 * (4.0 / 0.02) * std::log(1.0 / eps),
              1e-9 * total_complexity_free(80.0, 1.0, p, eps));
}

TEST(Complexity, SingleSampleLoopInterval) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const SmoothnessProfile p = random_profile(rng, 2000);
    const double n = static_cast<double>(p.n);
    const double ratio = p.max_smoothness / p.strong_convexity;
    const double bound = 18.0 * (n + ratio) * std::log(1e4);
    const auto lo = static_cast<std::size_t>(std::ceil(std::min(n, ratio)));
    const auto hi = static_cast<std::size_t>(std::floor(std::max(n, ratio)));
    const std::size_t step = std::max<std::size_t>(1, (hi - lo) / 500);
    for (std::size_t m = std::max<std::size_t>(lo, 1); m <= hi; m += step) {
      EXPECT_LE(total_complexity_free(1.0, static_cast<double>(m), p, 1e-4), bound * (1.0 + 1e-12));
    }
    EXPECT_LE(total_complexity_free(1.0, static_cast<double>(std::max<std::size_t>(hi, 1)), p, 1e-4),
              bound * (1.0 + 1e-12));
  }
}

TEST(Complexity, ExpandedFormAgrees) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const SmoothnessProfile p = random_profile(rng, 5000);
    const double n = static_cast<double>(p.n);
    const double b = 1.0 + std::floor(unit(rng) * n);
    const double m = 1.0 + std::floor(unit(rng) * 3.0 * n);
    const double eps = std::pow(10.0, -1.0 - 8.0 * unit(rng));
    const double c = total_complexity_free(std::min(b, n), m, p, eps);
    const double e = expanded_complexity(n, std::min(b, n), m, p.max_smoothness, p.smoothness,
                                         p.strong_convexity, eps);
    EXPECT_NEAR(c, e, 1e-10 * e);
  }
}

TEST(Complexity, LooplessExamples) {
  const SmoothnessProfile p = SmoothnessProfile::from_constants(40, 12.0, 2.0, 0.3);
  const double eps = 1e-3;
  EXPECT_NEAR(total_complexity_lsvrgd(1.0, 1.0, p, eps),
              2.0 * 42.0 * std::max(4.5 * 12.0 / 0.3, 1.0) * std::log(1.0 / eps), 1e-9);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    const SmoothnessProfile q = random_profile(rng);
    const double b = 1.0 + std::floor(unit(rng) * static_cast<double>(q.n));
    const double m = 1.0 + std::floor(unit(rng) * 5.0 * static_cast<double>(q.n));
    const double cp = total_complexity_lsvrgd(b, 1.0 / m, q, eps);
    const double cm = total_complexity_free(b, m, q, eps);
    EXPECT_GT(cp, 0.0);
    EXPECT_TRUE(std::isfinite(cp));
    EXPECT_GE(cp / cm, 1.0 / 9.0);
    EXPECT_LE(cp / cm, 9.0);
  }
}

TEST(Complexity, RejectsBadInputs) {
  const SmoothnessProfile p = SmoothnessProfile::from_constants(10, 3.0, 1.0, 0.1);
  EXPECT_THROW(total_complexity_free(0.5, 10.0, p, 1e-4), ValidationError);
  EXPECT_THROW(total_complexity_free(11.0, 10.0, p, 1e-4), ValidationError);
  EXPECT_THROW(total_complexity_free(1.0, 0.5, p, 1e-4), ValidationError);
  EXPECT_THROW(total_complexity_free(1.0, 10.0, p, 0.0), ValidationError);
  EXPECT_THROW(total_complexity_free(1.0, 10.0, p, 1.0), ValidationError);
  EXPECT_THROW(total_complexity_lsvrgd(1.0, 0.0, p, 1e-4), ValidationError);
  const SmoothnessProfile flat = SmoothnessProfile::from_constants(10, 3.0, 1.0, 0.0);
  EXPECT_THROW(total_complexity_free(1.0, 10.0, flat, 1e-4), ValidationError);
  EXPECT_THROW(optimal_batch_m_eq_n(flat), ValidationError);
}

TEST(OptimalLoop, Examples) {
  const SmoothnessProfile p = SmoothnessProfile::from_constants(30, 12.0, 2.0, 0.5);
  EXPECT_DOUBLE_EQ(optimal_loop_continuous(1.0, p), 3.0 * 12.0 / 0.5);
  EXPECT_EQ(optimal_loop(1.0, p), 72u);
  EXPECT_DOUBLE_EQ(optimal_loop_continuous(30.0, p), 4.0);
  EXPECT_EQ(optimal_loop(30.0, p), 4u);
  const SmoothnessProfile easy = SmoothnessProfile::from_constants(5, 1.0, 1.0, 1.0);
  EXPECT_EQ(optimal_loop(5.0, easy), 1u);
}

TEST(OptimalLoop, GridOracle) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const SmoothnessProfile p = random_profile(rng, 300);
    const double b = 1.0 + std::floor(unit(rng) * static_cast<double>(p.n));
    const double cont = optimal_loop_continuous(b, p);
    const std::size_t m_star = optimal_loop(b, p);
    const auto top = static_cast<std::size_t>(std::ceil(4.0 * cont));
    double grid = INFINITY;
    for (std::size_t m = 1; m <= std::max<std::size_t>(top, 1); ++m) {
      grid = std::min(grid, total_complexity_free(b, static_cast<double>(m), p, 1e-4));
    }
    const double at_star = total_complexity_free(b, static_cast<double>(m_star), p, 1e-4);
    const double at_floor = total_complexity_free(b, std::max(1.0, std::floor(cont)), p, 1e-4);
    EXPECT_LE(std::min(at_star, at_floor), grid * (1.0 + 1e-9));
    // Rounding up costs at most a factor 1 + 1/m*, so 1.01 once m* >= 100.
    EXPECT_LE(at_star, grid * (1.0 + 1.0 / cont) * (1.0 + 1e-12));
    if (cont >= 100.0) {
      EXPECT_LE(at_star, 1.01 * grid);
    }
  }
}

TEST(OptimalBatch, TableCases) {
  // n >= 3 L_max / mu
  EXPECT_EQ(optimal_batch_m_eq_n(SmoothnessProfile::from_constants(1000, 10.0, 1.0, 0.1)).b, 1u);
  // n <= L / mu and L_max >= n L / 3
  EXPECT_EQ(optimal_batch_m_eq_n(SmoothnessProfile::from_constants(10, 8.0, 2.0, 0.01)).b, 10u);
  // n <= L / mu and L_max < n L / 3: floor(b_hat)
  const SmoothnessProfile hat = SmoothnessProfile::from_constants(100, 5.0, 1.0, 0.001);
  const double b_hat = std::sqrt(50.0 * 14.0 / 85.0);
  EXPECT_EQ(optimal_batch_m_eq_n(hat).b, static_cast<std::size_t>(std::floor(b_hat)));
  EXPECT_NEAR(optimal_batch_m_eq_n(hat).continuous, b_hat, 1e-12);
  // middle regime with L_max >= n L / 3: floor(b_tilde)
  const SmoothnessProfile tilde = SmoothnessProfile::from_constants(20, 100.0, 10.0, 1.0);
  const double b_tilde = (300.0 - 10.0) * 20.0 / (20.0 * 19.0 - 200.0 + 300.0);
  EXPECT_EQ(optimal_batch_m_eq_n(tilde).b, static_cast<std::size_t>(std::floor(b_tilde)));
  EXPECT_EQ(optimal_batch_m_eq_n(SmoothnessProfile::from_constants(1, 1.0, 1.0, 0.5)).b, 1u);
}

TEST(OptimalBatch, FullPassCases) {
  // n <= 3 L_max / L
  EXPECT_EQ(optimal_batch_m_eq_n_over_b(SmoothnessProfile::from_constants(6, 5.0, 1.0, 0.01)).b, 6u);
  // 3 L_max / L < n <= 3 L_max / mu
  EXPECT_EQ(optimal_batch_m_eq_n_over_b(SmoothnessProfile::from_constants(100, 5.0, 1.0, 0.01)).b, 1u);
}

TEST(OptimalBatch, LooplessCases) {
  EXPECT_EQ(optimal_batch_lsvrgd(SmoothnessProfile::from_constants(1000, 10.0, 1.0, 0.1)).b, 1u);
  EXPECT_EQ(optimal_batch_lsvrgd(SmoothnessProfile::from_constants(50, 2.0, 2.0, 0.001)).b, 1u);
}

TEST(OptimalBatch, GridOracleMEqN) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    const SmoothnessProfile p = random_profile(rng);
    const double n = static_cast<double>(p.n);
    const auto fn = [&](std::size_t b) { return total_complexity_free(static_cast<double>(b), n, p, 1e-4); };
    expect_neighbor_rule(optimal_batch_m_eq_n(p), brute_force_optimal_batch(p.n, fn), fn, p.n, p);
  }
}

TEST(OptimalBatch, GridOracleMEqNOverB) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const SmoothnessProfile p = random_profile(rng);
    const double n = static_cast<double>(p.n);
    const auto fn = [&](std::size_t b) {
      return total_complexity_free(static_cast<double>(b), n / static_cast<double>(b), p, 1e-4);
    };
    const BatchChoice choice = optimal_batch_m_eq_n_over_b(p);
    const GridOptimum grid = brute_force_optimal_batch(p.n, fn);
    // Every b up to floor(b_bar) is optimal, so b* itself must hit the minimum.
    EXPECT_LE(fn(choice.b), grid.complexity * (1.0 + 1e-9)) << choice.regime << " n=" << p.n;
  }
}

TEST(OptimalBatch, GridOracleLoopless) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const SmoothnessProfile p = random_profile(rng);
    const double inv_n = 1.0 / static_cast<double>(p.n);
    const auto fn = [&](std::size_t b) { return total_complexity_lsvrgd(static_cast<double>(b), inv_n, p, 1e-4); };
    expect_neighbor_rule(optimal_batch_lsvrgd(p), brute_force_optimal_batch(p.n, fn), fn, p.n, p);
  }
}

TEST(OptimalBatch, ConvexInBatchWhenIllConditioned) {
  std::mt19937_64 rng(9);
  int checked = 0;
  while (checked < 100) {
    const SmoothnessProfile p = random_profile(rng);
    const double n = static_cast<double>(p.n);
    if (n * p.strong_convexity > p.smoothness) continue;
    ++checked;
    for (std::size_t b = 2; b < p.n; ++b) {
      const double bd = static_cast<double>(b);
      const double c0 = total_complexity_free(bd - 1.0, n, p, 1e-4);
      const double c1 = total_complexity_free(bd, n, p, 1e-4);
      const double c2 = total_complexity_free(bd + 1.0, n, p, 1e-4);
      EXPECT_GE(c2 - 2.0 * c1 + c0, -1e-9 * c1);
    }
  }
}

TEST(BruteForce, TiesAndValues) {
  const GridOptimum flat = brute_force_optimal_batch(7, [](std::size_t) { return 3.0; });
  EXPECT_EQ(flat.b, 1u);
  const GridOptimum bowl = brute_force_optimal_batch(9, [](std::size_t b) {
    const double d = static_cast<double>(b) - 4.5;
    return d * d;
  });
  EXPECT_EQ(bowl.b, 4u);
  ASSERT_EQ(bowl.values.size(), 9u);
  for (std::size_t b = 1; b <= 9; ++b) {
    const double d = static_cast<double>(b) - 4.5;
    EXPECT_EQ(bowl.values[b - 1], d * d);
  }
  EXPECT_THROW(brute_force_optimal_batch(0, [](std::size_t) { return 0.0; }), ValidationError);
}

TEST(TuneTable, RowsAndLabels) {
  const SmoothnessProfile p = SmoothnessProfile::from_constants(200, 84.0, 1.5, 0.05);
  const TuneTable table = tuning_table(p, 1e-4);
  ASSERT_GE(table.rows.size(), 3u);
  EXPECT_EQ(table.rows.front().b, 1u);
  EXPECT_EQ(table.rows.back().b, 200u);
  bool starred = false;
  for (std::size_t k = 0; k < table.rows.size(); ++k) {
    const TuneRow& row = table.rows[k];
    if (k > 0) {
      EXPECT_LT(table.rows[k - 1].b, row.b);
    }
    if (row.b == table.optimum.b) {
      starred = true;
      EXPECT_NE(row.label.find("b*"), std::string::npos);
    }
    EXPECT_DOUBLE_EQ(row.alpha, step_size_free(static_cast<double>(row.b), p));
    EXPECT_EQ(row.m_star, optimal_loop(static_cast<double>(row.b), p));
    EXPECT_DOUBLE_EQ(row.complexity, total_complexity_free(static_cast<double>(row.b), 200.0, p, 1e-4));
  }
  EXPECT_TRUE(starred);
  const TuneTable all = tuning_table(p, 1e-4, true);
  EXPECT_EQ(all.rows.size(), 200u);
  EXPECT_EQ(all.rows[13].label, "sqrt(n)");
}

}  // namespace
}  // namespace arbsvrg
