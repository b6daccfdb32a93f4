#pragma once

#include <cmath>
#include <memory>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "arbsvrg/dataset.hpp"
#include "arbsvrg/problem.hpp"

namespace arbsvrg::test {

/// Small dense problem with Gaussian rows; labels are +-1 for classification.
inline std::shared_ptr<const Dataset> random_dataset(std::size_t n, std::size_t d,
                                                     std::uint64_t seed,
                                                     bool classification = false) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  DenseRows a(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  Vector y(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    // Uneven row scales so that L_max is well above L.
    const double scale = 0.5 + 1.5 * static_cast<double>(i % 3);
    for (Eigen::Index j = 0; j < a.cols(); ++j) a(i, j) = scale * gauss(rng);
    const double t = gauss(rng);
    y[i] = classification ? (t >= 0.0 ? 1.0 : -1.0) : t;
  }
  return std::make_shared<const Dataset>(Dataset::from_dense("test", a, y));
}

inline Vector random_vector(std::size_t d, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> gauss(0.0, scale);
  Vector v(static_cast<Eigen::Index>(d));
  for (auto& c : v) c = gauss(rng);
  return v;
}

/// Direct dense formulas, independent of the library's row primitives.
struct DenseRidge {
  Eigen::MatrixXd a;
  Vector y;
  double lambda;

  explicit DenseRidge(const LossModel& model)
      : a(model.data().to_dense()), y(model.data().labels()), lambda(model.lambda()) {}

  double n() const { return static_cast<double>(a.rows()); }
  Vector grad_i(const Vector& x, Eigen::Index i) const {
    return (a.row(i).dot(x) - y[i]) * a.row(i).transpose() + lambda * x;
  }
  Eigen::MatrixXd hessian() const {
    Eigen::MatrixXd h = a.transpose() * a / n();
    h.diagonal().array() += lambda;
    return h;
  }
  Vector minimizer() const {
    return hessian().ldlt().solve(a.transpose() * y / n());
  }
};

}  // namespace arbsvrg::test
