#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "arbsvrg/dataset.hpp"
#include "arbsvrg/errors.hpp"

namespace arbsvrg {
namespace {

TEST(ParseLibsvm, ReadsSparseRow) {
  const Dataset ds = parse_libsvm_text("1 1:0.5 3:2.0\n", "t");
  ASSERT_EQ(ds.n(), 1u);
  EXPECT_EQ(ds.d(), 3u);
  EXPECT_EQ(ds.value(0, 0), 0.5);
  EXPECT_EQ(ds.value(0, 1), 0.0);
  EXPECT_EQ(ds.value(0, 2), 2.0);
  EXPECT_EQ(ds.label(0), 1.0);
}

TEST(ParseLibsvm, RemapsZeroOneLabels) {
  const Dataset ds = parse_libsvm_text("0 2:1.0\n1 1:1.0\n", "t");
  EXPECT_EQ(ds.label(0), -1.0);
  EXPECT_EQ(ds.label(1), 1.0);
}

TEST(ParseLibsvm, RemapsOneTwoLabels) {
  const Dataset ds = parse_libsvm_text("1 1:1\n2 1:1\n", "t");
  EXPECT_EQ(ds.label(0), -1.0);
  EXPECT_EQ(ds.label(1), 1.0);
}

TEST(ParseLibsvm, KeepsSignedLabelsAndPlusSign) {
  const Dataset ds = parse_libsvm_text("+1 1:1\n-1 2:1\n", "t");
  EXPECT_EQ(ds.label(0), 1.0);
  EXPECT_EQ(ds.label(1), -1.0);
}

TEST(ParseLibsvm, RegressionLabelsUntouched) {
  const Dataset ds = parse_libsvm_text("0.25 1:1\n3.5 1:2\n", "t");
  EXPECT_EQ(ds.label(0), 0.25);
  EXPECT_EQ(ds.label(1), 3.5);
}

TEST(ParseLibsvm, DimensionIsMaxIndex) {
  const Dataset ds = parse_libsvm_text("1 1:1\n-1 2:1 5:1\n1 3:1\n-1 4:2\n", "t");
  EXPECT_EQ(ds.n(), 4u);
  EXPECT_EQ(ds.d(), 5u);
}

TEST(ParseLibsvm, CommentsAndBlankLines) {
  const Dataset ds = parse_libsvm_text("# header\n\n1 1:1 # trailing\n  \n-1 2:3\n", "t");
  EXPECT_EQ(ds.n(), 2u);
  EXPECT_EQ(ds.value(1, 1), 3.0);
}

TEST(ParseLibsvm, DimensionOverride) {
  ParseOptions opts;
  opts.dimension = 10;
  EXPECT_EQ(parse_libsvm_text("1 1:1\n", "t", opts).d(), 10u);
  opts.dimension = 1;
  EXPECT_THROW(parse_libsvm_text("1 3:1\n", "t", opts), ValidationError);
}

TEST(ParseLibsvm, ReportsLineNumbers) {
  try {
    parse_libsvm_text("1 1:1\n1 2:x\n", "t");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  try {
    parse_libsvm_text("1 1:1\n\nabc 1:1\n", "t");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(ParseLibsvm, RejectsMalformedInput) {
  EXPECT_THROW(parse_libsvm_text("", "t"), ParseError);
  EXPECT_THROW(parse_libsvm_text("# only comments\n", "t"), ParseError);
  EXPECT_THROW(parse_libsvm_text("1 3:1 2:1\n", "t"), ParseError);  // decreasing
  EXPECT_THROW(parse_libsvm_text("1 2:1 2:1\n", "t"), ParseError);  // repeated
  EXPECT_THROW(parse_libsvm_text("1 0:1\n", "t"), ParseError);      // 0-based
  EXPECT_THROW(parse_libsvm_text("1 1-1\n", "t"), ParseError);
  EXPECT_THROW(parse_libsvm_text("1 1:nan\n", "t"), ParseError);
}

TEST(ParseLibsvm, MissingFileNamesPath) {
  try {
    parse_libsvm("/definitely/not/here.svm");
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("/definitely/not/here.svm"), std::string::npos);
  }
}

TEST(Dataset, PicksStorageFromDensity) {
  EXPECT_EQ(parse_libsvm_text("1 1:1 2:1\n-1 1:1 2:1\n", "t").storage(), Dataset::Storage::dense);
  EXPECT_EQ(parse_libsvm_text("1 1:1\n-1 4:1\n", "t").storage(), Dataset::Storage::sparse);
}

TEST(Dataset, SparseAndDenseAgree) {
  const std::string text = "1 1:1 3:2\n-1 2:-1\n1 3:0.5\n";
  const Dataset sparse = parse_libsvm_text(text, "t");
  ASSERT_EQ(sparse.storage(), Dataset::Storage::sparse);
  const Dataset dense = Dataset::from_dense("t", sparse.to_dense(), sparse.labels());
  ASSERT_EQ(dense.storage(), Dataset::Storage::dense);
  Vector x(3);
  x << 0.3, -1.2, 2.0;
  Vector ms, md;
  sparse.multiply(x, ms);
  dense.multiply(x, md);
  EXPECT_TRUE(ms.isApprox(md, 1e-15));
  Vector r(3);
  r << 1.0, 2.0, -0.5;
  Vector ts, td;
  sparse.multiply_transpose(r, ts);
  dense.multiply_transpose(r, td);
  EXPECT_TRUE(ts.isApprox(td, 1e-15));
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_DOUBLE_EQ(sparse.row_dot(i, x), dense.row_dot(i, x));
    EXPECT_DOUBLE_EQ(sparse.row_squared_norm(i), dense.row_squared_norm(i));
  }
  EXPECT_TRUE(sparse == dense);
}

TEST(Dataset, RejectsInvalidConstruction) {
  EXPECT_THROW(Dataset::from_rows("t", 2, {}, {}), ValidationError);
  EXPECT_THROW(Dataset::from_rows("t", 2, {{{2, 1.0}}}, {1.0}), ValidationError);
  EXPECT_THROW(Dataset::from_rows("t", 2, {{{0, 1.0}}}, {1.0, 2.0}), ValidationError);
  EXPECT_THROW(Dataset::from_rows("t", 0, {{}}, {1.0}), ValidationError);
}

// Hand-rolled generator of random sparse datasets for the round-trip property.
Dataset random_sparse_dataset(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> size(1, 30);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 3.0);
  const std::size_t n = size(rng);
  const std::size_t d = size(rng);
  const double density = unit(rng);
  std::vector<std::vector<Feature>> rows(n);
  std::vector<double> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      if (unit(rng) < density) rows[i].push_back({j, gauss(rng) * std::pow(10.0, gauss(rng))});
    }
    labels[i] = gauss(rng);
  }
  return Dataset::from_rows("random", d, rows, labels);
}

TEST(DatasetProperty, LibsvmRoundTrip) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const Dataset ds = random_sparse_dataset(rng);
    ParseOptions opts;
    opts.dimension = ds.d();
    opts.remap_binary_labels = false;
    const Dataset back = parse_libsvm_text(to_libsvm_text(ds), "random", opts);
    ASSERT_TRUE(back == ds) << "trial " << trial;
  }
}

TEST(DatasetProperty, FileRoundTrip) {
  std::mt19937_64 rng(7);
  const Dataset ds = random_sparse_dataset(rng);
  const auto path = std::filesystem::temp_directory_path() / "arbsvrg_roundtrip.svm";
  write_libsvm(ds, path);
  ParseOptions opts;
  opts.dimension = ds.d();
  opts.remap_binary_labels = false;
  EXPECT_TRUE(parse_libsvm(path, opts) == ds);
  std::filesystem::remove(path);
}

TEST(Synthetic, Deterministic) {
  SyntheticSpec spec;
  spec.n = 5;
  spec.d = 3;
  spec.seed = 7;
  const Dataset a = generate_synthetic(spec);
  const Dataset b = generate_synthetic(spec);
  EXPECT_TRUE(a == b);
  EXPECT_EQ(a.to_dense(), b.to_dense());
  spec.seed = 8;
  EXPECT_FALSE(generate_synthetic(spec) == a);
}

TEST(Synthetic, ShapeAndFiniteLabels) {
  SyntheticSpec spec;
  spec.n = 1000;
  spec.d = 50;
  spec.seed = 1;
  const Dataset ds = generate_synthetic(spec);
  EXPECT_EQ(ds.n(), 1000u);
  EXPECT_EQ(ds.d(), 50u);
  EXPECT_TRUE(ds.labels().allFinite());
}

TEST(Synthetic, NoiselessRegressionIsLinear) {
  SyntheticSpec spec;
  spec.n = 40;
  spec.d = 6;
  spec.seed = 3;
  const Dataset ds = generate_synthetic(spec);
  // Recover x_true by least squares; with n > d and no noise the fit is exact.
  const Eigen::MatrixXd a = ds.to_dense();
  const Vector x = a.colPivHouseholderQr().solve(ds.labels());
  EXPECT_LT((a * x - ds.labels()).norm(), 1e-10 * ds.labels().norm());
}

TEST(Synthetic, ClassificationLabelsAreSigns) {
  SyntheticSpec spec;
  spec.n = 200;
  spec.d = 4;
  spec.kind = TaskKind::classification;
  spec.noise = 0.1;
  const Dataset ds = generate_synthetic(spec);
  for (std::size_t i = 0; i < ds.n(); ++i) {
    EXPECT_TRUE(ds.label(i) == 1.0 || ds.label(i) == -1.0);
  }
  spec.noise = 1.5;
  EXPECT_THROW(generate_synthetic(spec), ValidationError);
}

TEST(ScaleColumns, UnitNormArithmetic) {
  DenseRows a(2, 2);
  a << 3.0, 0.0, 4.0, 0.0;
  const Dataset ds = Dataset::from_dense("t", a, Vector::Ones(2));
  const Dataset scaled = scale_columns(ds);
  EXPECT_EQ(scaled.value(0, 0), 0.6);
  EXPECT_EQ(scaled.value(1, 0), 0.8);
  EXPECT_EQ(scaled.value(0, 1), 0.0);  // zero column unchanged
  EXPECT_EQ(scaled.value(1, 1), 0.0);
}

TEST(ScaleColumns, IdempotentAndUnitNorm) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const Dataset ds = random_sparse_dataset(rng);
    const Dataset once = scale_columns(ds);
    const Dataset twice = scale_columns(once);
    ASSERT_TRUE(once == twice) << "trial " << trial;
    const Eigen::MatrixXd dense = once.to_dense();
    for (Eigen::Index j = 0; j < dense.cols(); ++j) {
      const double norm = dense.col(j).norm();
      if (norm != 0.0) {
        EXPECT_NEAR(norm, 1.0, 1e-12);
      }
    }
  }
}

}  // namespace
}  // namespace arbsvrg
