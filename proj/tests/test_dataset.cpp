#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>

#include "dsm/dataset.hpp"

using namespace dsm;

TEST(Dataset, SortsAndMeasuresSpacing) {
  const auto ds = Dataset::from_points({3.0, 1.0, 2.0});
  EXPECT_EQ(ds.points(), (std::vector<double>{1.0, 2.0, 3.0}));
  EXPECT_EQ(ds.delta(), 1.0);
}

TEST(Dataset, SinglePointHasNoSpacing) {
  const auto ds = Dataset::from_points({0.0});
  EXPECT_EQ(ds.n(), 1u);
  EXPECT_FALSE(ds.has_delta());
  EXPECT_THROW(ds.delta(), Error);
}

TEST(Dataset, RejectsDuplicatesAndEmpty) {
  try {
    Dataset::from_points({1.0, 2.0, 1.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DuplicatePoint);
  }
  EXPECT_THROW(Dataset::from_points(std::span<const double>()), Error);
}

TEST(Dataset, DeltaMatchesBruteForce) {
  const auto ds = gaussian_dataset(20, 1.0, 7);
  const auto& x = ds.points();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j)
      if (i != j) best = std::min(best, std::abs(x[i] - x[j]));
  EXPECT_EQ(ds.delta(), best);
}

TEST(Dataset, DeltaUnderTranslationAndScaling) {
  const auto ds = gaussian_dataset(15, 1.0, 3);
  std::vector<double> shifted, scaled;
  for (double x : ds.points()) {
    shifted.push_back(x + 0.5);
    scaled.push_back(4.0 * x);
  }
  EXPECT_NEAR(Dataset::from_points(shifted).delta(), ds.delta(), 1e-14);
  EXPECT_DOUBLE_EQ(Dataset::from_points(scaled).delta(), 4.0 * ds.delta());
  EXPECT_EQ(Dataset::from_points(ds.points()).points(), ds.points());
}

TEST(SampleGaussian, MeanWithinSanityBound) {
  const Samples s = sample_gaussian(20, 1, 1.0, 11);
  EXPECT_LT(std::abs(s.mean()), 4.0 / std::sqrt(20.0));
}

TEST(SampleGaussian, ShapeAndDeterminism) {
  const Samples a = sample_gaussian(10, 2, 2.0, 5), b = sample_gaussian(10, 2, 2.0, 5);
  EXPECT_EQ(a.rows(), 10);
  EXPECT_EQ(a.cols(), 2);
  EXPECT_TRUE((a.array() == b.array()).all());
  EXPECT_FALSE((a.array() == sample_gaussian(10, 2, 2.0, 6).array()).all());
}

TEST(SampleGaussian, StandardDeviationScales) {
  const Samples s = sample_gaussian(20000, 1, 2.0, 1);
  const double var = (s.array() - s.mean()).square().mean();
  EXPECT_NEAR(std::sqrt(var), 2.0, 0.05);
}

TEST(DatasetIo, RoundTrip) {
  const auto path = (std::filesystem::temp_directory_path() / "dsm_dataset_roundtrip.txt").string();
  const auto ds = gaussian_dataset(12, 1.0, 2);
  save_dataset(path, ds);
  EXPECT_EQ(load_dataset(path).points(), ds.points());
  const Samples s = sample_gaussian(5, 3, 1.0, 4);
  write_samples_csv(path, s, "header line");
  EXPECT_TRUE((read_samples_csv(path).array() == s.array()).all());
  std::remove(path.c_str());
}

TEST(DatasetIo, ReportsBadCells) {
  const auto path = (std::filesystem::temp_directory_path() / "dsm_dataset_bad.txt").string();
  {
    std::ofstream out(path);
    out << "1.0\nabc\n";
  }
  EXPECT_THROW(load_dataset(path), Error);
  std::remove(path.c_str());
}
