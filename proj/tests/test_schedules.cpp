#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "rrm/errors.hpp"
#include "rrm/oracle.hpp"
#include "rrm/schedules.hpp"

using rrm::StepSchedule;

TEST(ScheduleExamples, Values) {
  const auto w = StepSchedule::window(1, 1, 0.5);
  EXPECT_NEAR(w.gamma(100), 1.0 / (10.0 * std::log(100.0)), 1e-15);
  EXPECT_NEAR(w.gamma(100), 0.021715, 1e-6);
  EXPECT_NEAR(w.gamma(2), std::max(0.5, 1.0 / (std::sqrt(2.0) * std::log(2.0))), 1e-15);
  // 1 / (sqrt(2) ln 2) = 1.020139...
  EXPECT_NEAR(w.gamma(2), 1.0201, 1e-4);
  EXPECT_DOUBLE_EQ(StepSchedule::power_law(1, 1).gamma(10), 0.1);
  EXPECT_DOUBLE_EQ(w.step(1), w.gamma(2));
}

TEST(ScheduleExamples, RejectsBadParameters) {
  EXPECT_THROW(StepSchedule::window(1, 1, 0.5).gamma(1), rrm::InvalidArgument);
  EXPECT_THROW(StepSchedule::window(1, 1, 0.5, 1), rrm::InvalidArgument);
  EXPECT_THROW(StepSchedule::window(0, 1, 0.5), rrm::InvalidArgument);
  EXPECT_THROW(StepSchedule::window(1, 1, 0), rrm::InvalidArgument);
  EXPECT_THROW(StepSchedule::power_law(-1, 1), rrm::InvalidArgument);
}

TEST(ScheduleExamples, Classify) {
  EXPECT_TRUE(rrm::classify(StepSchedule::power_law(3, 1)).rm_valid());
  const auto bad = rrm::classify(StepSchedule::power_law(1, 0.4));
  EXPECT_FALSE(bad.rm_valid());
  EXPECT_FALSE(bad.square_summable);
  EXPECT_FALSE(rrm::classify(StepSchedule::power_law(1, 1.5)).sum_diverges);
  for (double a : {0.1, 1.0, 5.0})
    for (double b : {0.5, 1.0, 3.0})
      for (double eps : {0.1, 0.5, 1.0}) EXPECT_TRUE(rrm::classify(StepSchedule::window(a, b, eps)).rm_valid());
}

TEST(ScheduleInvariants, PositiveAndEventuallyDecreasing) {
  for (const auto& s : {StepSchedule::window(1, 1, 0.5), StepSchedule::window(5, 0.5, 0.1),
                        StepSchedule::power_law(2, 0.6)}) {
    double prev = s.gamma(s.n0());
    for (std::uint64_t n = s.n0() + 1; n < 200000; ++n) {
      const double g = s.gamma(n);
      ASSERT_GT(g, 0.0);
      if (n > 100) ASSERT_LE(g, prev) << s.describe() << " n=" << n;
      prev = g;
    }
  }
}

TEST(ScheduleInvariants, WindowLowerBoundAlwaysHolds) {
  const auto s = StepSchedule::window(5, 0.5, 0.25);
  for (std::uint64_t n = 2; n < 100000; ++n) ASSERT_GE(s.gamma(n), 5.0 / static_cast<double>(n));
}

TEST(ScheduleInvariants, WindowStartMatchesBruteForce) {
  const std::uint64_t n_max = 200000;
  for (const auto& [a, b, eps] : std::vector<std::tuple<double, double, double>>{
           {1, 1, 0.5}, {5, 1, 0.5}, {20, 1, 0.25}, {3, 0.5, 1.0}}) {
    const auto s = StepSchedule::window(a, b, eps);
    const auto cls = rrm::classify(s);
    const auto brute = rrm::window_entry(s, a, b, eps, n_max);
    ASSERT_TRUE(cls.window_start.has_value());
    ASSERT_TRUE(brute.has_value());
    EXPECT_EQ(*cls.window_start, *brute) << a << " " << b << " " << eps;
  }
}

TEST(ScheduleInvariants, DyadicAuditAgreesWithClassification) {
  const std::size_t n = 1 << 20;
  for (double rho : {0.4, 0.6, 1.0}) {
    const auto s = StepSchedule::power_law(1, rho);
    std::vector<double> g(n), sigma(n, 1.0), bias(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) g[k] = s.step(k + 1);
    const auto audit = rrm::audit_error_bounds(g, sigma, bias);
    EXPECT_EQ(audit.noise.convergent, rrm::classify(s).square_summable) << rho;
    // sum gamma diverges in all three cases
    EXPECT_FALSE(rrm::dyadic_series_audit(g).convergent) << rho;
  }
}
