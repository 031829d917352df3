#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "rrm/dynamics.hpp"
#include "rrm/errors.hpp"

using namespace rrm;

namespace {

Vec vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

VectorField linear(int d, double s) {
  return VectorField::custom(Manifold::euclidean(d), [s](const Vec& x) -> Vec { return s * x; }, std::abs(s));
}

OracleSpec oracle_of(VectorField f, double sigma = 0.0) { return {std::move(f), sigma, NoiseKind::kGaussian, std::nullopt}; }

// Plain ambient RK4 for x' = V(x) with a tiny step; V is tangent, so the
// exact solution stays on the manifold.
Vec ambient_rk4(const VectorField& f, Vec x, double h, int steps) {
  const double d = h / steps;
  for (int i = 0; i < steps; ++i) {
    const Vec k1 = f(x), k2 = f(x + d / 2 * k1), k3 = f(x + d / 2 * k2), k4 = f(x + d * k3);
    x += d / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return x;
}

Trajectory rsgm(const OracleSpec& o, const StepSchedule& s, const Vec& x0, std::size_t n, std::uint64_t seed = 1) {
  return run(AlgorithmSpec{}, o, s, x0, n, seed);
}

}  // namespace

TEST(FlowExamples, ZeroFieldIsStationary) {
  const FlowIntegrator fi{VectorField::zero(Manifold::sphere(2))};
  const Vec x = vec({0, 0.6, 0.8});
  EXPECT_EQ(flow(fi, x, 3.0), x);
  EXPECT_EQ(flow(fi, x, 0.0), x);
}

TEST(FlowExamples, LinearDecay) {
  const FlowIntegrator fi{linear(1, -1), 1e-3, FlowScheme::kGeodesicRK4};
  EXPECT_NEAR(flow(fi, vec({1}), 1.0)(0), std::exp(-1.0), 1e-6);
  EXPECT_NEAR(flow(fi, vec({1}), 1.0)(0), 0.36788, 1e-5);
}

TEST(FlowExamples, CyclingOrbitReturnsAfterTwoPi) {
  const FlowIntegrator fi{VectorField::cycling(), 1e-3, FlowScheme::kGeodesicRK4};
  const Vec x = vec({std::sqrt(3.0) / 2, 0, 0.5});
  EXPECT_LT((flow(fi, x, 2 * M_PI) - x).norm(), 1e-4);
  // a quarter turn lands at (0, sqrt3/2, 1/2)
  EXPECT_LT((flow(fi, x, M_PI / 2) - vec({0, std::sqrt(3.0) / 2, 0.5})).norm(), 1e-6);
}

TEST(FlowExamples, CyclingCircleAttracts) {
  const FlowIntegrator fi{VectorField::cycling(), 1e-2, FlowScheme::kGeodesicRK4};
  for (double z0 : {-0.3, 0.1, 0.8}) {
    const Vec x = vec({std::sqrt(1 - z0 * z0), 0, z0});
    EXPECT_LT(std::abs(flow(fi, x, 60.0)(2) - 0.5), 1e-4) << z0;
  }
}

TEST(FlowOracle, MatchesAmbientIntegration) {
  const auto f = VectorField::cycling();
  const FlowIntegrator fi{f, 1e-3, FlowScheme::kGeodesicRK4};
  SplitMix64 rng(4);
  for (int i = 0; i < 5; ++i) {
    const Vec x = f.manifold().random_point(rng);
    EXPECT_LT((flow(fi, x, 3.0) - ambient_rk4(f, x, 3.0, 30000)).norm(), 1e-9);
  }
}

TEST(FlowOracle, FlowGridAgreesWithFlow) {
  const FlowIntegrator fi{VectorField::cycling(), 1e-3, FlowScheme::kGeodesicRK4};
  const Vec x = vec({0.6, 0, 0.8});
  const auto grid = flow_grid(fi, x, 0.25, 8);
  ASSERT_EQ(grid.size(), 9u);
  for (int j = 0; j <= 8; ++j) EXPECT_LT((grid[j] - flow(fi, x, 0.25 * j)).norm(), 1e-12);
}

TEST(FlowInvariants, IntegratorOrders) {
  const auto f = linear(1, -1);
  auto err = [&](FlowScheme s, double h) {
    return std::abs(flow(FlowIntegrator{f, h, s}, vec({1}), 1.0)(0) - std::exp(-1.0));
  };
  const double euler = std::log2(err(FlowScheme::kGeodesicEuler, 1e-2) / err(FlowScheme::kGeodesicEuler, 5e-3));
  const double rk4 = std::log2(err(FlowScheme::kGeodesicRK4, 1e-1) / err(FlowScheme::kGeodesicRK4, 5e-2));
  EXPECT_NEAR(euler, 1.0, 0.05);
  EXPECT_NEAR(rk4, 4.0, 0.15);
}

TEST(FlowInvariants, Rk4OrderOnTheSphere) {
  const auto f = VectorField::cycling();
  const Vec x = vec({0.8, 0, 0.6});
  const Vec ref = ambient_rk4(f, x, 2.0, 40000);
  auto err = [&](double h) { return (flow(FlowIntegrator{f, h, FlowScheme::kGeodesicRK4}, x, 2.0) - ref).norm(); };
  // Stage vectors transported to the base point: fourth order on flat space
  // (IntegratorOrders), third order once curvature enters.
  EXPECT_GT(std::log2(err(0.1) / err(0.05)), 2.9);
}

TEST(FlowInvariants, GronwallBound) {
  // |V(0)| <= 1, L = 2
  const auto f = VectorField::custom(Manifold::euclidean(2), [](const Vec& x) -> Vec {
    return vec({-x(0) + std::sin(x(1)), -x(1) + std::cos(x(0))}) / std::sqrt(2.0);
  });
  const FlowIntegrator fi{f, 1e-3};
  SplitMix64 rng(8);
  for (int i = 0; i < 20; ++i) {
    const Vec x = f.manifold().random_point(rng, 5.0);
    for (double h : {0.5, 1.0, 3.0}) {
      EXPECT_LE(flow(fi, x, h).norm(), (x.norm() + h) * std::exp(2 * h));
    }
  }
}

// ---------------------------------------------------------------------------
// Interpolation

TEST(Interpolation, AnchorsAndSegments) {
  const auto tr = rsgm(oracle_of(linear(2, -1), 0.5), StepSchedule::power_law(0.5, 1), vec({3, -1}), 50);
  const InterpolatedPath path(tr);
  for (std::size_t i = 0; i < tr.size(); ++i) EXPECT_LT((path(tr.times[i]) - tr.states[i]).norm(), 1e-14);
  for (std::size_t i = 0; i + 1 < tr.size(); ++i) {
    const double mid = 0.5 * (tr.times[i] + tr.times[i + 1]);
    EXPECT_LT((interpolate(path, mid) - 0.5 * (tr.states[i] + tr.states[i + 1])).norm(), 1e-14);
  }
  EXPECT_THROW(path(-0.1), RangeError);
  EXPECT_THROW(path(tr.horizon() + 1e-9), RangeError);
  EXPECT_EQ(path.segment(tr.horizon()), tr.size() - 1);
}

TEST(Interpolation, SpherePathStaysOnTheSphere) {
  Vec d(3);
  d << 3, 2, 1;
  const auto o = oracle_of(VectorField::negative_gradient(RayleighQuotient{d.asDiagonal().toDenseMatrix(), true}), 0.2);
  const auto tr = rsgm(o, StepSchedule::window(1, 1, 0.5), vec({0, 0.6, 0.8}), 500);
  const InterpolatedPath path(tr);
  SplitMix64 rng(2);
  std::uniform_real_distribution<double> u(0.0, tr.horizon());
  for (int i = 0; i < 100; ++i) EXPECT_LT(std::abs(path(u(rng)).norm() - 1.0), 1e-10);
}

TEST(Interpolation, LipschitzInTime) {
  Vec d(3);
  d << 3, 2, 1;
  const auto f = VectorField::negative_gradient(RayleighQuotient{d.asDiagonal().toDenseMatrix(), true});
  const auto tr = rsgm(oracle_of(f, 0.2), StepSchedule::window(1, 1, 0.5), vec({0, 0.6, 0.8}), 500);
  const InterpolatedPath path(tr);
  double u_max = 0;
  for (const auto& r : tr.records) u_max = std::max(u_max, r.error().norm());
  const double bound = *f.sup_bound() + u_max;
  for (std::size_t i = 0; i + 1 < tr.size(); i += 7) {
    const double a = tr.times[i] + 0.1 * tr.steps[i], b = tr.times[i] + 0.8 * tr.steps[i];
    EXPECT_LE(tr.manifold.dist(path(a), path(b)), bound * (b - a) + 1e-12);
  }
}

// ---------------------------------------------------------------------------
// APT deviation

TEST(Apt, ZeroFieldGivesZero) {
  const auto o = oracle_of(VectorField::zero(Manifold::sphere(2)));
  const auto tr = rsgm(o, StepSchedule::window(1, 1, 0.5), vec({0, 0.6, 0.8}), 200);
  const InterpolatedPath path(tr);
  EXPECT_EQ(apt_deviation(path, FlowIntegrator{o.field}, 1.0, 1.0, 50), 0.0);
  EXPECT_THROW(apt_deviation(path, FlowIntegrator{o.field}, tr.horizon() - 0.5, 1.0, 50), RangeError);
}

TEST(Apt, DeviationDecaysOnALinearField) {
  const auto o = oracle_of(linear(1, -1));
  // c = 1 would land on the fixed point in one step
  const auto tr = rsgm(o, StepSchedule::power_law(0.5, 1), vec({1}), 10000);
  const InterpolatedPath path(tr);
  const FlowIntegrator fi{o.field, 1e-4};
  for (double horizon : {0.5, 1.0, 2.0}) {
    const int k = static_cast<int>(200 * horizon);
    const double late = apt_deviation(path, fi, tr.horizon() / 2, horizon, k);
    const double early = apt_deviation(path, fi, tr.horizon() / 4, horizon, k);
    EXPECT_LT(late, early) << horizon;
    EXPECT_GT(late, 0.0) << horizon;
  }
}

TEST(Apt, MatchesExactSolutionOracle) {
  // the flow of V = -x is x e^{-h}; the interpolated path is piecewise linear
  const auto o = oracle_of(linear(1, -1));
  const auto tr = rsgm(o, StepSchedule::power_law(0.3, 1), vec({2}), 400);
  const InterpolatedPath path(tr);
  const double t = 0.7, T = 0.5;
  const int k = 100;
  double ref = 0;
  const double x0 = path(t)(0);
  for (int j = 0; j <= k; ++j) ref = std::max(ref, std::abs(path(t + j * T / k)(0) - x0 * std::exp(-j * T / k)));
  EXPECT_NEAR(apt_deviation(path, FlowIntegrator{o.field, 1e-4}, t, T, k), ref, 1e-10);
}

TEST(Apt, ReportAndCsv) {
  const auto o = oracle_of(linear(2, -1), 0.1);
  const auto tr = rsgm(o, StepSchedule::power_law(1, 1), vec({1, 1}), 2000);
  const InterpolatedPath path(tr);
  const auto rows = apt_report(path, FlowIntegrator{o.field, 0.0}, {0.5, 1.5, 3.0}, 1.0, 50);
  ASSERT_EQ(rows.size(), 3u);
  for (const auto& r : rows) {
    EXPECT_EQ(r.grid_k, 50);
    EXPECT_GE(r.deviation, 0.0);
    const double vmax = path.max_signal(r.t, r.t + 1.0);
    EXPECT_GE(r.refinement_bound, vmax / 50 - 1e-15);
  }
  std::ostringstream os;
  write_apt_csv(os, rows);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "t,T,D,refinement_bound");
}

TEST(Apt, DefaultMicroStep) {
  const auto o = oracle_of(linear(1, -1));
  const auto tr = rsgm(o, StepSchedule::power_law(1, 1), vec({1}), 5000);
  const InterpolatedPath path(tr);
  EXPECT_DOUBLE_EQ(default_h_step(path, 0.0, 1.0), 1e-3);
  const double t = tr.horizon() - 1.0;
  EXPECT_DOUBLE_EQ(default_h_step(path, t, 1.0), path.min_step(t, t + 1.0) / 10);
  EXPECT_DOUBLE_EQ(path.min_step(t, tr.horizon()), tr.steps.back());
}

// ---------------------------------------------------------------------------
// Picard flow

TEST(Picard, ConstantAndZeroFields) {
  const auto c = VectorField::custom(Manifold::euclidean(2), [](const Vec&) -> Vec { return vec({1, -2}); });
  const auto tr = rsgm(oracle_of(c, 0.3), StepSchedule::power_law(0.5, 1), vec({0, 0}), 300);
  const InterpolatedPath path(tr);
  for (double h : {0.1, 0.5, 1.0}) {
    EXPECT_LT((picard_flow(path, c, 0.3, h, 1e-3) - (path(0.3) + h * vec({1, -2}))).norm(), 1e-12);
    const auto z = VectorField::zero(Manifold::euclidean(2));
    EXPECT_EQ(picard_flow(path, z, 0.3, h, 1e-3), path(0.3));
  }
}

TEST(Picard, SpeedIsPreservedByTransport) {
  const auto f = VectorField::cycling();
  const auto tr = rsgm(oracle_of(f, 0.1), StepSchedule::window(1, 1, 0.5), vec({0.6, 0, 0.8}), 3000);
  const InterpolatedPath path(tr);
  const auto trace = picard_trace(path, f, 2.0, 1.0, 1e-3);
  ASSERT_GT(trace.speed.size(), 100u);
  for (std::size_t k = 0; k < trace.speed.size(); ++k) EXPECT_NEAR(trace.speed[k], trace.field_speed[k], 1e-9);
  for (const auto& p : trace.points) EXPECT_LT(std::abs(p.norm() - 1), 1e-10);
}

TEST(Picard, ApproachesTheFlowAlongADeterministicRun) {
  const auto f = VectorField::cycling();
  const auto tr = rsgm(oracle_of(f), StepSchedule::power_law(0.5, 0.75), vec({0.6, 0, 0.8}), 20000);
  const InterpolatedPath path(tr);
  const FlowIntegrator fi{f, 1e-4};
  auto gap = [&](double t) { return tr.manifold.dist(picard_flow(path, f, t, 1.0, 1e-5), flow(fi, path(t), 1.0)); };
  const double e = gap(1.0), m = gap(tr.horizon() / 2), l = gap(tr.horizon() - 1.0);
  EXPECT_GT(e, m);
  EXPECT_GT(m, l);
  const double dev = picard_deviation(path, f, tr.horizon() - 1.0, 1.0, 100, 1e-3);
  EXPECT_GE(dev, 0.0);
  EXPECT_LT(dev, 0.05);
}
