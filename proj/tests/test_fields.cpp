#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "rrm/errors.hpp"
#include "rrm/fields.hpp"

using rrm::Manifold;
using rrm::Mat;
using rrm::Vec;
using rrm::VectorField;

namespace {

Vec vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

VectorField linear(int d, double s) {
  return VectorField::custom(Manifold::euclidean(d), [s](const Vec& x) -> Vec { return s * x; });
}

rrm::FrechetMean five_anchors() {
  const auto h = Manifold::hyperbolic(2);
  rrm::FrechetMean f;
  rrm::SplitMix64 rng(99);
  for (int i = 0; i < 5; ++i) f.anchors.push_back(h.random_point(rng, 1.5));
  f.weights = {0.3, 0.2, 0.2, 0.15, 0.15};
  return f;
}

}  // namespace

TEST(FieldExamples, Rayleigh) {
  const auto f = VectorField::negative_gradient(rrm::RayleighQuotient{Eigen::Vector2d(2, 1).asDiagonal().toDenseMatrix()});
  EXPECT_EQ(f(vec({1, 0})), Vec::Zero(2));
  const double r = 1 / std::sqrt(2.0);
  const Vec v = f.eval({vec({r, r})}).vec;
  EXPECT_NEAR(v(0), -0.70711, 1e-5);
  EXPECT_NEAR(v(1), 0.70711, 1e-5);
}

TEST(FieldExamples, Cycling) {
  const auto f = VectorField::cycling();
  EXPECT_LT((f(vec({1, 0, 0})) - vec({0, 1, 0.25})).norm(), 1e-15);
  EXPECT_EQ(f(vec({0, 0, 1})), Vec::Zero(3));
  EXPECT_THROW(f.eval({vec({1, 1, 0})}), rrm::InvalidArgument);
}

TEST(FieldExamples, BilinearGameField) {
  const auto f = VectorField::game(rrm::bilinear_game(Mat::Identity(1, 1)));
  EXPECT_EQ(f(vec({1, 0})), vec({0, 1}));
  EXPECT_EQ(f(vec({0.5, 2})), vec({-2, 0.5}));
}

TEST(FieldExamples, ValidationRejectsBadPotentials) {
  Mat a(2, 2);
  a << 1, 2, 0, 1;
  EXPECT_THROW(VectorField::negative_gradient(rrm::RayleighQuotient{a}), rrm::InvalidArgument);
  auto f = five_anchors();
  f.weights[0] = 0.5;
  EXPECT_THROW(VectorField::negative_gradient(f), rrm::InvalidArgument);
  f = five_anchors();
  f.anchors[1] = vec({1, 1, 1});
  EXPECT_THROW(VectorField::negative_gradient(f), rrm::InvalidArgument);
}

TEST(FieldExamples, WeakCoercivity) {
  rrm::SplitMix64 rng(1);
  for (double r : {0.5, 1.0, 5.0}) {
    EXPECT_TRUE(rrm::check_weak_coercivity(linear(2, -1), Vec::Zero(2), r, 200, rng).passed);
    EXPECT_FALSE(rrm::check_weak_coercivity(linear(2, 1), Vec::Zero(2), r, 200, rng).passed);
  }
  const auto fm = five_anchors();
  const auto h = Manifold::hyperbolic(2);
  double spread = 0;
  for (const auto& a : fm.anchors)
    for (const auto& b : fm.anchors) spread = std::max(spread, h.dist(a, b));
  const auto rep = rrm::check_weak_coercivity(VectorField::negative_gradient(fm), fm.anchors[0], 2 * spread, 1000, rng);
  EXPECT_TRUE(rep.passed) << rep.max_value;
  EXPECT_EQ(rep.samples, 1000);
  EXPECT_THROW(rrm::check_weak_coercivity(VectorField::cycling(), vec({0, 0, 1}), 1.0, 10, rng), rrm::Unsupported);
}

TEST(FieldExamples, LipschitzEstimates) {
  rrm::SplitMix64 rng(2);
  EXPECT_NEAR(rrm::estimate_lipschitz(linear(2, -1), 1000, rng), 1.0, 1e-9);
  const auto c = VectorField::custom(Manifold::euclidean(2), [](const Vec&) -> Vec { return vec({1, 2}); });
  EXPECT_EQ(rrm::estimate_lipschitz(c, 1000, rng), 0.0);
  std::vector<double> est;
  for (std::uint64_t seed : {3, 4, 5}) {
    rrm::SplitMix64 r(seed);
    est.push_back(rrm::estimate_lipschitz(VectorField::cycling(), 10000, r, 3.0));
  }
  for (double e : est) {
    EXPECT_TRUE(std::isfinite(e));
    EXPECT_GT(e, 0.0);
    EXPECT_LT(std::abs(e - est[0]), 0.1 * est[0]);
  }
}

TEST(FieldExamples, RayleighLipschitzMetadataBoundsTheEstimate) {
  const auto f = VectorField::negative_gradient(rrm::RayleighQuotient{vec({3, 2, 1}).asDiagonal().toDenseMatrix(), true});
  rrm::SplitMix64 rng(6);
  ASSERT_TRUE(f.lipschitz().has_value());
  EXPECT_LE(rrm::estimate_lipschitz(f, 20000, rng, 3.0), *f.lipschitz());
  for (int i = 0; i < 2000; ++i) EXPECT_LE(f(f.manifold().random_point(rng)).norm(), *f.sup_bound() + 1e-12);
}

TEST(FieldExamples, Accretivity) {
  rrm::SplitMix64 rng(7);
  const std::vector<double> grid{0.01, 0.1, 0.5, 1.0};
  EXPECT_TRUE(rrm::check_accretivity(linear(2, 1), 1.0, grid, 200, rng).passed());
  EXPECT_FALSE(rrm::check_accretivity(linear(2, -1), 0.5, grid, 200, rng).passed());
  const auto bilinear = VectorField::game(rrm::bilinear_game(Mat::Identity(1, 1)));
  EXPECT_FALSE(rrm::check_accretivity(bilinear, 0.1, grid, 200, rng).passed());
}

// ---------------------------------------------------------------------------
// Invariants

TEST(FieldInvariants, GradientMatchesFiniteDifferences) {
  std::vector<rrm::PotentialSpec> specs{
      rrm::RayleighQuotient{vec({3, 2, 1}).asDiagonal().toDenseMatrix()},
      rrm::RayleighQuotient{vec({3, 2, 1}).asDiagonal().toDenseMatrix(), true},
      five_anchors(),
      rrm::QuadraticBowl{vec({1, -1, 2})},
      std::get<rrm::PotentialGame>(rrm::coordination_game(vec({2, 1, 0.5}).asDiagonal().toDenseMatrix()).payoff)
          .potential,
  };
  const double t = 1e-4;
  for (const auto& spec : specs) {
    const Manifold m = rrm::potential_manifold(spec);
    rrm::SplitMix64 rng(8);
    for (int trial = 0; trial < 20; ++trial) {
      const Vec p = m.random_point(rng, 1.5);
      const Vec g = rrm::riemannian_gradient(spec, p);
      const rrm::Mat basis = m.tangent_basis(p);
      for (int i = 0; i < basis.cols(); ++i) {
        const Vec e = basis.col(i);
        const double fd =
            (rrm::potential_value(spec, m.exp(p, t * e)) - rrm::potential_value(spec, m.exp(p, -t * e))) / (2 * t);
        EXPECT_LE(std::abs(m.inner(p, g, e) - fd), 1e-5) << m.id();
      }
    }
  }
}

TEST(FieldInvariants, FrechetFieldMatchesTextbookLogSum) {
  const auto fm = five_anchors();
  const auto f = VectorField::negative_gradient(fm);
  rrm::SplitMix64 rng(9);
  const auto h = Manifold::hyperbolic(2);
  for (int i = 0; i < 50; ++i) {
    const Vec x = h.random_point(rng, 2.0);
    Vec ref = Vec::Zero(3);
    for (std::size_t k = 0; k < fm.anchors.size(); ++k) ref += fm.weights[k] * oracle::hyperbolic_log(x, fm.anchors[k]);
    EXPECT_LT((f(x) - ref).norm(), 1e-7 * std::max(1.0, ref.norm()));
  }
}

TEST(FieldInvariants, CyclingFieldIsTangent) {
  const auto f = VectorField::cycling();
  rrm::SplitMix64 rng(10);
  for (int i = 0; i < 1000; ++i) {
    const Vec x = f.manifold().random_point(rng);
    EXPECT_LE(std::abs(f(x).dot(x)), 1e-12);
  }
}

TEST(FieldInvariants, FrechetFieldVanishesAtTheMidpoint) {
  const auto h = Manifold::hyperbolic(2);
  rrm::SplitMix64 rng(11);
  for (int i = 0; i < 20; ++i) {
    const Vec a = h.random_point(rng, 2.0), b = h.random_point(rng, 2.0);
    const auto f = VectorField::negative_gradient(rrm::FrechetMean{{a, b}, {0.5, 0.5}});
    const Vec mid = h.exp(a, 0.5 * h.log(a, b));
    EXPECT_LE(h.norm(mid, f(mid)), 1e-9);
  }
}

TEST(FieldInvariants, PotentialGameFieldIsBlockwiseNegativeGradient) {
  const Mat a = (Mat(3, 3) << 2, 0.5, 0, 0.5, 1, 0, 0, 0, 0.5).finished();
  const auto game = rrm::coordination_game(a);
  const auto gf = VectorField::game(game);
  const auto& pot = std::get<rrm::PotentialGame>(game.payoff).potential;
  const auto ng = VectorField::negative_gradient(pot);
  rrm::SplitMix64 rng(12);
  for (int i = 0; i < 200; ++i) {
    const Vec z = game.manifold.random_point(rng);
    EXPECT_LT((gf(z) - ng(z)).norm(), 1e-14);
    // Independent block formula: -(I - x x^T)(-A y) and -(I - y y^T)(-A^T x).
    const Vec x = z.head(3), y = z.tail(3);
    Vec ref(6);
    ref.head(3) = a * y - x.dot(a * y) * x;
    ref.tail(3) = a.transpose() * x - y.dot(a.transpose() * x) * y;
    EXPECT_LT((gf(z) - ref).norm(), 1e-12);
  }
}

TEST(FieldInvariants, CoordinationGameVanishesOnSingularPairs) {
  const Mat a = (Mat(3, 3) << 2, 0.5, 0, 0.5, 1, 0, 0, 0, 0.5).finished();
  const auto gf = VectorField::game(rrm::coordination_game(a));
  Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  for (int i = 0; i < 3; ++i) {
    Vec z(6);
    z << svd.matrixU().col(i), svd.matrixV().col(i);
    EXPECT_LT(gf(z).norm(), 1e-12);
  }
}
