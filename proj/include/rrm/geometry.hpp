#pragma once

// Geometry kernels for the manifolds supported by the library. Points and
// tangent vectors live in ambient embedding coordinates:
//   Euclidean(d)          R^d
//   Sphere(d)             unit vectors in R^{d+1}
//   HyperbolicLorentz(d)  upper sheet of <x,x>_M = -1 in R^{d+1}
//   Product               concatenation of the factors' coordinates
//
// The Manifold member kernels work on raw Eigen vectors and skip validation;
// the free functions below them take Point/TangentVec and check their inputs.

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

#include "rrm/random.hpp"

namespace rrm {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class ManifoldKind { kEuclidean, kSphere, kHyperbolic, kProduct };

/// Tolerance on the defining constraint of a point / tangent vector.
inline constexpr double kConstraintTol = 1e-10;

class Manifold {
 public:
  static Manifold euclidean(int dim);
  static Manifold sphere(int dim);
  static Manifold hyperbolic(int dim);
  static Manifold product(std::vector<Manifold> factors);

  ManifoldKind kind() const noexcept { return kind_; }
  /// Intrinsic dimension.
  int dim() const noexcept { return dim_; }
  int ambient_dim() const noexcept { return ambient_dim_; }
  const std::vector<Manifold>& factors() const noexcept { return factors_; }
  int factor_offset(std::size_t i) const { return offsets_.at(i); }
  std::string id() const;

  double curvature_lower() const noexcept { return k_low_; }
  double curvature_upper() const noexcept { return k_up_; }
  /// pi for spheres, +inf for Euclidean and hyperbolic spaces, min over factors.
  double injectivity_radius() const noexcept { return inj_radius_; }
  /// Simply connected with non-positive curvature (Euclidean, hyperbolic, products of these).
  bool is_hadamard() const noexcept;

  bool operator==(const Manifold& other) const;
  bool operator!=(const Manifold& other) const { return !(*this == other); }

  double inner(const Vec& x, const Vec& u, const Vec& v) const;
  double norm(const Vec& x, const Vec& v) const;
  Vec exp(const Vec& x, const Vec& v) const;
  /// Throws DomainError when y is at the cut locus of x.
  Vec log(const Vec& x, const Vec& y) const;
  double dist(const Vec& x, const Vec& y) const;
  /// Parallel transport of v in T_x along the minimizing geodesic to y.
  /// Throws DomainError when that geodesic is not unique.
  Vec transport(const Vec& x, const Vec& y, const Vec& v) const;
  Vec retract(const Vec& x, const Vec& v) const;
  Vec project_tangent(const Vec& x, const Vec& w) const;
  /// Nearest point of the constraint set (used to suppress drift).
  Vec project_point(const Vec& w) const;
  /// Riemannian gradient from the gradient of an ambient extension.
  Vec egrad_to_rgrad(const Vec& x, const Vec& egrad) const;
  /// Orthonormal basis of T_x as the columns of an ambient_dim x dim matrix.
  Mat tangent_basis(const Vec& x) const;

  /// Isotropic Gaussian in T_x with E|v|^2 = sigma^2.
  Vec random_tangent(const Vec& x, double sigma, SplitMix64& rng) const;
  /// Uniform direction in T_x with unit norm.
  Vec random_unit_tangent(const Vec& x, SplitMix64& rng) const;
  /// Random point: uniform on spheres, within geodesic `radius` of origin() otherwise.
  Vec random_point(SplitMix64& rng, double radius = 1.0) const;
  /// Canonical reference point (e_0 for spheres and the hyperboloid, 0 for R^d).
  Vec origin() const;

  /// Shrinks v so that each factor's step stays within fraction * its
  /// injectivity radius. Returns true if v was modified.
  bool clip_step(Vec& v, double fraction) const;
  /// True when every factor of (x, y) is strictly inside its injectivity radius.
  bool within_injectivity(const Vec& x, const Vec& y) const;

  double point_residual(const Vec& x) const;
  double tangent_residual(const Vec& x, const Vec& v) const;
  /// Throw InvalidArgument on constraint violations above kConstraintTol.
  void check_point(const Vec& x) const;
  void check_tangent(const Vec& x, const Vec& v) const;

 private:
  Manifold(ManifoldKind kind, int dim);

  template <class Fn>
  void for_each_factor(Fn&& fn) const;

  ManifoldKind kind_;
  int dim_ = 0;
  int ambient_dim_ = 0;
  double k_low_ = 0.0;
  double k_up_ = 0.0;
  double inj_radius_ = 0.0;
  std::vector<Manifold> factors_;
  std::vector<int> offsets_;
};

/// Minkowski bilinear form -a_0 b_0 + sum_i a_i b_i.
double minkowski(const Vec& a, const Vec& b);

// ---------------------------------------------------------------------------
// Checked API on points and based tangent vectors.

struct Point {
  Vec coords;
};

struct TangentVec {
  Point base;
  Vec vec;
};

double inner(const Manifold& m, const TangentVec& u, const TangentVec& v);
double norm(const Manifold& m, const TangentVec& v);
Point exp(const Manifold& m, const TangentVec& v);
TangentVec log(const Manifold& m, const Point& p, const Point& q);
double dist(const Manifold& m, const Point& p, const Point& q);
TangentVec transport(const Manifold& m, const Point& p, const Point& q, const TangentVec& v);
Point retract(const Manifold& m, const TangentVec& v);
TangentVec project_tangent(const Manifold& m, const Point& p, const Vec& w);
TangentVec random_tangent(const Manifold& m, const Point& p, double sigma, SplitMix64& rng);

// ---------------------------------------------------------------------------
// Curvature comparison function f_{K_low} bounding the gap between the
// differential of exp and parallel transport.

struct CurvatureComparison {
  double k_low = 0.0;
  /// max(|K_low|, |K_up|)
  double k = 0.0;

  static CurvatureComparison from(const Manifold& m);
};

/// f_{K_low}(a); equals a^2/6 when K_low = 0 (the common limit of both curved branches).
double comparison_f(double k_low, double a);
inline double comparison_f(const CurvatureComparison& c, double a) { return comparison_f(c.k_low, a); }

}  // namespace rrm
