#include "rrm/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "rrm/errors.hpp"

namespace rrm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Below this distance the sphere/hyperbolic log direction is read off the
// chord directly.
constexpr double kTiny = 1e-300;

// sin(x)/x and sinh(x)/x, accurate near 0.
double sinc(double x) {
  if (std::abs(x) < 1e-4) return 1.0 - x * x / 6.0;
  return std::sin(x) / x;
}

double sinhc(double x) {
  if (std::abs(x) < 1e-4) return 1.0 + x * x / 6.0;
  return std::sinh(x) / x;
}

// Angle between unit vectors x and y, accurate for both tiny and large angles.
// Also returns u = y - <x,y> x computed without cancellation.
double sphere_angle(const Vec& x, const Vec& y, Vec& u) {
  const Vec chord = y - x;
  const double half_sq = 0.5 * chord.squaredNorm();  // 1 - <x,y>
  u = chord + half_sq * x;
  return std::atan2(u.norm(), 1.0 - half_sq);
}

// Hyperbolic distance and u = y - alpha x with alpha = -<x,y>_M = cosh d.
double hyperbolic_angle(const Vec& x, const Vec& y, Vec& u) {
  const Vec chord = y - x;
  const double chord_sq = std::max(minkowski(chord, chord), 0.0);  // 2 (alpha - 1)
  u = chord - 0.5 * chord_sq * x;
  return 2.0 * std::asinh(0.5 * std::sqrt(chord_sq));
}

Vec hyperbolic_lift(const Vec& w) {
  Vec out = w;
  out(0) = std::sqrt(1.0 + w.tail(w.size() - 1).squaredNorm());
  return out;
}

}  // namespace

double minkowski(const Vec& a, const Vec& b) {
  return -a(0) * b(0) + a.tail(a.size() - 1).dot(b.tail(b.size() - 1));
}

Manifold::Manifold(ManifoldKind kind, int dim) : kind_(kind), dim_(dim) {
  if (dim < 1) throw InvalidArgument("manifold dimension must be >= 1");
  switch (kind) {
    case ManifoldKind::kEuclidean:
      ambient_dim_ = dim;
      inj_radius_ = kInf;
      break;
    case ManifoldKind::kSphere:
      ambient_dim_ = dim + 1;
      inj_radius_ = std::numbers::pi;
      // S^1 is intrinsically flat; sectional curvature needs dim >= 2.
      k_low_ = k_up_ = dim >= 2 ? 1.0 : 0.0;
      break;
    case ManifoldKind::kHyperbolic:
      ambient_dim_ = dim + 1;
      inj_radius_ = kInf;
      k_low_ = k_up_ = dim >= 2 ? -1.0 : 0.0;
      break;
    case ManifoldKind::kProduct:
      break;
  }
}

Manifold Manifold::euclidean(int dim) { return Manifold(ManifoldKind::kEuclidean, dim); }
Manifold Manifold::sphere(int dim) { return Manifold(ManifoldKind::kSphere, dim); }
Manifold Manifold::hyperbolic(int dim) { return Manifold(ManifoldKind::kHyperbolic, dim); }

Manifold Manifold::product(std::vector<Manifold> factors) {
  if (factors.empty()) throw InvalidArgument("product manifold needs at least one factor");
  int dim = 0;
  for (const auto& f : factors) dim += f.dim();
  Manifold m(ManifoldKind::kProduct, dim);
  m.inj_radius_ = kInf;
  m.k_low_ = kInf;
  m.k_up_ = -kInf;
  int offset = 0;
  for (const auto& f : factors) {
    m.offsets_.push_back(offset);
    offset += f.ambient_dim();
    m.inj_radius_ = std::min(m.inj_radius_, f.injectivity_radius());
    m.k_low_ = std::min(m.k_low_, f.curvature_lower());
    m.k_up_ = std::max(m.k_up_, f.curvature_upper());
  }
  // Planes spanned by directions from two different factors are flat.
  if (factors.size() > 1) {
    m.k_low_ = std::min(m.k_low_, 0.0);
    m.k_up_ = std::max(m.k_up_, 0.0);
  }
  m.ambient_dim_ = offset;
  m.factors_ = std::move(factors);
  return m;
}

std::string Manifold::id() const {
  switch (kind_) {
    case ManifoldKind::kEuclidean:
      return "R^" + std::to_string(dim_);
    case ManifoldKind::kSphere:
      return "S^" + std::to_string(dim_);
    case ManifoldKind::kHyperbolic:
      return "H^" + std::to_string(dim_);
    case ManifoldKind::kProduct: {
      std::ostringstream os;
      for (std::size_t i = 0; i < factors_.size(); ++i) os << (i ? " x " : "") << factors_[i].id();
      return os.str();
    }
  }
  return {};
}

bool Manifold::is_hadamard() const noexcept {
  switch (kind_) {
    case ManifoldKind::kEuclidean:
    case ManifoldKind::kHyperbolic:
      return true;
    case ManifoldKind::kSphere:
      return false;
    case ManifoldKind::kProduct:
      return std::all_of(factors_.begin(), factors_.end(), [](const Manifold& f) { return f.is_hadamard(); });
  }
  return false;
}

bool Manifold::operator==(const Manifold& other) const {
  return kind_ == other.kind_ && dim_ == other.dim_ && factors_ == other.factors_;
}

template <class Fn>
void Manifold::for_each_factor(Fn&& fn) const {
  for (std::size_t i = 0; i < factors_.size(); ++i) fn(factors_[i], offsets_[i], factors_[i].ambient_dim());
}

double Manifold::inner(const Vec& x, const Vec& u, const Vec& v) const {
  switch (kind_) {
    case ManifoldKind::kEuclidean:
    case ManifoldKind::kSphere:
      return u.dot(v);
    case ManifoldKind::kHyperbolic:
      return minkowski(u, v);
    case ManifoldKind::kProduct: {
      double s = 0.0;
      for_each_factor([&](const Manifold& f, int off, int n) {
        s += f.inner(x.segment(off, n), u.segment(off, n), v.segment(off, n));
      });
      return s;
    }
  }
  return 0.0;
}

double Manifold::norm(const Vec& x, const Vec& v) const { return std::sqrt(std::max(inner(x, v, v), 0.0)); }

Vec Manifold::exp(const Vec& x, const Vec& v) const {
  switch (kind_) {
    case ManifoldKind::kEuclidean:
      return x + v;
    case ManifoldKind::kSphere: {
      const double n = v.norm();
      if (n == 0.0) return x;
      Vec y = std::cos(n) * x + sinc(n) * v;
      return y / y.norm();
    }
    case ManifoldKind::kHyperbolic: {
      const double n = std::sqrt(std::max(minkowski(v, v), 0.0));
      if (n == 0.0) return x;
      return hyperbolic_lift(std::cosh(n) * x + sinhc(n) * v);
    }
    case ManifoldKind::kProduct: {
      Vec y(ambient_dim_);
      for_each_factor([&](const Manifold& f, int off, int k) {
        y.segment(off, k) = f.exp(x.segment(off, k), v.segment(off, k));
      });
      return y;
    }
  }
  return x;
}

Vec Manifold::log(const Vec& x, const Vec& y) const {
  switch (kind_) {
    case ManifoldKind::kEuclidean:
      return y - x;
    case ManifoldKind::kSphere: {
      Vec u;
      const double theta = sphere_angle(x, y, u);
      if (std::numbers::pi - theta <= 1e-10) {
        std::ostringstream os;
        os << "log undefined at the cut locus: points " << x.transpose() << " and " << y.transpose()
           << " are antipodal on " << id();
        throw DomainError(os.str());
      }
      const double un = u.norm();
      if (un < kTiny) return Vec::Zero(x.size());
      return (theta / un) * u;
    }
    case ManifoldKind::kHyperbolic: {
      Vec u;
      const double d = hyperbolic_angle(x, y, u);
      if (d == 0.0) return Vec::Zero(x.size());
      // |u|_M = sinh d
      return u / sinhc(d);
    }
    case ManifoldKind::kProduct: {
      Vec v(ambient_dim_);
      for_each_factor([&](const Manifold& f, int off, int k) {
        v.segment(off, k) = f.log(x.segment(off, k), y.segment(off, k));
      });
      return v;
    }
  }
  return Vec::Zero(x.size());
}

double Manifold::dist(const Vec& x, const Vec& y) const {
  switch (kind_) {
    case ManifoldKind::kEuclidean:
      return (y - x).norm();
    case ManifoldKind::kSphere: {
      Vec u;
      return sphere_angle(x, y, u);
    }
    case ManifoldKind::kHyperbolic: {
      Vec u;
      return hyperbolic_angle(x, y, u);
    }
    case ManifoldKind::kProduct: {
      double s = 0.0;
      for_each_factor([&](const Manifold& f, int off, int k) {
        const double d = f.dist(x.segment(off, k), y.segment(off, k));
        s += d * d;
      });
      return std::sqrt(s);
    }
  }
  return 0.0;
}

Vec Manifold::transport(const Vec& x, const Vec& y, const Vec& v) const {
  switch (kind_) {
    case ManifoldKind::kEuclidean:
      return v;
    case ManifoldKind::kSphere: {
      const Vec chord = y - x;
      const double one_plus_c = 2.0 - 0.5 * chord.squaredNorm();  // 1 + <x,y>
      if (one_plus_c <= 1e-14) {
        throw DomainError("transport undefined: endpoints are antipodal on " + id() +
                          " (minimizing geodesic not unique)");
      }
      Vec out = v - (y.dot(v) / one_plus_c) * (x + y);
      return out - out.dot(y) * y;
    }
    case ManifoldKind::kHyperbolic: {
      const Vec chord = y - x;
      const double one_plus_alpha = 2.0 + 0.5 * std::max(minkowski(chord, chord), 0.0);
      Vec out = v + (minkowski(y, v) / one_plus_alpha) * (x + y);
      return out + minkowski(y, out) * y;
    }
    case ManifoldKind::kProduct: {
      Vec out(ambient_dim_);
      for_each_factor([&](const Manifold& f, int off, int k) {
        out.segment(off, k) = f.transport(x.segment(off, k), y.segment(off, k), v.segment(off, k));
      });
      return out;
    }
  }
  return v;
}

Vec Manifold::retract(const Vec& x, const Vec& v) const {
  switch (kind_) {
    case ManifoldKind::kEuclidean:
      return x + v;
    case ManifoldKind::kSphere: {
      const Vec w = x + v;
      const double n = w.norm();
      if (n == 0.0) throw DomainError("sphere retraction degenerate: |x + v| = 0");
      return w / n;
    }
    case ManifoldKind::kHyperbolic: {
      const Vec w = x + v;
      const double q = -minkowski(w, w);  // 1 - |v|^2
      if (q <= 0.0) {
        throw DomainError("hyperbolic retraction degenerate: Minkowski renormalization needs |v| < 1");
      }
      return hyperbolic_lift(w / std::sqrt(q));
    }
    case ManifoldKind::kProduct: {
      Vec y(ambient_dim_);
      for_each_factor([&](const Manifold& f, int off, int k) {
        y.segment(off, k) = f.retract(x.segment(off, k), v.segment(off, k));
      });
      return y;
    }
  }
  return x;
}

Vec Manifold::project_tangent(const Vec& x, const Vec& w) const {
  switch (kind_) {
    case ManifoldKind::kEuclidean:
      return w;
    case ManifoldKind::kSphere:
      return w - x.dot(w) * x;
    case ManifoldKind::kHyperbolic:
      return w + minkowski(x, w) * x;
    case ManifoldKind::kProduct: {
      Vec out(ambient_dim_);
      for_each_factor([&](const Manifold& f, int off, int k) {
        out.segment(off, k) = f.project_tangent(x.segment(off, k), w.segment(off, k));
      });
      return out;
    }
  }
  return w;
}

Vec Manifold::project_point(const Vec& w) const {
  switch (kind_) {
    case ManifoldKind::kEuclidean:
      return w;
    case ManifoldKind::kSphere:
      return w / w.norm();
    case ManifoldKind::kHyperbolic:
      return hyperbolic_lift(w);
    case ManifoldKind::kProduct: {
      Vec out(ambient_dim_);
      for_each_factor([&](const Manifold& f, int off, int k) { out.segment(off, k) = f.project_point(w.segment(off, k)); });
      return out;
    }
  }
  return w;
}

Vec Manifold::egrad_to_rgrad(const Vec& x, const Vec& egrad) const {
  switch (kind_) {
    case ManifoldKind::kEuclidean:
    case ManifoldKind::kSphere:
      return project_tangent(x, egrad);
    case ManifoldKind::kHyperbolic: {
      Vec g = egrad;
      g(0) = -g(0);
      return project_tangent(x, g);
    }
    case ManifoldKind::kProduct: {
      Vec out(ambient_dim_);
      for_each_factor([&](const Manifold& f, int off, int k) {
        out.segment(off, k) = f.egrad_to_rgrad(x.segment(off, k), egrad.segment(off, k));
      });
      return out;
    }
  }
  return egrad;
}

Mat Manifold::tangent_basis(const Vec& x) const {
  switch (kind_) {
    case ManifoldKind::kEuclidean:
      return Mat::Identity(dim_, dim_);
    case ManifoldKind::kSphere: {
      // The Householder reflection taking e_0 to +-x maps e_1..e_d onto an
      // orthonormal basis of x's orthogonal complement.
      Eigen::HouseholderQR<Mat> qr(x);
      Mat q = qr.householderQ();
      return q.rightCols(dim_);
    }
    case ManifoldKind::kHyperbolic: {
      // Parallel transport of e_1..e_d from the origin e_0 to x.
      Mat b = Mat::Zero(ambient_dim_, dim_);
      Vec o_plus_x = x;
      o_plus_x(0) += 1.0;
      for (int i = 0; i < dim_; ++i) {
        b(i + 1, i) = 1.0;
        b.col(i) += (x(i + 1) / (1.0 + x(0))) * o_plus_x;
      }
      return b;
    }
    case ManifoldKind::kProduct: {
      Mat b = Mat::Zero(ambient_dim_, dim_);
      int col = 0;
      for_each_factor([&](const Manifold& f, int off, int k) {
        b.block(off, col, k, f.dim()) = f.tangent_basis(x.segment(off, k));
        col += f.dim();
      });
      return b;
    }
  }
  return {};
}

Vec Manifold::random_tangent(const Vec& x, double sigma, SplitMix64& rng) const {
  if (sigma < 0.0) throw InvalidArgument("random_tangent: sigma must be >= 0");
  if (sigma == 0.0) return Vec::Zero(ambient_dim_);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec coeffs(dim_);
  for (int i = 0; i < dim_; ++i) coeffs(i) = normal(rng);
  coeffs *= sigma / std::sqrt(static_cast<double>(dim_));
  if (kind_ == ManifoldKind::kEuclidean) return coeffs;
  return tangent_basis(x) * coeffs;
}

Vec Manifold::random_unit_tangent(const Vec& x, SplitMix64& rng) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec coeffs(dim_);
  do {
    for (int i = 0; i < dim_; ++i) coeffs(i) = normal(rng);
  } while (coeffs.norm() == 0.0);
  coeffs /= coeffs.norm();
  if (kind_ == ManifoldKind::kEuclidean) return coeffs;
  return tangent_basis(x) * coeffs;
}

Vec Manifold::origin() const {
  switch (kind_) {
    case ManifoldKind::kEuclidean:
      return Vec::Zero(ambient_dim_);
    case ManifoldKind::kSphere:
    case ManifoldKind::kHyperbolic:
      return Vec::Unit(ambient_dim_, 0);
    case ManifoldKind::kProduct: {
      Vec out(ambient_dim_);
      for_each_factor([&](const Manifold& f, int off, int k) { out.segment(off, k) = f.origin(); });
      return out;
    }
  }
  return {};
}

Vec Manifold::random_point(SplitMix64& rng, double radius) const {
  switch (kind_) {
    case ManifoldKind::kSphere: {
      std::normal_distribution<double> normal(0.0, 1.0);
      Vec g(ambient_dim_);
      do {
        for (int i = 0; i < ambient_dim_; ++i) g(i) = normal(rng);
      } while (g.norm() == 0.0);
      return g / g.norm();
    }
    case ManifoldKind::kEuclidean:
    case ManifoldKind::kHyperbolic: {
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      const Vec o = origin();
      const double r = radius * std::pow(unif(rng), 1.0 / dim_);
      return exp(o, r * random_unit_tangent(o, rng));
    }
    case ManifoldKind::kProduct: {
      Vec out(ambient_dim_);
      for_each_factor([&](const Manifold& f, int off, int k) { out.segment(off, k) = f.random_point(rng, radius); });
      return out;
    }
  }
  return {};
}

bool Manifold::clip_step(Vec& v, double fraction) const {
  switch (kind_) {
    case ManifoldKind::kEuclidean:
    case ManifoldKind::kHyperbolic:
      return false;
    case ManifoldKind::kSphere: {
      const double limit = fraction * inj_radius_;
      const double n = v.norm();
      if (n <= limit) return false;
      v *= limit / n;
      return true;
    }
    case ManifoldKind::kProduct: {
      bool clipped = false;
      for (std::size_t i = 0; i < factors_.size(); ++i) {
        Vec seg = v.segment(offsets_[i], factors_[i].ambient_dim());
        if (factors_[i].clip_step(seg, fraction)) {
          v.segment(offsets_[i], factors_[i].ambient_dim()) = seg;
          clipped = true;
        }
      }
      return clipped;
    }
  }
  return false;
}

bool Manifold::within_injectivity(const Vec& x, const Vec& y) const {
  switch (kind_) {
    case ManifoldKind::kEuclidean:
    case ManifoldKind::kHyperbolic:
      return true;
    case ManifoldKind::kSphere:
      return std::numbers::pi - dist(x, y) > 1e-10;
    case ManifoldKind::kProduct: {
      bool ok = true;
      for_each_factor([&](const Manifold& f, int off, int k) {
        ok = ok && f.within_injectivity(x.segment(off, k), y.segment(off, k));
      });
      return ok;
    }
  }
  return true;
}

double Manifold::point_residual(const Vec& x) const {
  if (x.size() != ambient_dim_) return kInf;
  if (!x.allFinite()) return kInf;
  switch (kind_) {
    case ManifoldKind::kEuclidean:
      return 0.0;
    case ManifoldKind::kSphere:
      return std::abs(x.squaredNorm() - 1.0);
    case ManifoldKind::kHyperbolic:
      if (x(0) <= 0.0) return kInf;
      return std::abs(minkowski(x, x) + 1.0) / std::max(1.0, x(0) * x(0));
    case ManifoldKind::kProduct: {
      double r = 0.0;
      for_each_factor([&](const Manifold& f, int off, int k) { r = std::max(r, f.point_residual(x.segment(off, k))); });
      return r;
    }
  }
  return 0.0;
}

double Manifold::tangent_residual(const Vec& x, const Vec& v) const {
  if (v.size() != ambient_dim_ || x.size() != ambient_dim_) return kInf;
  if (!v.allFinite()) return kInf;
  switch (kind_) {
    case ManifoldKind::kEuclidean:
      return 0.0;
    case ManifoldKind::kSphere:
      return std::abs(x.dot(v)) / std::max(1.0, v.norm());
    case ManifoldKind::kHyperbolic:
      return std::abs(minkowski(x, v)) / std::max(1.0, v.norm() * x.norm());
    case ManifoldKind::kProduct: {
      double r = 0.0;
      for_each_factor([&](const Manifold& f, int off, int k) {
        r = std::max(r, f.tangent_residual(x.segment(off, k), v.segment(off, k)));
      });
      return r;
    }
  }
  return 0.0;
}

void Manifold::check_point(const Vec& x) const {
  if (x.size() != ambient_dim_) {
    throw InvalidArgument("point has " + std::to_string(x.size()) + " coordinates, " + id() + " expects " +
                          std::to_string(ambient_dim_));
  }
  const double r = point_residual(x);
  if (!(r <= kConstraintTol)) {
    std::ostringstream os;
    os << "point is off " << id() << " (constraint residual " << r << ")";
    throw InvalidArgument(os.str());
  }
}

void Manifold::check_tangent(const Vec& x, const Vec& v) const {
  if (v.size() != ambient_dim_) {
    throw InvalidArgument("tangent vector has " + std::to_string(v.size()) + " coordinates, " + id() +
                          " expects " + std::to_string(ambient_dim_));
  }
  const double r = tangent_residual(x, v);
  if (!(r <= kConstraintTol)) {
    std::ostringstream os;
    os << "vector is not tangent to " << id() << " at its base (residual " << r << ")";
    throw InvalidArgument(os.str());
  }
}

// ---------------------------------------------------------------------------

namespace {

void require_same_base(const TangentVec& u, const TangentVec& v) {
  if (u.base.coords.size() != v.base.coords.size() || u.base.coords != v.base.coords) {
    throw InvalidArgument("tangent vectors are based at different points");
  }
}

void check(const Manifold& m, const TangentVec& v) {
  m.check_point(v.base.coords);
  m.check_tangent(v.base.coords, v.vec);
}

}  // namespace

double inner(const Manifold& m, const TangentVec& u, const TangentVec& v) {
  require_same_base(u, v);
  check(m, u);
  check(m, v);
  return m.inner(u.base.coords, u.vec, v.vec);
}

double norm(const Manifold& m, const TangentVec& v) {
  check(m, v);
  return m.norm(v.base.coords, v.vec);
}

Point exp(const Manifold& m, const TangentVec& v) {
  check(m, v);
  return {m.exp(v.base.coords, v.vec)};
}

TangentVec log(const Manifold& m, const Point& p, const Point& q) {
  m.check_point(p.coords);
  m.check_point(q.coords);
  return {p, m.log(p.coords, q.coords)};
}

double dist(const Manifold& m, const Point& p, const Point& q) {
  m.check_point(p.coords);
  m.check_point(q.coords);
  return m.dist(p.coords, q.coords);
}

TangentVec transport(const Manifold& m, const Point& p, const Point& q, const TangentVec& v) {
  check(m, v);
  m.check_point(q.coords);
  if (v.base.coords != p.coords) throw InvalidArgument("transport: vector is not based at the source point");
  if (!m.within_injectivity(p.coords, q.coords)) {
    throw DomainError("transport: endpoints are not within the injectivity radius of " + m.id());
  }
  return {q, m.transport(p.coords, q.coords, v.vec)};
}

Point retract(const Manifold& m, const TangentVec& v) {
  check(m, v);
  return {m.retract(v.base.coords, v.vec)};
}

TangentVec project_tangent(const Manifold& m, const Point& p, const Vec& w) {
  m.check_point(p.coords);
  if (w.size() != m.ambient_dim()) throw InvalidArgument("project_tangent: ambient dimension mismatch");
  return {p, m.project_tangent(p.coords, w)};
}

TangentVec random_tangent(const Manifold& m, const Point& p, double sigma, SplitMix64& rng) {
  m.check_point(p.coords);
  return {p, m.random_tangent(p.coords, sigma, rng)};
}

// ---------------------------------------------------------------------------

CurvatureComparison CurvatureComparison::from(const Manifold& m) {
  return {m.curvature_lower(), std::max(std::abs(m.curvature_lower()), std::abs(m.curvature_upper()))};
}

double comparison_f(double k_low, double a) {
  if (a < 0.0) throw InvalidArgument("comparison_f: argument must be >= 0");
  if (k_low == 0.0) return a * a / 6.0;
  const double r = 1.0 / std::sqrt(std::abs(k_low));
  const double x = a / r;
  if (x < 1e-3) {
    // Taylor series of r^2 (1 -+ sin(x)/x) to avoid cancellation.
    const double x2 = x * x;
    const double s = k_low > 0 ? -1.0 : 1.0;
    return r * r * x2 / 6.0 * (1.0 + s * x2 / 20.0 + x2 * x2 / 840.0);
  }
  if (k_low > 0) return r * r * (1.0 - std::sin(x) / x);
  return r * r * (std::sinh(x) / x - 1.0);
}

}  // namespace rrm
