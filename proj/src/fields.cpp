#include "rrm/fields.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "rrm/errors.hpp"

namespace rrm {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

Eigen::VectorXd eigenvalues(const Mat& a) {
  Eigen::SelfAdjointEigenSolver<Mat> es(a, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

}  // namespace

Manifold potential_manifold(const PotentialSpec& spec) {
  return std::visit(Overloaded{
                        [](const RayleighQuotient& r) { return Manifold::sphere(static_cast<int>(r.a.rows()) - 1); },
                        [](const FrechetMean& f) {
                          if (f.anchors.empty()) throw InvalidArgument("Frechet mean needs at least one anchor");
                          return Manifold::hyperbolic(static_cast<int>(f.anchors.front().size()) - 1);
                        },
                        [](const QuadraticBowl& q) { return Manifold::euclidean(static_cast<int>(q.center.size())); },
                        [](const AmbientPotential& a) { return a.manifold; },
                    },
                    spec);
}

void validate(const PotentialSpec& spec) {
  std::visit(Overloaded{
                 [](const RayleighQuotient& r) {
                   if (r.a.rows() != r.a.cols() || r.a.rows() < 2) {
                     throw InvalidArgument("Rayleigh quotient needs a square matrix of size >= 2");
                   }
                   if ((r.a - r.a.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
                     throw InvalidArgument("Rayleigh quotient matrix is not symmetric");
                   }
                 },
                 [](const FrechetMean& f) {
                   if (f.anchors.empty() || f.anchors.size() != f.weights.size()) {
                     throw InvalidArgument("Frechet mean needs one weight per anchor");
                   }
                   const Manifold m = Manifold::hyperbolic(static_cast<int>(f.anchors.front().size()) - 1);
                   double total = 0.0;
                   for (std::size_t i = 0; i < f.anchors.size(); ++i) {
                     m.check_point(f.anchors[i]);
                     if (f.weights[i] < 0.0) throw InvalidArgument("Frechet mean weights must be nonnegative");
                     total += f.weights[i];
                   }
                   if (std::abs(total - 1.0) > 1e-12) throw InvalidArgument("Frechet mean weights must sum to 1");
                 },
                 [](const QuadraticBowl& q) {
                   if (q.center.size() < 1) throw InvalidArgument("quadratic bowl needs a center");
                 },
                 [](const AmbientPotential& a) {
                   if (!a.value || !a.euclidean_gradient) throw InvalidArgument("ambient potential is missing callbacks");
                 },
             },
             spec);
}

double potential_value(const PotentialSpec& spec, const Vec& x) {
  return std::visit(Overloaded{
                        [&](const RayleighQuotient& r) {
                          const double q = x.dot(r.a * x);
                          return r.maximize ? -q : q;
                        },
                        [&](const FrechetMean& f) {
                          const Manifold m = Manifold::hyperbolic(static_cast<int>(x.size()) - 1);
                          double s = 0.0;
                          for (std::size_t i = 0; i < f.anchors.size(); ++i) {
                            const double d = m.dist(x, f.anchors[i]);
                            s += 0.5 * f.weights[i] * d * d;
                          }
                          return s;
                        },
                        [&](const QuadraticBowl& q) { return 0.5 * (x - q.center).squaredNorm(); },
                        [&](const AmbientPotential& a) { return a.value(x); },
                    },
                    spec);
}

Vec riemannian_gradient(const PotentialSpec& spec, const Vec& x) {
  return std::visit(Overloaded{
                        [&](const RayleighQuotient& r) -> Vec {
                          const Vec ax = r.a * x;
                          Vec g = 2.0 * (ax - x.dot(ax) * x);
                          return r.maximize ? Vec(-g) : g;
                        },
                        [&](const FrechetMean& f) -> Vec {
                          const Manifold m = Manifold::hyperbolic(static_cast<int>(x.size()) - 1);
                          Vec g = Vec::Zero(x.size());
                          for (std::size_t i = 0; i < f.anchors.size(); ++i) g -= f.weights[i] * m.log(x, f.anchors[i]);
                          return g;
                        },
                        [&](const QuadraticBowl& q) -> Vec { return x - q.center; },
                        [&](const AmbientPotential& a) -> Vec {
                          return a.manifold.egrad_to_rgrad(x, a.euclidean_gradient(x));
                        },
                    },
                    spec);
}

GameSpec bilinear_game(const Mat& coupling) {
  if (coupling.rows() < 1 || coupling.cols() < 1) throw InvalidArgument("bilinear game needs a nonempty coupling");
  return {Manifold::product({Manifold::euclidean(static_cast<int>(coupling.rows())),
                             Manifold::euclidean(static_cast<int>(coupling.cols()))}),
          BilinearMinMax{coupling}};
}

GameSpec potential_game(AmbientPotential potential) {
  if (potential.manifold.kind() != ManifoldKind::kProduct) {
    throw InvalidArgument("potential game needs a product of player manifolds");
  }
  Manifold m = potential.manifold;
  return {std::move(m), PotentialGame{std::move(potential)}};
}

GameSpec coordination_game(const Mat& a) {
  if (a.rows() < 2 || a.rows() != a.cols()) throw InvalidArgument("coordination game needs a square matrix of size >= 2");
  const int n = static_cast<int>(a.rows());
  const int d = n - 1;
  AmbientPotential pot{
      Manifold::product({Manifold::sphere(d), Manifold::sphere(d)}),
      [a, n](const Vec& z) { return -z.head(n).dot(a * z.tail(n)); },
      [a, n](const Vec& z) {
        Vec g(2 * n);
        g.head(n) = -(a * z.tail(n));
        g.tail(n) = -(a.transpose() * z.head(n));
        return g;
      }};
  return potential_game(std::move(pot));
}

// ---------------------------------------------------------------------------

VectorField::VectorField(Manifold manifold, FieldKind kind, Kernel kernel, std::optional<double> lipschitz,
                         std::optional<double> sup_bound)
    : manifold_(std::move(manifold)),
      kind_(kind),
      kernel_(std::move(kernel)),
      lipschitz_(lipschitz),
      sup_bound_(sup_bound) {
  if (!kernel_) throw InvalidArgument("vector field needs a kernel");
}

VectorField VectorField::negative_gradient(const PotentialSpec& potential) {
  validate(potential);
  auto spec = std::make_shared<const PotentialSpec>(potential);
  std::optional<double> lip, sup;
  if (const auto* r = std::get_if<RayleighQuotient>(&potential)) {
    const Vec ev = eigenvalues(r->a);
    const double spread = ev.maxCoeff() - ev.minCoeff();
    lip = 2.0 * spread;
    sup = spread;
  } else if (std::holds_alternative<QuadraticBowl>(potential)) {
    lip = 1.0;
  }
  VectorField f(potential_manifold(potential), FieldKind::kNegGradient,
                [spec](const Vec& x) -> Vec { return -riemannian_gradient(*spec, x); }, lip, sup);
  f.potential_ = std::move(spec);
  return f;
}

VectorField VectorField::game(const GameSpec& game) {
  auto spec = std::make_shared<const GameSpec>(game);
  std::optional<double> lip;
  Kernel kernel;
  if (const auto* b = std::get_if<BilinearMinMax>(&game.payoff)) {
    const Mat c = b->coupling;
    const auto n = c.rows();
    const auto k = c.cols();
    if (game.manifold.ambient_dim() != n + k) throw InvalidArgument("bilinear coupling does not match the product");
    Eigen::JacobiSVD<Mat> svd(c);
    lip = svd.singularValues()(0);
    kernel = [c, n, k](const Vec& z) -> Vec {
      Vec v(n + k);
      v.head(n) = -c * z.tail(k);
      v.tail(k) = c.transpose() * z.head(n);
      return v;
    };
  } else {
    const auto& pot = std::get<PotentialGame>(game.payoff).potential;
    if (!(pot.manifold == game.manifold)) throw InvalidArgument("potential game manifold mismatch");
    const Manifold m = game.manifold;
    auto egrad = pot.euclidean_gradient;
    kernel = [m, egrad](const Vec& z) -> Vec {
      // Each player descends the shared potential in its own block.
      const Vec g = egrad(z);
      Vec v(z.size());
      for (std::size_t i = 0; i < m.factors().size(); ++i) {
        const auto& f = m.factors()[i];
        const int off = m.factor_offset(i);
        v.segment(off, f.ambient_dim()) =
            -f.egrad_to_rgrad(z.segment(off, f.ambient_dim()), g.segment(off, f.ambient_dim()));
      }
      return v;
    };
  }
  VectorField f(game.manifold, FieldKind::kGameField, std::move(kernel), lip, std::nullopt);
  f.game_ = std::move(spec);
  return f;
}

VectorField VectorField::cycling() {
  return VectorField(Manifold::sphere(2), FieldKind::kCycling, [](const Vec& x) -> Vec {
    const double x1 = x(0), x2 = x(1), x3 = x(2);
    const double s = x3 * x3 - 0.25;
    Vec v(3);
    v << -x2 + s * x1 * x3, x1 + s * x2 * x3, -s * (x1 * x1 + x2 * x2);
    return v;
  });
}

VectorField VectorField::custom(Manifold manifold, Kernel kernel, std::optional<double> lipschitz,
                                std::optional<double> sup_bound) {
  return VectorField(std::move(manifold), FieldKind::kCustom, std::move(kernel), lipschitz, sup_bound);
}

VectorField VectorField::zero(Manifold manifold) {
  const int n = manifold.ambient_dim();
  return VectorField(std::move(manifold), FieldKind::kCustom, [n](const Vec&) -> Vec { return Vec::Zero(n); }, 0.0,
                     0.0);
}

TangentVec VectorField::eval(const Point& p) const {
  manifold_.check_point(p.coords);
  return {p, kernel_(p.coords)};
}

// ---------------------------------------------------------------------------

WeakCoercivityReport check_weak_coercivity(const VectorField& field, const Vec& base, double radius, int n_samples,
                                           SplitMix64& rng) {
  const Manifold& m = field.manifold();
  if (!m.is_hadamard()) {
    throw Unsupported("weak coercivity check needs a Hadamard manifold, got " + m.id());
  }
  if (!(radius > 0.0)) throw InvalidArgument("weak coercivity radius must be positive");
  m.check_point(base);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  WeakCoercivityReport rep;
  rep.max_value = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n_samples; ++i) {
    // r in (R, 4R]
    const double r = radius * (4.0 - 3.0 * unif(rng));
    const Vec q = m.exp(base, r * m.random_unit_tangent(base, rng));
    const double value = m.inner(q, field(q), -2.0 * m.log(q, base));
    rep.max_value = std::max(rep.max_value, value);
    ++rep.samples;
  }
  rep.passed = rep.samples > 0 && rep.max_value <= 1e-9;
  return rep;
}

double estimate_lipschitz(const VectorField& field, int n_pairs, SplitMix64& rng, double sample_radius) {
  const Manifold& m = field.manifold();
  const double reach = std::min(sample_radius, 0.9 * m.injectivity_radius());
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double best = 0.0;
  for (int i = 0; i < n_pairs; ++i) {
    const Vec p = m.random_point(rng, sample_radius);
    const double r = reach * unif(rng);
    if (r <= 0.0) continue;
    const Vec q = m.exp(p, r * m.random_unit_tangent(p, rng));
    const double d = m.dist(p, q);
    if (d <= 1e-12) continue;
    const Vec diff = m.transport(p, q, field(p)) - field(q);
    best = std::max(best, m.norm(q, diff) / d);
  }
  return best;
}

AccretivityReport check_accretivity(const VectorField& field, double alpha, const std::vector<double>& r_grid,
                                    int n_pairs, SplitMix64& rng, double sample_radius) {
  const Manifold& m = field.manifold();
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double reach = std::min(sample_radius, 0.9 * m.injectivity_radius());
  AccretivityReport rep;
  rep.worst_ratio = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n_pairs; ++i) {
    const Vec p = m.random_point(rng, sample_radius);
    const Vec q = m.exp(p, reach * unif(rng) * m.random_unit_tangent(p, rng));
    const double d = m.dist(p, q);
    if (d <= 1e-12) continue;
    const Vec vp = field(p);
    const Vec vq = field(q);
    for (double r : r_grid) {
      const double lhs = (1.0 + alpha * r) * d;
      const double rhs = m.dist(m.exp(p, r * vp), m.exp(q, r * vq));
      ++rep.checks;
      rep.worst_ratio = std::min(rep.worst_ratio, rhs / lhs);
      // relative slack absorbs round-off in the exactly expanding case
      if (lhs > rhs * (1.0 + 1e-9)) ++rep.violations;
    }
  }
  return rep;
}

}  // namespace rrm
