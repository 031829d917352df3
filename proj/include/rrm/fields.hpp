#pragma once

// Vector fields V on manifolds, stated so that the stochastic recursion moves
// along +V. Minimization problems therefore enter as V = -grad f.

#include <functional>
#include <memory>
#include <optional>
#include <variant>
#include <vector>

#include "rrm/geometry.hpp"

namespace rrm {

// ---------------------------------------------------------------------------
// Potentials

/// f(x) = x^T A x on Sphere(d); with `maximize` the objective is -x^T A x, so
/// -grad f flows to the leading eigenvector.
struct RayleighQuotient {
  Mat a;
  bool maximize = false;
};

/// f(x) = 1/2 sum_i w_i dist(x, a_i)^2 on HyperbolicLorentz(d).
struct FrechetMean {
  std::vector<Vec> anchors;
  std::vector<double> weights;
};

/// f(x) = 1/2 |x - c|^2 on Euclidean(d).
struct QuadraticBowl {
  Vec center;
};

/// A smooth function of the ambient coordinates restricted to `manifold`.
struct AmbientPotential {
  Manifold manifold;
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> euclidean_gradient;
};

using PotentialSpec = std::variant<RayleighQuotient, FrechetMean, QuadraticBowl, AmbientPotential>;

Manifold potential_manifold(const PotentialSpec& spec);
/// Throws InvalidArgument on asymmetric A, negative or unnormalized weights, off-manifold anchors.
void validate(const PotentialSpec& spec);
double potential_value(const PotentialSpec& spec, const Vec& x);
Vec riemannian_gradient(const PotentialSpec& spec, const Vec& x);

// ---------------------------------------------------------------------------
// Two-player games

/// Phi(x, y) = x^T C y on Euclidean(n) x Euclidean(m); min player x, max player y.
struct BilinearMinMax {
  Mat coupling;
};

/// Every player minimizes a shared potential defined on the product manifold.
struct PotentialGame {
  AmbientPotential potential;
};

struct GameSpec {
  Manifold manifold;
  std::variant<BilinearMinMax, PotentialGame> payoff;
};

GameSpec bilinear_game(const Mat& coupling);
GameSpec potential_game(AmbientPotential potential);
/// Two players on Sphere(n-1) sharing the potential -x^T A y (both want x^T A y large).
GameSpec coordination_game(const Mat& a);

// ---------------------------------------------------------------------------

enum class FieldKind { kNegGradient, kGameField, kCycling, kCustom };

class VectorField {
 public:
  /// Must return a tangent vector at its argument and be free of hidden state.
  using Kernel = std::function<Vec(const Vec&)>;

  VectorField(Manifold manifold, FieldKind kind, Kernel kernel, std::optional<double> lipschitz = std::nullopt,
              std::optional<double> sup_bound = std::nullopt);

  static VectorField negative_gradient(const PotentialSpec& potential);
  static VectorField game(const GameSpec& game);
  /// The rotating field on Sphere(2) with an attracting invariant circle at x_3 = 1/2.
  static VectorField cycling();
  static VectorField custom(Manifold manifold, Kernel kernel, std::optional<double> lipschitz = std::nullopt,
                            std::optional<double> sup_bound = std::nullopt);
  static VectorField zero(Manifold manifold);

  const Manifold& manifold() const noexcept { return manifold_; }
  FieldKind kind() const noexcept { return kind_; }
  std::optional<double> lipschitz() const noexcept { return lipschitz_; }
  std::optional<double> sup_bound() const noexcept { return sup_bound_; }
  const PotentialSpec* potential() const noexcept { return potential_.get(); }
  const GameSpec* game_spec() const noexcept { return game_.get(); }

  /// Unchecked evaluation on ambient coordinates.
  Vec operator()(const Vec& x) const { return kernel_(x); }
  /// Checked evaluation: throws InvalidArgument for off-manifold points.
  TangentVec eval(const Point& p) const;

 private:
  Manifold manifold_;
  FieldKind kind_;
  Kernel kernel_;
  std::optional<double> lipschitz_;
  std::optional<double> sup_bound_;
  std::shared_ptr<const PotentialSpec> potential_;
  std::shared_ptr<const GameSpec> game_;
};

// ---------------------------------------------------------------------------
// Field audits

struct WeakCoercivityReport {
  double max_value = 0.0;  // max of <V(q), -2 log_q(base)> over samples
  int samples = 0;
  bool passed = false;
};

/// Samples q with dist(base, q) in (R, 4R] and checks <V(q), grad dist^2(base, .)(q)> <= 1e-9.
/// Throws Unsupported unless the manifold is Hadamard.
WeakCoercivityReport check_weak_coercivity(const VectorField& field, const Vec& base, double radius, int n_samples,
                                           SplitMix64& rng);

/// max |Gamma_{p->q} V(p) - V(q)| / dist(p, q) over random pairs; a lower bound on L.
/// p is drawn by Manifold::random_point(sample_radius), q within min(sample_radius, 0.9 inj) of p.
double estimate_lipschitz(const VectorField& field, int n_pairs, SplitMix64& rng, double sample_radius = 1.0);

struct AccretivityReport {
  int violations = 0;
  int checks = 0;
  double worst_ratio = 0.0;  // min over checks of expanded distance / ((1 + alpha r) dist)
  bool passed() const noexcept { return violations == 0; }
};

/// Empirical test of (1 + alpha r) dist(p, q) <= dist(exp_p(r V(p)), exp_q(r V(q))).
AccretivityReport check_accretivity(const VectorField& field, double alpha, const std::vector<double>& r_grid,
                                    int n_pairs, SplitMix64& rng, double sample_radius = 1.0);

}  // namespace rrm
