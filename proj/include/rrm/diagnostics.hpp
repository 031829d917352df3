#pragma once

// Stability and convergence audits over completed trajectories: the smooth
// ramp Lyapunov energy f(dist(base, x)), a one-step supermartingale audit,
// the transported-frame noise accumulation, and scenario verdicts.

#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "rrm/algorithms.hpp"

namespace rrm {

/// 0 for x <= 0, e^{-1/x} / (e^{-1/x} + e^{-1/(1-x)}) on (0, 1), 1 for x >= 1.
double bump_h(double x);
/// Closed-form derivative of bump_h.
double bump_h_prime(double x);

inline constexpr double kRampC1 = 1.0;  // sup f'
inline constexpr double kRampC2 = 2.0;  // sup f''

struct LyapunovSpec {
  Vec base;
  double radius = 1.0;  // R
};

/// f(x) = int_0^x h(s - R) ds; adaptive Simpson on (R, R + 1), exact elsewhere.
double ramp(double radius, double x);
double ramp_prime(double radius, double x);
double ramp_second(double radius, double x);

/// E(p) = f(dist(base, p)). Throws Unsupported off Hadamard manifolds.
double lyapunov_energy(const LyapunovSpec& ls, const Manifold& m, const Vec& p);

/// C = C2 + C1 / R + C1 sqrt(|K_low|).
double hessian_constant(double radius, double k_low);

/// eps_n = gamma C1 B + (3/2) C gamma^2 (M^2 + B^2 + sigma^2).
double lyapunov_increment_bound(double gamma, double bias_bound, double sigma, double sup_field, double c);

struct SupermartingaleRow {
  std::uint64_t n = 0;
  double energy = 0.0;      // E_n
  double drift = 0.0;       // mean of E_{n+1} - E_n over replications
  double std_error = 0.0;
  double epsilon = 0.0;     // eps_n
  bool violated = false;    // drift > eps_n + 1.645 std_error
};

struct SupermartingaleReport {
  bool refused = false;  // weak-coercivity gate failed
  std::string warning;
  std::vector<SupermartingaleRow> rows;
  int violations = 0;
  double pass_rate() const;
  bool passed(double min_rate = 0.95) const { return !refused && pass_rate() >= min_rate; }
};

struct SupermartingaleOptions {
  int replications = 1000;
  int max_audited = 50;        // audited iterates, evenly spread over the trajectory
  int coercivity_samples = 1000;
  std::uint64_t seed = 0;
};

/// For each audited X_n, draws fresh replications of the step X_n -> X_{n+1}
/// and compares the mean energy increment with eps_n. M is the field's sup
/// bound when set, else |V(X_n)|. Refuses (with a warning) unless the field
/// passes check_weak_coercivity(base, R).
SupermartingaleReport supermartingale_audit(const Trajectory& trajectory, const Stage& stage,
                                            const LyapunovSpec& ls, const SupermartingaleOptions& options);

void write_supermartingale_csv(std::ostream& os, const SupermartingaleReport& report);

/// Largest dist(base, X_n) along the run.
double max_distance(const Trajectory& trajectory, const Vec& base);

/// sup over h in [0, T] of |int_t^{t+h} noise| with the noise of each segment
/// written in an orthonormal frame transported along the path from x(t).
/// `frame` (columns) defaults to Manifold::tangent_basis(x(t)).
double noise_accumulation_delta(const Trajectory& trajectory, double t, double horizon, const Mat* frame = nullptr);

// ---------------------------------------------------------------------------
// Scenario verdicts

struct CriticalPoints {
  std::vector<Vec> points;
};
/// Level set {x_k = level}; distance |x_k - level|.
struct LimitCycle {
  int coordinate = 2;
  double level = 0.5;
};

struct ScenarioTarget {
  std::string scenario;  // "critical-points", "limit-cycle" or "potential-game"
  std::variant<CriticalPoints, LimitCycle> target;
  double threshold = 0.05;
};

/// Throws InvalidArgument for an unknown scenario name.
ScenarioTarget make_target(const std::string& scenario, std::variant<CriticalPoints, LimitCycle> target,
                           double threshold);

double target_distance(const ScenarioTarget& target, const Manifold& m, const Vec& x);

struct ConvergenceVerdict {
  std::string scenario;
  std::string metric;
  double value = 0.0;        // mean over the terminal window (last 5% of iterates)
  double final_value = 0.0;  // at X_N
  double threshold = 0.0;
  bool passed = false;
};

ConvergenceVerdict scenario_verdict(const Trajectory& trajectory, const ScenarioTarget& target);

/// Columns: scenario, metric, value, final_value, threshold, passed.
void write_verdicts_csv(std::ostream& os, const std::vector<ConvergenceVerdict>& verdicts);

}  // namespace rrm
