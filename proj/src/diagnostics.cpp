#include "rrm/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "rrm/errors.hpp"
#include "rrm/io.hpp"
#include "rrm/random.hpp"

namespace rrm {

double bump_h(double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  // e^{-1/x} / (e^{-1/x} + e^{-1/(1-x)}) = 1 / (1 + e^{1/x - 1/(1-x)})
  return 1.0 / (1.0 + std::exp(1.0 / x - 1.0 / (1.0 - x)));
}

double bump_h_prime(double x) {
  if (x <= 0.0 || x >= 1.0) return 0.0;
  const double h = bump_h(x);
  return h * (1.0 - h) * (1.0 / (x * x) + 1.0 / ((1.0 - x) * (1.0 - x)));
}

namespace {

double simpson(double fa, double fm, double fb, double a, double b) { return (b - a) / 6.0 * (fa + 4.0 * fm + fb); }

double adaptive_simpson(double a, double b, double fa, double fm, double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = bump_h(lm), frm = bump_h(rm);
  const double left = simpson(fa, flm, fm, a, m);
  const double right = simpson(fm, frm, fb, m, b);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return adaptive_simpson(a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

// int_0^u h(s) ds for u in [0, 1].
double bump_integral(double u) {
  if (u <= 0.0) return 0.0;
  const double fa = bump_h(0.0), fb = bump_h(u), fm = bump_h(0.5 * u);
  return adaptive_simpson(0.0, u, fa, fm, fb, simpson(fa, fm, fb, 0.0, u), 1e-10, 50);
}

}  // namespace

double ramp(double radius, double x) {
  const double u = x - radius;
  if (u <= 0.0) return 0.0;
  // h(1 - s) = 1 - h(s), so the bump integrates to exactly 1/2 over [0, 1].
  if (u >= 1.0) return 0.5 + (u - 1.0);
  return bump_integral(u);
}

double ramp_prime(double radius, double x) { return bump_h(x - radius); }
double ramp_second(double radius, double x) { return bump_h_prime(x - radius); }

double lyapunov_energy(const LyapunovSpec& ls, const Manifold& m, const Vec& p) {
  if (!m.is_hadamard()) throw Unsupported("Lyapunov energy needs a Hadamard manifold, got " + m.id());
  return ramp(ls.radius, m.dist(ls.base, p));
}

double hessian_constant(double radius, double k_low) {
  return kRampC2 + kRampC1 / radius + kRampC1 * std::sqrt(std::abs(k_low));
}

double lyapunov_increment_bound(double gamma, double bias_bound, double sigma, double sup_field, double c) {
  return gamma * kRampC1 * bias_bound +
         1.5 * c * gamma * gamma * (sup_field * sup_field + bias_bound * bias_bound + sigma * sigma);
}

double SupermartingaleReport::pass_rate() const {
  if (rows.empty()) return 0.0;
  return 1.0 - static_cast<double>(violations) / static_cast<double>(rows.size());
}

SupermartingaleReport supermartingale_audit(const Trajectory& tr, const Stage& stage, const LyapunovSpec& ls,
                                            const SupermartingaleOptions& opt) {
  if (opt.replications < 2) throw InvalidArgument("supermartingale audit needs >= 2 replications");
  if (!(ls.radius > 0.0)) throw InvalidArgument("Lyapunov radius must be > 0");
  SupermartingaleReport rep;
  const Manifold& m = tr.manifold;
  const VectorField& field = stage.oracle.field;

  SplitMix64 gate_rng(derive_seed(opt.seed, 0, SeedStream::kAudit));
  try {
    const auto wc = check_weak_coercivity(field, ls.base, ls.radius, opt.coercivity_samples, gate_rng);
    if (!wc.passed) {
      rep.refused = true;
      rep.warning = "weak coercivity fails outside radius " + format_double(ls.radius) + " (max inner product " +
                    format_double(wc.max_value) + "); audit skipped";
      return rep;
    }
  } catch (const Unsupported& e) {
    rep.refused = true;
    rep.warning = std::string(e.what()) + "; audit skipped";
    return rep;
  }

  const std::size_t steps = tr.records.size();
  if (steps == 0) return rep;
  const std::size_t count = std::min<std::size_t>(steps, static_cast<std::size_t>(std::max(1, opt.max_audited)));
  const double c = hessian_constant(ls.radius, m.curvature_lower());
  for (std::size_t j = 0; j < count; ++j) {
    const std::size_t i = count == 1 ? 0 : j * (steps - 1) / (count - 1);
    const Vec& x = tr.states[i];
    const std::uint64_t n = i + 1;
    const double e0 = lyapunov_energy(ls, m, x);
    double sum = 0.0, sum_sq = 0.0;
    for (int r = 0; r < opt.replications; ++r) {
      Carry carry;
      const std::uint64_t seed = derive_seed(opt.seed ^ mix64(n), static_cast<std::uint64_t>(r), SeedStream::kAudit);
      const StepOutcome out = rrm_step(stage.algorithm, stage.oracle, tr.steps[i], x, n, seed, carry);
      const double de = lyapunov_energy(ls, m, out.next) - e0;
      sum += de;
      sum_sq += de * de;
    }
    const double reps = opt.replications;
    SupermartingaleRow row;
    row.n = n;
    row.energy = e0;
    row.drift = sum / reps;
    const double var = std::max(0.0, (sum_sq - reps * row.drift * row.drift) / (reps - 1.0));
    row.std_error = std::sqrt(var / reps);
    const double sup_field = field.sup_bound() ? *field.sup_bound() : m.norm(x, field(x));
    row.epsilon = lyapunov_increment_bound(tr.steps[i], stage.oracle.bias_bound(n), stage.oracle.sigma, sup_field, c);
    row.violated = row.drift > row.epsilon + 1.645 * row.std_error;
    rep.violations += row.violated ? 1 : 0;
    rep.rows.push_back(row);
  }
  return rep;
}

void write_supermartingale_csv(std::ostream& os, const SupermartingaleReport& report) {
  os << "n,energy,drift,std_error,epsilon,violated\n";
  for (const auto& r : report.rows) {
    os << r.n << ',' << format_double(r.energy) << ',' << format_double(r.drift) << ',' << format_double(r.std_error)
       << ',' << format_double(r.epsilon) << ',' << (r.violated ? 1 : 0) << '\n';
  }
}

double max_distance(const Trajectory& tr, const Vec& base) {
  double mx = 0.0;
  for (const auto& x : tr.states) mx = std::max(mx, tr.manifold.dist(base, x));
  return mx;
}

double noise_accumulation_delta(const Trajectory& tr, double t, double horizon, const Mat* frame) {
  if (!(horizon >= 0.0)) throw InvalidArgument("noise accumulation: horizon must be >= 0");
  const auto& tau = tr.times;
  if (!(t >= tau.front()) || t + horizon > tau.back()) {
    throw RangeError("noise accumulation: [t, t + T] = [" + format_double(t) + ", " + format_double(t + horizon) +
                     "] not inside [0, " + format_double(tau.back()) + "]");
  }
  const Manifold& m = tr.manifold;
  const std::size_t i0 =
      static_cast<std::size_t>(std::upper_bound(tau.begin(), tau.end(), t) - tau.begin()) - 1;
  if (i0 >= tr.records.size() || horizon == 0.0) return 0.0;

  const Vec xt = (t == tau[i0]) ? tr.states[i0] : m.exp(tr.states[i0], (t - tau[i0]) * tr.records[i0].signal);
  Mat e = frame ? *frame : m.tangent_basis(xt);
  const auto coords = [&](const Vec& at, const Mat& f, const Vec& v) {
    Vec c(f.cols());
    for (int k = 0; k < f.cols(); ++k) c(k) = m.inner(at, f.col(k), v);
    return c;
  };
  const auto carry_frame = [&](const Vec& from, const Vec& to, const Mat& f) {
    Mat g(f.rows(), f.cols());
    for (int k = 0; k < f.cols(); ++k) g.col(k) = m.transport(from, to, f.col(k));
    return g;
  };

  const double t_end = t + horizon;
  Vec sum = Vec::Zero(e.cols());
  double sup = 0.0;
  // First (partial) segment: the frame lives at x(t), on the same geodesic as X_{i0}.
  {
    const Vec v = m.transport(tr.states[i0], xt, tr.records[i0].noise);
    const double len = std::min(tau[i0 + 1], t_end) - t;
    sum += len * coords(xt, e, v);
    sup = std::max(sup, sum.norm());
    e = carry_frame(xt, tr.states[i0 + 1], e);
  }
  for (std::size_t i = i0 + 1; i < tr.records.size() && tau[i] < t_end; ++i) {
    const double len = std::min(tau[i + 1], t_end) - tau[i];
    sum += len * coords(tr.states[i], e, tr.records[i].noise);
    sup = std::max(sup, sum.norm());
    if (i + 1 < tr.states.size()) e = carry_frame(tr.states[i], tr.states[i + 1], e);
  }
  return sup;
}

// ---------------------------------------------------------------------------

ScenarioTarget make_target(const std::string& scenario, std::variant<CriticalPoints, LimitCycle> target,
                           double threshold) {
  if (scenario != "critical-points" && scenario != "limit-cycle" && scenario != "potential-game") {
    throw InvalidArgument("unknown verdict scenario '" + scenario + "'");
  }
  if (scenario == "limit-cycle" && !std::holds_alternative<LimitCycle>(target)) {
    throw InvalidArgument("limit-cycle verdict needs a level-set target");
  }
  if (scenario != "limit-cycle" && !std::holds_alternative<CriticalPoints>(target)) {
    throw InvalidArgument(scenario + " verdict needs a set of points");
  }
  if (const auto* cp = std::get_if<CriticalPoints>(&target); cp && cp->points.empty()) {
    throw InvalidArgument(scenario + " verdict needs at least one target point");
  }
  if (!(threshold > 0.0)) throw InvalidArgument("verdict threshold must be > 0");
  return {scenario, std::move(target), threshold};
}

double target_distance(const ScenarioTarget& target, const Manifold& m, const Vec& x) {
  if (const auto* cp = std::get_if<CriticalPoints>(&target.target)) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : cp->points) best = std::min(best, m.dist(x, p));
    return best;
  }
  const auto& lc = std::get<LimitCycle>(target.target);
  if (lc.coordinate < 0 || lc.coordinate >= x.size()) throw InvalidArgument("limit-cycle coordinate out of range");
  return std::abs(x(lc.coordinate) - lc.level);
}

ConvergenceVerdict scenario_verdict(const Trajectory& tr, const ScenarioTarget& target) {
  if (tr.states.empty()) throw InvalidArgument("verdict needs a non-empty trajectory");
  ConvergenceVerdict v;
  v.scenario = target.scenario;
  v.metric = std::holds_alternative<LimitCycle>(target.target) ? "dist_to_cycle" : "dist_to_critical_set";
  v.threshold = target.threshold;
  const std::size_t n = tr.states.size();
  const std::size_t window = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(0.05 * n)));
  double sum = 0.0;
  for (std::size_t i = n - window; i < n; ++i) sum += target_distance(target, tr.manifold, tr.states[i]);
  v.value = sum / static_cast<double>(window);
  v.final_value = target_distance(target, tr.manifold, tr.states.back());
  v.passed = v.value <= v.threshold;
  return v;
}

void write_verdicts_csv(std::ostream& os, const std::vector<ConvergenceVerdict>& verdicts) {
  os << "scenario,metric,value,final_value,threshold,passed\n";
  for (const auto& v : verdicts) {
    os << v.scenario << ',' << v.metric << ',' << format_double(v.value) << ',' << format_double(v.final_value) << ','
       << format_double(v.threshold) << ',' << (v.passed ? 1 : 0) << '\n';
  }
}

}  // namespace rrm
