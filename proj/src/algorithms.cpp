#include "rrm/algorithms.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "rrm/errors.hpp"
#include "rrm/io.hpp"
#include "rrm/random.hpp"

namespace rrm {

std::string to_string(Method m) {
  switch (m) {
    case Method::kRSGM:
      return "RSGM";
    case Method::kRPPM:
      return "RPPM";
    case Method::kRSEG:
      return "RSEG";
    case Method::kROG:
      return "ROG";
  }
  return "?";
}

std::string to_string(MapMode m) { return m == MapMode::kExponential ? "exponential" : "retraction"; }

void validate(const AlgorithmSpec& spec, const Manifold& m) {
  if (spec.alternating && (m.kind() != ManifoldKind::kProduct || m.factors().size() != 2)) {
    throw InvalidArgument("alternating updates need a product of exactly two manifolds, got " + m.id());
  }
  if (!(spec.ppm.tol > 0.0)) throw InvalidArgument("ppm solver tol must be > 0");
  if (spec.ppm.max_iters < 1) throw InvalidArgument("ppm solver max_iters must be >= 1");
}

Scheme single(AlgorithmSpec algorithm, OracleSpec oracle) {
  validate(algorithm, oracle.manifold());
  return Scheme{{Stage{algorithm, std::move(oracle)}}};
}

Scheme compose(const Scheme& first, const Scheme& second) {
  if (first.stages.empty() || second.stages.empty()) throw InvalidArgument("compose: empty scheme");
  if (first.manifold() != second.manifold()) {
    throw InvalidArgument("compose: manifold mismatch (" + first.manifold().id() + " vs " + second.manifold().id() +
                          ")");
  }
  Scheme out = first;
  out.stages.insert(out.stages.end(), second.stages.begin(), second.stages.end());
  return out;
}

Scheme compose(const Stage& first, const Stage& second) {
  return compose(single(first.algorithm, first.oracle), single(second.algorithm, second.oracle));
}

namespace {

// The hyperboloid retraction is only defined for |v| < 1.
bool clip_retraction_domain(const Manifold& m, Vec& v) {
  if (m.kind() == ManifoldKind::kHyperbolic) {
    const double n = std::sqrt(std::max(0.0, minkowski(v, v)));
    if (n <= kClipFraction) return false;
    v *= kClipFraction / n;
    return true;
  }
  if (m.kind() == ManifoldKind::kProduct) {
    bool clipped = false;
    for (std::size_t i = 0; i < m.factors().size(); ++i) {
      const auto& f = m.factors()[i];
      Vec seg = v.segment(m.factor_offset(i), f.ambient_dim());
      if (clip_retraction_domain(f, seg)) {
        v.segment(m.factor_offset(i), f.ambient_dim()) = seg;
        clipped = true;
      }
    }
    return clipped;
  }
  return false;
}

struct Mover {
  const Manifold& m;
  const AlgorithmSpec& a;
  bool clipped = false;

  // Applies the injectivity policy to a step vector.
  Vec admissible(Vec v) {
    if (a.injectivity == InjectivityPolicy::kError) {
      Vec probe = v;
      if (m.clip_step(probe, 1.0)) throw DomainError("step leaves the injectivity radius of " + m.id());
      if (a.map_mode == MapMode::kRetraction && clip_retraction_domain(m, probe)) {
        throw DomainError("step leaves the retraction domain of " + m.id());
      }
    } else {
      clipped = m.clip_step(v, kClipFraction) || clipped;
      if (a.map_mode == MapMode::kRetraction) clipped = clip_retraction_domain(m, v) || clipped;
    }
    return v;
  }

  Vec map(const Vec& x, const Vec& v) const { return a.map_mode == MapMode::kExponential ? m.exp(x, v) : m.retract(x, v); }

  Vec to(const Vec& from, const Vec& at, const Vec& v) const {
    if (!m.within_injectivity(from, at)) throw DomainError("transport beyond the injectivity radius of " + m.id());
    return m.transport(from, at, v);
  }
};

// Result of one base-method update on the full state: next = map_x(step).
struct Update {
  Vec step;   // gamma * signal, tangent at x (after the injectivity policy)
  Vec signal;
  Vec noise;  // noise part of the signal, tangent at x
  std::optional<Vec> bias;  // set when the oracle split is exact (unclipped RSGM)
  std::optional<Vec> lead;
  double generator_norm = 0.0;
  bool clipped = false;
  int inner_iterations = 0;
  double inner_residual = 0.0;
  bool contraction_violated = false;
};

Update base_update(const AlgorithmSpec& a, const OracleSpec& o, double gamma, const Vec& x, std::uint64_t n,
                   std::uint64_t seed_main, std::uint64_t seed_half, std::uint64_t seed_boot, Carry::Slot& slot) {
  const Manifold& m = o.manifold();
  Mover mv{m, a};
  Update u;
  switch (a.method) {
    case Method::kRSGM: {
      const RawSample s = sample(o, x, seed_main, n);
      u.step = mv.admissible(gamma * s.value);
      u.noise = s.noise;
      if (!mv.clipped) {
        u.signal = s.value;
        u.bias = s.bias;
      }
      break;
    }
    case Method::kRPPM: {
      const double lip = o.field.lipschitz().value_or(0.0);
      u.contraction_violated = gamma * lip >= 1.0;
      Vec y = x;
      Vec y_gen = x;
      Vec w;
      RawSample s;
      double res = std::numeric_limits<double>::infinity();
      int k = 0;
      while (k < a.ppm.max_iters) {
        y_gen = y;
        s = sample(o, y, seed_main, n);
        w = mv.admissible(gamma * mv.to(y, x, s.value));
        const Vec y_next = mv.map(x, w);
        res = m.dist(y_next, y);
        ++k;
        y = y_next;
        if (res <= a.ppm.tol) break;
      }
      if (!(res <= a.ppm.tol)) {
        throw SolverError("proximal fixed-point iteration did not converge in " + std::to_string(k) +
                              " iterations (residual " + format_double(res) + ")" +
                              (u.contraction_violated ? "; gamma L >= 1" : ""),
                          res, u.contraction_violated);
      }
      u.step = w;
      u.noise = mv.to(y_gen, x, s.noise);
      u.lead = y;
      u.inner_iterations = k;
      u.inner_residual = res;
      break;
    }
    case Method::kRSEG: {
      const RawSample s0 = sample(o, x, seed_main, n);
      u.generator_norm = m.norm(x, s0.value);
      const Vec lead = mv.map(x, mv.admissible(gamma * s0.value));
      const RawSample s1 = sample(o, lead, seed_half, n);
      u.step = mv.admissible(gamma * mv.to(lead, x, s1.value));
      u.noise = mv.to(lead, x, s1.noise);
      u.lead = lead;
      break;
    }
    case Method::kROG: {
      if (!slot.ready) {
        const RawSample boot = sample(o, x, seed_boot, n);
        slot.base = x;
        slot.query = boot.value;
        slot.ready = true;
      }
      const Vec carried = mv.to(slot.base, x, slot.query);
      u.generator_norm = m.norm(x, carried);
      const Vec lead = mv.map(x, mv.admissible(gamma * carried));
      const RawSample s1 = sample(o, lead, seed_main, n);
      u.step = mv.admissible(gamma * mv.to(lead, x, s1.value));
      u.noise = mv.to(lead, x, s1.noise);
      u.lead = lead;
      slot.base = lead;
      slot.query = s1.value;
      break;
    }
  }
  u.clipped = mv.clipped;
  if (u.signal.size() == 0) u.signal = u.step / gamma;
  return u;
}

}  // namespace

StepOutcome rrm_step(const AlgorithmSpec& a, const OracleSpec& o, double gamma, const Vec& x, std::uint64_t n,
                     std::uint64_t master_seed, Carry& carry) {
  const Manifold& m = o.manifold();
  validate(a, m);
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InvalidArgument("step size must be positive and finite");
  if (carry.slots.size() < 2) carry.slots.resize(2);
  Mover mv{m, a};

  IterateRecord rec;
  rec.n = n;
  rec.gamma = gamma;
  rec.field = o.field(x);
  rec.seed_id = derive_seed(master_seed, n, SeedStream::kMain);
  rec.sigma_bound = o.sigma;
  rec.bias_bound = o.bias_bound(n);

  Vec next;
  Vec step;
  Vec signal;
  std::optional<Vec> exact_bias;
  if (!a.alternating) {
    Update u = base_update(a, o, gamma, x, n, rec.seed_id, derive_seed(master_seed, n, SeedStream::kHalf),
                           derive_seed(master_seed, 0, SeedStream::kMain), carry.slots[0]);
    next = mv.map(x, u.step);
    step = std::move(u.step);
    signal = std::move(u.signal);
    exact_bias = std::move(u.bias);
    rec.noise = std::move(u.noise);
    rec.lead = std::move(u.lead);
    rec.generator_norm = u.generator_norm;
    rec.clipped = u.clipped;
    rec.inner_iterations = u.inner_iterations;
    rec.inner_residual = u.inner_residual;
    rec.contraction_violated = u.contraction_violated;
  } else {
    // Gauss-Seidel: player 1 commits its block of a full update, then player 2
    // updates from the refreshed state (x1+, x2).
    const Manifold& f1 = m.factors()[0];
    const int o1 = m.factor_offset(0), d1 = f1.ambient_dim();
    const int o2 = m.factor_offset(1), d2 = m.factors()[1].ambient_dim();

    Update u1 = base_update(a, o, gamma, x, n, rec.seed_id, derive_seed(master_seed, n, SeedStream::kHalf),
                            derive_seed(master_seed, 0, SeedStream::kMain), carry.slots[0]);
    Vec mid = x;
    Vec step1 = u1.step.segment(o1, d1);
    mid.segment(o1, d1) = a.map_mode == MapMode::kExponential ? f1.exp(x.segment(o1, d1), step1)
                                                               : f1.retract(x.segment(o1, d1), step1);

    Update u2 = base_update(a, o, gamma, mid, n, derive_seed(master_seed, n, SeedStream::kBlock2),
                            derive_seed(master_seed, n, SeedStream::kBlock2Half),
                            derive_seed(master_seed, 0, SeedStream::kBlock2), carry.slots[1]);
    next = mid;
    const Vec step2 = u2.step.segment(o2, d2);
    next.segment(o2, d2) = a.map_mode == MapMode::kExponential
                               ? m.factors()[1].exp(x.segment(o2, d2), step2)
                               : m.factors()[1].retract(x.segment(o2, d2), step2);

    step = Vec::Zero(x.size());
    step.segment(o1, d1) = step1;
    step.segment(o2, d2) = step2;
    signal = Vec::Zero(x.size());
    signal.segment(o1, d1) = u1.signal.segment(o1, d1);
    signal.segment(o2, d2) = u2.signal.segment(o2, d2);
    rec.noise = Vec::Zero(x.size());
    rec.noise.segment(o1, d1) = u1.noise.segment(o1, d1);
    rec.noise.segment(o2, d2) = u2.noise.segment(o2, d2);
    rec.lead = std::move(u1.lead);
    rec.generator_norm = u1.generator_norm;
    rec.clipped = u1.clipped || u2.clipped;
    rec.inner_iterations = u1.inner_iterations + u2.inner_iterations;
    rec.inner_residual = std::max(u1.inner_residual, u2.inner_residual);
    rec.contraction_violated = u1.contraction_violated || u2.contraction_violated;

    const Vec v_mid = o.field(mid);
    rec.alternation_bias = m.factors()[1].norm(x.segment(o2, d2), v_mid.segment(o2, d2) - rec.field.segment(o2, d2));
    rec.block1_update = f1.norm(x.segment(o1, d1), step1) / gamma;
  }

  if (a.map_mode == MapMode::kExponential) {
    rec.signal = std::move(signal);
  } else {
    rec.signal = m.log(x, next) / gamma;
    exact_bias.reset();
  }
  rec.bias = exact_bias ? *exact_bias : Vec(rec.signal - rec.field - rec.noise);
  return {std::move(next), std::move(rec)};
}

StepOutcome rrm_step(const AlgorithmSpec& a, const OracleSpec& o, const StepSchedule& schedule, const Vec& x,
                     std::uint64_t n, std::uint64_t master_seed, Carry& carry) {
  return rrm_step(a, o, schedule.gamma(n), x, n, master_seed, carry);
}

std::size_t Trajectory::count_until(double t) const {
  return static_cast<std::size_t>(std::upper_bound(times.begin(), times.end(), t) - times.begin());
}

Trajectory run(const Scheme& scheme, const StepSchedule& schedule, const Vec& x0, std::size_t n_states,
               std::uint64_t master_seed) {
  if (scheme.stages.empty()) throw InvalidArgument("run: empty scheme");
  if (n_states < 1) throw InvalidArgument("run: N must be >= 1");
  const Manifold& m = scheme.manifold();
  for (const auto& st : scheme.stages) {
    if (st.oracle.manifold() != m) throw InvalidArgument("run: stages live on different manifolds");
    validate(st.algorithm, m);
    if (st.oracle.sigma < 0.0) throw InvalidArgument("oracle sigma must be >= 0");
  }
  m.check_point(x0);

  Trajectory tr;
  tr.manifold = m;
  tr.states.reserve(n_states);
  tr.steps.reserve(n_states - 1);
  tr.times.reserve(n_states);
  tr.records.reserve(n_states - 1);
  tr.states.push_back(x0);
  tr.times.push_back(0.0);

  std::vector<Carry> carries(scheme.stages.size());
  for (std::size_t k = 1; k < n_states; ++k) {
    const std::size_t s = (k - 1) % scheme.stages.size();
    const Stage& st = scheme.stages[s];
    StepOutcome out;
    try {
      out = rrm_step(st.algorithm, st.oracle, schedule.step(k), tr.states.back(), k, master_seed, carries[s]);
      if (!out.next.allFinite()) throw DomainError("non-finite iterate");
    } catch (const std::exception& e) {
      throw IterateError(k, e.what());
    }
    out.record.stage = static_cast<int>(s);
    tr.steps.push_back(out.record.gamma);
    tr.times.push_back(tr.times.back() + out.record.gamma);
    tr.states.push_back(std::move(out.next));
    tr.records.push_back(std::move(out.record));
  }
  return tr;
}

Trajectory run(const AlgorithmSpec& algorithm, const OracleSpec& oracle, const StepSchedule& schedule, const Vec& x0,
               std::size_t n_states, std::uint64_t master_seed) {
  return run(single(algorithm, oracle), schedule, x0, n_states, master_seed);
}

ErrorBoundsAudit audit_error_bounds(const Trajectory& tr) {
  std::vector<double> sigma(tr.records.size()), bias(tr.records.size());
  for (std::size_t i = 0; i < tr.records.size(); ++i) {
    const auto& r = tr.records[i];
    sigma[i] = r.sigma_bound;
    bias[i] = std::max(r.bias_bound, tr.manifold.norm(tr.states[i], r.bias));
  }
  return audit_error_bounds(tr.steps, sigma, bias);
}

void write_trajectory_csv(std::ostream& os, const Trajectory& tr, std::size_t stride, std::optional<int> replication) {
  if (stride == 0) stride = 1;
  const int dim = tr.manifold.ambient_dim();
  if (replication) os << "replication,";
  os << "n,tau,gamma";
  for (int i = 0; i < dim; ++i) os << ",x" << i;
  os << ",norm_U,norm_noise,norm_bias\n";
  const std::size_t last = tr.size() - 1;
  for (std::size_t i = 0; i < tr.size(); ++i) {
    if (i % stride != 0 && i != last) continue;
    if (replication) os << *replication << ',';
    os << (i + 1) << ',' << format_double(tr.times[i]) << ',';
    if (i < tr.records.size()) os << format_double(tr.steps[i]);
    for (int j = 0; j < dim; ++j) os << ',' << format_double(tr.states[i](j));
    if (i < tr.records.size()) {
      const auto& r = tr.records[i];
      const Vec& x = tr.states[i];
      os << ',' << format_double(tr.manifold.norm(x, r.error())) << ',' << format_double(tr.manifold.norm(x, r.noise))
         << ',' << format_double(tr.manifold.norm(x, r.bias));
    } else {
      os << ",,,";
    }
    os << '\n';
  }
}

}  // namespace rrm
