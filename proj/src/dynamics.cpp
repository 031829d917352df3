#include "rrm/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "rrm/errors.hpp"
#include "rrm/io.hpp"

namespace rrm {

std::string to_string(FlowScheme s) { return s == FlowScheme::kGeodesicEuler ? "euler" : "rk4"; }

namespace {

Vec advance(const FlowIntegrator& fi, const Manifold& m, const Vec& y, double d) {
  if (fi.scheme == FlowScheme::kGeodesicEuler) return m.exp(y, d * fi.field(y));
  // Stage derivatives are transported back to y before they are combined.
  const Vec k1 = fi.field(y);
  const Vec y2 = m.exp(y, 0.5 * d * k1);
  const Vec k2 = m.transport(y2, y, fi.field(y2));
  const Vec y3 = m.exp(y, 0.5 * d * k2);
  const Vec k3 = m.transport(y3, y, fi.field(y3));
  const Vec y4 = m.exp(y, d * k3);
  const Vec k4 = m.transport(y4, y, fi.field(y4));
  return m.exp(y, (d / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
}

Vec integrate(const FlowIntegrator& fi, Vec y, double h) {
  if (h == 0.0) return y;
  const auto steps = static_cast<long>(std::ceil(h / fi.h_step - 1e-9));
  const double d = h / static_cast<double>(std::max(1L, steps));
  const Manifold& m = fi.field.manifold();
  for (long i = 0; i < std::max(1L, steps); ++i) y = advance(fi, m, y, d);
  return y;
}

void check_integrator(const FlowIntegrator& fi) {
  if (!(fi.h_step > 0.0)) throw InvalidArgument("flow integrator h_step must be > 0");
}

}  // namespace

Vec flow(const FlowIntegrator& fi, const Vec& x, double h) {
  check_integrator(fi);
  if (!(h >= 0.0)) throw InvalidArgument("flow time must be >= 0");
  return integrate(fi, x, h);
}

Point flow(const FlowIntegrator& fi, const Point& x, double h) {
  fi.field.manifold().check_point(x.coords);
  return Point{flow(fi, x.coords, h)};
}

std::vector<Vec> flow_grid(const FlowIntegrator& fi, const Vec& x, double dh, int count) {
  check_integrator(fi);
  if (!(dh >= 0.0) || count < 0) throw InvalidArgument("flow_grid: need dh >= 0 and count >= 0");
  std::vector<Vec> out;
  out.reserve(count + 1);
  out.push_back(x);
  for (int j = 0; j < count; ++j) out.push_back(integrate(fi, out.back(), dh));
  return out;
}

// ---------------------------------------------------------------------------

InterpolatedPath::InterpolatedPath(const Trajectory& trajectory) : tr_(&trajectory) {
  if (trajectory.states.empty()) throw InvalidArgument("interpolation needs a non-empty trajectory");
}

std::size_t InterpolatedPath::segment(double t) const {
  const auto& tau = tr_->times;
  if (!(t >= tau.front() && t <= tau.back())) {
    throw RangeError("time " + format_double(t) + " outside [" + format_double(tau.front()) + ", " +
                     format_double(tau.back()) + "]");
  }
  const auto it = std::upper_bound(tau.begin(), tau.end(), t);
  return static_cast<std::size_t>(it - tau.begin()) - 1;
}

Vec InterpolatedPath::operator()(double t) const {
  const std::size_t i = segment(t);
  const double off = t - tr_->times[i];
  if (off == 0.0 || i >= tr_->records.size()) return tr_->states[i];
  return tr_->manifold.exp(tr_->states[i], off * tr_->records[i].signal);
}

double InterpolatedPath::max_signal(double t0, double t1) const {
  double mx = 0.0;
  const std::size_t a = segment(t0), b = std::min(segment(t1), tr_->records.size() - 1);
  for (std::size_t i = a; i <= b && i < tr_->records.size(); ++i) {
    mx = std::max(mx, tr_->manifold.norm(tr_->states[i], tr_->records[i].signal));
  }
  return mx;
}

double InterpolatedPath::min_step(double t0, double t1) const {
  double mn = std::numeric_limits<double>::infinity();
  const std::size_t a = segment(t0), b = segment(t1);
  for (std::size_t i = a; i <= b && i < tr_->steps.size(); ++i) mn = std::min(mn, tr_->steps[i]);
  return mn;
}

double default_h_step(const InterpolatedPath& path, double t, double horizon) {
  return std::min(1e-3, path.min_step(t, t + horizon) / 10.0);
}

double apt_deviation(const InterpolatedPath& path, const FlowIntegrator& fi, double t, double horizon, int grid_k) {
  if (grid_k < 1) throw InvalidArgument("apt_deviation: grid_k must be >= 1");
  if (!(horizon >= 0.0)) throw InvalidArgument("apt_deviation: horizon must be >= 0");
  if (t + horizon > path.end()) {
    throw RangeError("apt_deviation: t + T = " + format_double(t + horizon) + " exceeds the trajectory horizon " +
                     format_double(path.end()));
  }
  FlowIntegrator local = fi;
  if (!(local.h_step > 0.0)) local.h_step = default_h_step(path, t, horizon);
  const Manifold& m = path.trajectory().manifold;
  const double dh = horizon / grid_k;
  const std::vector<Vec> phi = flow_grid(local, path(t), dh, grid_k);
  double d = 0.0;
  for (int j = 0; j <= grid_k; ++j) {
    const double s = std::min(path.end(), t + j * dh);
    d = std::max(d, m.dist(path(s), phi[j]));
  }
  return d;
}

std::vector<AptPoint> apt_report(const InterpolatedPath& path, const FlowIntegrator& fi,
                                 const std::vector<double>& t_list, double horizon, int grid_per_unit) {
  const int grid_k = std::max(1, static_cast<int>(std::ceil(grid_per_unit * horizon)));
  std::vector<AptPoint> out;
  out.reserve(t_list.size());
  const auto& tr = path.trajectory();
  for (double t : t_list) {
    AptPoint p;
    p.t = t;
    p.horizon = horizon;
    p.grid_k = grid_k;
    p.deviation = apt_deviation(path, fi, t, horizon, grid_k);
    double sup_v = fi.field.sup_bound().value_or(0.0);
    if (!fi.field.sup_bound()) {
      const std::size_t a = path.segment(t), b = std::min(path.segment(t + horizon), tr.records.size() - 1);
      for (std::size_t i = a; i <= b && i < tr.records.size(); ++i) {
        sup_v = std::max(sup_v, tr.manifold.norm(tr.states[i], tr.records[i].field));
      }
    }
    p.refinement_bound = (sup_v + path.max_signal(t, t + horizon)) * horizon / grid_k;
    out.push_back(p);
  }
  return out;
}

void write_apt_csv(std::ostream& os, const std::vector<AptPoint>& rows) {
  os << "t,T,D,refinement_bound\n";
  for (const auto& r : rows) {
    os << format_double(r.t) << ',' << format_double(r.horizon) << ',' << format_double(r.deviation) << ','
       << format_double(r.refinement_bound) << '\n';
  }
}

// ---------------------------------------------------------------------------

PicardTrace picard_trace(const InterpolatedPath& path, const VectorField& field, double t, double h,
                         double micro_step) {
  if (!(micro_step > 0.0)) throw InvalidArgument("picard_flow: micro_step must be > 0");
  if (!(h >= 0.0)) throw InvalidArgument("picard_flow: h must be >= 0");
  if (t + h > path.end()) throw RangeError("picard_flow: t + h exceeds the trajectory horizon");
  const Manifold& m = path.trajectory().manifold;
  const long steps = h == 0.0 ? 0 : std::max(1L, static_cast<long>(std::ceil(h / micro_step - 1e-9)));
  const double d = steps == 0 ? 0.0 : h / static_cast<double>(steps);

  PicardTrace tr;
  Vec p = path(t);
  tr.s.push_back(0.0);
  tr.points.push_back(p);
  for (long k = 0; k < steps; ++k) {
    const double s = k * d;
    const Vec xs = path(t + s);
    const Vec v = field(xs);
    if (!m.within_injectivity(xs, p)) throw DomainError("picard_flow: transport beyond the injectivity radius");
    const Vec pdot = m.transport(xs, p, v);
    tr.speed.push_back(m.norm(p, pdot));
    tr.field_speed.push_back(m.norm(xs, v));
    p = m.exp(p, d * pdot);
    tr.s.push_back(k + 1 == steps ? h : (k + 1) * d);
    tr.points.push_back(p);
  }
  return tr;
}

Vec picard_flow(const InterpolatedPath& path, const VectorField& field, double t, double h, double micro_step) {
  return picard_trace(path, field, t, h, micro_step).points.back();
}

double picard_deviation(const InterpolatedPath& path, const VectorField& field, double t, double horizon, int grid_k,
                        double micro_step) {
  if (grid_k < 1) throw InvalidArgument("picard_deviation: grid_k must be >= 1");
  if (t + horizon > path.end()) throw RangeError("picard_deviation: t + T exceeds the trajectory horizon");
  const Manifold& m = path.trajectory().manifold;
  const double dh = horizon / grid_k;
  // March the curve grid interval by grid interval so every grid point is hit exactly.
  Vec p = path(t);
  double dev = 0.0;
  for (int j = 0; j < grid_k; ++j) {
    const double s0 = t + j * dh;
    const long steps = std::max(1L, static_cast<long>(std::ceil(dh / micro_step - 1e-9)));
    const double d = dh / static_cast<double>(steps);
    for (long k = 0; k < steps; ++k) {
      const Vec xs = path(std::min(path.end(), s0 + k * d));
      if (!m.within_injectivity(xs, p)) throw DomainError("picard_flow: transport beyond the injectivity radius");
      p = m.exp(p, d * m.transport(xs, p, field(xs)));
    }
    dev = std::max(dev, m.dist(path(std::min(path.end(), t + (j + 1) * dh)), p));
  }
  return dev;
}

}  // namespace rrm
