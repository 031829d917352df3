#include "rrm/schedules.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rrm/errors.hpp"

namespace rrm {

namespace {

double window_upper(double b, double eps, double n) { return b / (std::sqrt(n) * std::pow(std::log(n), 0.5 + eps)); }

// log of (upper bound / lower bound) as a function of s = log n.
double window_gap(double a, double b, double eps, double s) {
  return std::log(b / a) + 0.5 * s - (0.5 + eps) * std::log(s);
}

}  // namespace

StepSchedule StepSchedule::power_law(double c, double rho, std::uint64_t n0) {
  if (!(c > 0.0)) throw InvalidArgument("power-law schedule: c must be > 0");
  if (!(rho > 0.0)) throw InvalidArgument("power-law schedule: rho must be > 0");
  if (n0 < 1) throw InvalidArgument("power-law schedule: n0 must be >= 1");
  return StepSchedule(PowerLaw{c, rho}, n0);
}

StepSchedule StepSchedule::window(double a, double b, double eps, std::uint64_t n0) {
  if (!(a > 0.0) || !(b > 0.0)) throw InvalidArgument("window schedule: A and B must be > 0");
  if (!(eps > 0.0)) throw InvalidArgument("window schedule: eps must be > 0");
  if (n0 < 2) throw InvalidArgument("window schedule: n0 must be >= 2 (log 1 = 0)");
  return StepSchedule(PaperWindow{a, b, eps}, n0);
}

double StepSchedule::gamma(std::uint64_t n) const {
  if (n < n0_) throw InvalidArgument("step index " + std::to_string(n) + " below n0 = " + std::to_string(n0_));
  const double x = static_cast<double>(n);
  if (const auto* p = std::get_if<PowerLaw>(&kind_)) return p->c / std::pow(x, p->rho);
  const auto& w = std::get<PaperWindow>(kind_);
  return std::max(w.a / x, window_upper(w.b, w.eps, x));
}

std::string StepSchedule::describe() const {
  std::ostringstream os;
  if (const auto* p = std::get_if<PowerLaw>(&kind_)) {
    os << "power-law(c=" << p->c << ", rho=" << p->rho << ")";
  } else {
    const auto& w = std::get<PaperWindow>(kind_);
    os << "window(A=" << w.a << ", B=" << w.b << ", eps=" << w.eps << ")";
  }
  return os.str();
}

ScheduleClass classify(const StepSchedule& s) {
  ScheduleClass out;
  if (const auto* p = std::get_if<PowerLaw>(&s.kind())) {
    out.sum_diverges = p->rho <= 1.0;
    out.square_summable = p->rho > 0.5;
    if (!out.sum_diverges) {
      out.reason = "sum of steps is finite (rho > 1)";
    } else if (!out.square_summable) {
      out.reason = "sum of squared steps diverges (rho <= 1/2)";
    } else {
      out.reason = "rho in (1/2, 1]";
    }
    return out;
  }
  const auto& w = std::get<PaperWindow>(s.kind());
  out.sum_diverges = true;
  out.square_summable = true;
  out.reason = "window schedules satisfy the summability conditions";

  // The gap is decreasing in s = log n up to s* = 1 + 2 eps and increasing after.
  const double s0 = std::log(static_cast<double>(s.n0()));
  const double s_star = 1.0 + 2.0 * w.eps;
  const double s_min = std::max(s0, s_star);
  if (window_gap(w.a, w.b, w.eps, s_min) >= 0.0) {
    out.window_start = s.n0();
    return out;
  }
  double lo = s_min, hi = s_min + 1.0;
  while (window_gap(w.a, w.b, w.eps, hi) < 0.0) hi = lo + 2.0 * (hi - lo);
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (window_gap(w.a, w.b, w.eps, mid) < 0.0 ? lo : hi) = mid;
  }
  auto n = static_cast<std::uint64_t>(std::ceil(std::exp(hi)));
  auto holds = [&](std::uint64_t m) { return window_gap(w.a, w.b, w.eps, std::log(static_cast<double>(m))) >= 0.0; };
  while (!holds(n)) ++n;
  while (n > s.n0() && holds(n - 1) && std::log(static_cast<double>(n - 1)) >= s_star) --n;
  out.window_start = n;
  return out;
}

std::optional<std::uint64_t> window_entry(const StepSchedule& s, double a, double b, double eps,
                                          std::uint64_t n_max) {
  std::optional<std::uint64_t> entry;
  for (std::uint64_t n = std::max<std::uint64_t>(s.n0(), 2); n <= n_max; ++n) {
    const double x = static_cast<double>(n);
    const double g = s.gamma(n);
    // relative slack: the canonical window policy sits exactly on one bound
    const bool inside = g >= (a / x) * (1.0 - 1e-12) && g <= window_upper(b, eps, x) * (1.0 + 1e-12);
    if (inside) {
      if (!entry) entry = n;
    } else {
      entry.reset();
    }
  }
  return entry;
}

}  // namespace rrm
