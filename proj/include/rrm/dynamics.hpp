#pragma once

// Continuous-time side: the mean flow xdot = V(x), the geodesic interpolation
// of a trajectory, the Picard flow along it, and the APT deviation statistic.

#include <iosfwd>
#include <vector>

#include "rrm/algorithms.hpp"

namespace rrm {

enum class FlowScheme { kGeodesicEuler, kGeodesicRK4 };

std::string to_string(FlowScheme s);

struct FlowIntegrator {
  VectorField field;
  double h_step = 1e-3;
  FlowScheme scheme = FlowScheme::kGeodesicRK4;
};

/// Phi_h(x). Uses ceil(h / h_step) equal micro-steps; h = 0 returns x.
Vec flow(const FlowIntegrator& fi, const Vec& x, double h);
Point flow(const FlowIntegrator& fi, const Point& x, double h);

/// Phi_{j dh}(x) for j = 0..count, integrated continuously.
std::vector<Vec> flow_grid(const FlowIntegrator& fi, const Vec& x, double dh, int count);

/// x(t) = exp_{X_n}((t - tau_n) Vhat_n) on [tau_n, tau_{n+1}]. Holds a
/// reference: the trajectory must outlive the path.
class InterpolatedPath {
 public:
  explicit InterpolatedPath(const Trajectory& trajectory);

  const Trajectory& trajectory() const noexcept { return *tr_; }
  double start() const { return tr_->times.front(); }
  double end() const { return tr_->times.back(); }
  /// Index i (0-based) of the segment [tau_i, tau_{i+1}) containing t; the last state for t = tau_N.
  std::size_t segment(double t) const;
  /// Throws RangeError outside [tau_1, tau_N].
  Vec operator()(double t) const;
  /// Largest |Vhat_n| over segments meeting [t0, t1].
  double max_signal(double t0, double t1) const;
  /// Smallest gamma_n over segments meeting [t0, t1].
  double min_step(double t0, double t1) const;

 private:
  const Trajectory* tr_;
};

inline Vec interpolate(const InterpolatedPath& path, double t) { return path(t); }

/// Default integrator micro-step for probes over [t, t + T]: min(1e-3, min gamma / 10) on that window.
double default_h_step(const InterpolatedPath& path, double t, double horizon);

struct AptPoint {
  double t = 0.0;
  double horizon = 0.0;
  double deviation = 0.0;         // max over the grid
  double refinement_bound = 0.0;  // (M + max |Vhat|) T / grid_k
  int grid_k = 0;
};

/// max_{j} dist(x(t + h_j), Phi_{h_j}(x(t))) over h_j = j T / grid_k. Throws RangeError if t + T > tau_N.
double apt_deviation(const InterpolatedPath& path, const FlowIntegrator& fi, double t, double horizon, int grid_k);

/// grid_per_unit grid points per unit of horizon; uses fi.h_step unless it is <= 0, in
/// which case default_h_step applies per probe.
std::vector<AptPoint> apt_report(const InterpolatedPath& path, const FlowIntegrator& fi,
                                 const std::vector<double>& t_list, double horizon, int grid_per_unit = 200);

/// Columns: t, T, D, refinement_bound.
void write_apt_csv(std::ostream& os, const std::vector<AptPoint>& rows);

// ---------------------------------------------------------------------------
// Picard flow: P' = Gamma_{x(t+s) -> P} V(x(t+s)), P(0) = x(t), by transported Euler micro-steps.

struct PicardTrace {
  std::vector<double> s;       // 0 = s_0 < ... < s_K = h
  std::vector<Vec> points;     // P(s_k)
  std::vector<double> speed;   // |Pdot| used on [s_k, s_{k+1}]
  std::vector<double> field_speed;  // |V(x(t + s_k))|
};

PicardTrace picard_trace(const InterpolatedPath& path, const VectorField& field, double t, double h,
                         double micro_step);
Vec picard_flow(const InterpolatedPath& path, const VectorField& field, double t, double h, double micro_step);

/// max_j dist(x(t + h_j), P(h_j)) on the same grid as apt_deviation.
double picard_deviation(const InterpolatedPath& path, const VectorField& field, double t, double horizon, int grid_k,
                        double micro_step);

}  // namespace rrm
