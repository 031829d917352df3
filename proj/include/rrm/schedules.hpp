#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>

namespace rrm {

/// gamma_n = c / n^rho
struct PowerLaw {
  double c = 1.0;
  double rho = 1.0;
};

/// gamma_n = max(A/n, B / (sqrt(n) (log n)^{1/2 + eps})), the upper envelope
/// of the two-sided step window. Natural log.
struct PaperWindow {
  double a = 1.0;
  double b = 1.0;
  double eps = 0.5;
};

class StepSchedule {
 public:
  static StepSchedule power_law(double c, double rho, std::uint64_t n0 = 1);
  static StepSchedule window(double a, double b, double eps, std::uint64_t n0 = 2);

  const std::variant<PowerLaw, PaperWindow>& kind() const noexcept { return kind_; }
  /// First admissible index.
  std::uint64_t n0() const noexcept { return n0_; }
  /// Throws InvalidArgument for n < n0.
  double gamma(std::uint64_t n) const;
  /// gamma of the k-th step of a run (k = 1, 2, ...), i.e. gamma(n0 + k - 1).
  double step(std::uint64_t k) const { return gamma(n0_ + k - 1); }
  std::string describe() const;

 private:
  StepSchedule(std::variant<PowerLaw, PaperWindow> kind, std::uint64_t n0) : kind_(kind), n0_(n0) {}

  std::variant<PowerLaw, PaperWindow> kind_;
  std::uint64_t n0_;
};

struct ScheduleClass {
  bool sum_diverges = false;     // sum gamma = inf
  bool square_summable = false;  // sum gamma^2 < inf
  bool rm_valid() const noexcept { return sum_diverges && square_summable; }
  /// For window schedules: first n from which gamma_n <= B/(sqrt(n)(log n)^{1/2+eps}) for all later n.
  std::optional<std::uint64_t> window_start;
  std::string reason;
};

ScheduleClass classify(const StepSchedule& s);

/// First index n >= n0 such that A/m <= gamma_m <= B/(sqrt(m)(log m)^{1/2+eps})
/// for every m in [n, n_max]; nullopt if the schedule leaves the window at n_max.
std::optional<std::uint64_t> window_entry(const StepSchedule& s, double a, double b, double eps,
                                          std::uint64_t n_max);

}  // namespace rrm
