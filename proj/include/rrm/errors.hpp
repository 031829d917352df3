#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace rrm {

/// Malformed inputs: off-manifold points, tangent vectors at the wrong base,
/// dimension mismatches.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A geometric operation was asked for outside its domain, e.g. a logarithm
/// between antipodal points of a sphere.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Requested a diagnostic that does not apply to the given manifold/field.
class Unsupported : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A query outside the recorded range of a trajectory.
class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// An inner solver (RPPM fixed-point loop) failed to converge.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double residual, bool contraction_violated)
      : std::runtime_error(what), residual_(residual), contraction_violated_(contraction_violated) {}

  double residual() const noexcept { return residual_; }
  bool contraction_violated() const noexcept { return contraction_violated_; }

 private:
  double residual_;
  bool contraction_violated_;
};

/// Wraps an error raised while advancing iterate `iterate` of a run.
class IterateError : public std::runtime_error {
 public:
  IterateError(std::uint64_t iterate, const std::string& what)
      : std::runtime_error("iterate " + std::to_string(iterate) + ": " + what), iterate_(iterate) {}

  std::uint64_t iterate() const noexcept { return iterate_; }

 private:
  std::uint64_t iterate_;
};

}  // namespace rrm
