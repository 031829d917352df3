#pragma once

// Stochastic first-order oracle: V(x) + zero-mean tangent noise + optional
// injected bias. Because every field in this library is known in closed
// form, samples also expose their noise/bias split; a black-box oracle would
// not, so treat those parts as a testing aid.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "rrm/fields.hpp"

namespace rrm {

enum class NoiseKind {
  kGaussian,        // isotropic Gaussian with E|Z|^2 = sigma^2
  kBoundedUniform,  // uniform on the tangent ball of radius sigma (|Z| <= sigma)
};

struct BiasSchedule {
  /// Bias vector in T_x at iteration n. Must satisfy |b| <= bound(n).
  std::function<Vec(const Manifold&, const Vec& x, std::uint64_t n)> generator;
  std::function<double(std::uint64_t n)> bound;
};

/// Bias of magnitude scale / n^power along the tangent projection of `direction`.
BiasSchedule decaying_bias(Vec direction, double scale, double power);

struct OracleSpec {
  VectorField field;
  double sigma = 0.0;
  NoiseKind noise = NoiseKind::kGaussian;
  std::optional<BiasSchedule> bias;

  const Manifold& manifold() const noexcept { return field.manifold(); }
  /// B_n, zero without a bias schedule.
  double bias_bound(std::uint64_t n) const { return bias ? bias->bound(n) : 0.0; }
};

/// value = field + noise + bias, all tangent at the query point.
struct RawSample {
  Vec value;
  Vec field;
  Vec noise;
  Vec bias;
};

/// Unchecked query on ambient coordinates; deterministic in (x, seed, n).
RawSample sample(const OracleSpec& oracle, const Vec& x, std::uint64_t seed, std::uint64_t n = 1);

struct OracleSample {
  TangentVec value;
  TangentVec noise_part;
  TangentVec bias_part;
  std::uint64_t seed_id = 0;
};

/// Checked query: throws InvalidArgument for off-manifold points or sigma < 0.
OracleSample query(const OracleSpec& oracle, const Point& p, std::uint64_t seed, std::uint64_t n = 1);

// ---------------------------------------------------------------------------
// Summability audits for the noise and bias budget along a run.

/// Dyadic-block view of a nonnegative series sum_{n>=1} a_n: block k holds
/// sum_{2^k <= n < 2^{k+1}} a_n. Block sums decaying like k^{-p} with p > 1
/// (or faster) are read as convergent.
struct SeriesAudit {
  double partial_sum = 0.0;
  std::vector<double> block_sums;
  double decay_exponent = 0.0;  // fitted p in block_k ~ k^{-p}
  bool convergent = false;
};

SeriesAudit dyadic_series_audit(std::span<const double> terms);

struct ErrorBoundsAudit {
  SeriesAudit noise;  // sum gamma_n^2 sigma_n^2
  SeriesAudit bias;   // sum gamma_n B_n
  double bias_tail = 0.0;  // max B_n over the last full dyadic block
  bool bias_vanishing = false;
  bool ok() const noexcept { return noise.convergent && bias.convergent && bias_vanishing; }
};

/// Sequences are indexed from n = 1 and must share a length.
ErrorBoundsAudit audit_error_bounds(std::span<const double> gamma, std::span<const double> sigma,
                                    std::span<const double> bias_bound);

}  // namespace rrm
