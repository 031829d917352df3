#include "rrm/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "rrm/errors.hpp"

namespace rrm {

BiasSchedule decaying_bias(Vec direction, double scale, double power) {
  if (scale < 0.0) throw InvalidArgument("bias scale must be >= 0");
  auto bound = [scale, power](std::uint64_t n) {
    return scale / std::pow(static_cast<double>(std::max<std::uint64_t>(n, 1)), power);
  };
  auto gen = [direction = std::move(direction), bound](const Manifold& m, const Vec& x, std::uint64_t n) -> Vec {
    Vec t = m.project_tangent(x, direction);
    const double tn = m.norm(x, t);
    if (tn == 0.0) return Vec::Zero(x.size());
    return (bound(n) / tn) * t;
  };
  return {std::move(gen), std::move(bound)};
}

namespace {

Vec bounded_uniform(const Manifold& m, const Vec& x, double sigma, SplitMix64& rng) {
  if (sigma == 0.0) return Vec::Zero(m.ambient_dim());
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double r = sigma * std::pow(unif(rng), 1.0 / m.dim());
  return r * m.random_unit_tangent(x, rng);
}

}  // namespace

RawSample sample(const OracleSpec& oracle, const Vec& x, std::uint64_t seed, std::uint64_t n) {
  const Manifold& m = oracle.manifold();
  RawSample s;
  s.field = oracle.field(x);
  SplitMix64 rng(seed);
  if (oracle.noise == NoiseKind::kGaussian) {
    s.noise = m.random_tangent(x, oracle.sigma, rng);
  } else {
    s.noise = bounded_uniform(m, x, oracle.sigma, rng);
  }
  s.bias = oracle.bias ? oracle.bias->generator(m, x, n) : Vec::Zero(m.ambient_dim());
  s.value = s.field + s.noise + s.bias;
  return s;
}

OracleSample query(const OracleSpec& oracle, const Point& p, std::uint64_t seed, std::uint64_t n) {
  if (oracle.sigma < 0.0) throw InvalidArgument("oracle sigma must be >= 0");
  oracle.manifold().check_point(p.coords);
  RawSample s = sample(oracle, p.coords, seed, n);
  return {{p, std::move(s.value)}, {p, std::move(s.noise)}, {p, std::move(s.bias)}, seed};
}

// ---------------------------------------------------------------------------

SeriesAudit dyadic_series_audit(std::span<const double> terms) {
  SeriesAudit out;
  for (double t : terms) out.partial_sum += t;
  // terms[i] is a_{i+1}
  for (std::size_t lo = 1; 2 * lo - 1 <= terms.size(); lo *= 2) {
    double s = 0.0;
    for (std::size_t n = lo; n < 2 * lo; ++n) s += terms[n - 1];
    out.block_sums.push_back(s);
  }
  const std::size_t k = out.block_sums.size();
  if (k < 4) {
    out.convergent = false;
    return out;
  }
  // Fit log b_k = c - p log k over the trailing half of the blocks (k >= 1).
  const std::size_t first = std::max<std::size_t>(1, k / 2);
  bool all_zero = true;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int cnt = 0;
  for (std::size_t i = first; i < k; ++i) {
    if (out.block_sums[i] <= 0.0) continue;
    all_zero = false;
    const double lx = std::log(static_cast<double>(i));
    const double ly = std::log(out.block_sums[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++cnt;
  }
  if (all_zero) {
    out.decay_exponent = std::numeric_limits<double>::infinity();
    out.convergent = true;
    return out;
  }
  if (cnt < 2) {
    out.convergent = false;
    return out;
  }
  const double slope = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
  out.decay_exponent = -slope;
  out.convergent = out.decay_exponent > 1.0;
  return out;
}

ErrorBoundsAudit audit_error_bounds(std::span<const double> gamma, std::span<const double> sigma,
                                    std::span<const double> bias_bound) {
  if (gamma.size() != sigma.size() || gamma.size() != bias_bound.size()) {
    throw InvalidArgument("audit_error_bounds: sequences must have equal length");
  }
  std::vector<double> noise_terms(gamma.size()), bias_terms(gamma.size());
  for (std::size_t i = 0; i < gamma.size(); ++i) {
    noise_terms[i] = gamma[i] * gamma[i] * sigma[i] * sigma[i];
    bias_terms[i] = gamma[i] * bias_bound[i];
  }
  ErrorBoundsAudit out;
  out.noise = dyadic_series_audit(noise_terms);
  out.bias = dyadic_series_audit(bias_terms);

  // B_n -> 0: the last full dyadic block must sit well below the block at half its dyadic index.
  std::size_t hi = 1;
  while (2 * hi * 2 - 1 <= bias_bound.size()) hi *= 2;
  auto block_max = [&](std::size_t lo) {
    double mx = 0.0;
    for (std::size_t n = lo; n < 2 * lo && n <= bias_bound.size(); ++n) mx = std::max(mx, bias_bound[n - 1]);
    return mx;
  };
  out.bias_tail = bias_bound.empty() ? 0.0 : block_max(hi);
  const std::size_t mid = std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(hi))));
  std::size_t mid_pow = 1;
  while (mid_pow * 2 <= mid) mid_pow *= 2;
  const double earlier = bias_bound.empty() ? 0.0 : block_max(mid_pow);
  out.bias_vanishing = out.bias_tail == 0.0 || (hi >= 8 && out.bias_tail <= 0.5 * earlier);
  return out;
}

}  // namespace rrm
