#pragma once

// The Riemannian Robbins-Monro family:
//   X_{n+1} = exp_{X_n}(gamma_n (V(X_n) + U_n)),  U_n = noise_n + bias_n
// realized by stochastic gradient (RSGM), proximal point (RPPM),
// extragradient (RSEG) and optimistic gradient (ROG) updates, with
// retraction-based, alternating (two-player) and composed variants.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rrm/oracle.hpp"
#include "rrm/schedules.hpp"

namespace rrm {

enum class Method { kRSGM, kRPPM, kRSEG, kROG };
enum class MapMode { kExponential, kRetraction };
/// What to do when a step would leave the injectivity radius.
enum class InjectivityPolicy { kError, kClip };

std::string to_string(Method m);
std::string to_string(MapMode m);

struct PpmSolver {
  int max_iters = 100;
  double tol = 1e-10;
};

struct AlgorithmSpec {
  Method method = Method::kRSGM;
  MapMode map_mode = MapMode::kExponential;
  /// Gauss-Seidel player updates; needs a two-factor product manifold.
  bool alternating = false;
  PpmSolver ppm;
  InjectivityPolicy injectivity = InjectivityPolicy::kClip;
};

/// Steps are clipped to this fraction of the injectivity radius.
inline constexpr double kClipFraction = 0.9;

/// Throws InvalidArgument if `spec` cannot run on `m`.
void validate(const AlgorithmSpec& spec, const Manifold& m);

/// One algorithm bound to its oracle.
struct Stage {
  AlgorithmSpec algorithm;
  OracleSpec oracle;
};

/// A sequence of stages applied in turn; each stage application is one
/// sub-step X~_{k} -> X~_{k+1} with its own step size gamma_k.
struct Scheme {
  std::vector<Stage> stages;

  const Manifold& manifold() const { return stages.front().oracle.manifold(); }
};

Scheme single(AlgorithmSpec algorithm, OracleSpec oracle);
/// Concatenates the stages; throws InvalidArgument on manifold mismatch.
Scheme compose(const Scheme& first, const Scheme& second);
Scheme compose(const Stage& first, const Stage& second);

/// Everything known about one step X_n -> X_{n+1}. All vectors are tangent at X_n.
struct IterateRecord {
  std::uint64_t n = 0;
  int stage = 0;
  double gamma = 0.0;
  Vec field;   // V(X_n)
  Vec signal;  // V(X_n) + U_n, with exp_{X_n}(gamma_n signal) = X_{n+1}
  Vec noise;   // zero-mean part of U_n
  Vec bias;    // U_n - noise
  std::uint64_t seed_id = 0;
  /// Extrapolated point (RSEG/ROG) or the final inner iterate (RPPM).
  std::optional<Vec> lead;
  /// Norm of the vector that generated `lead` (RSEG/ROG).
  double generator_norm = 0.0;
  double sigma_bound = 0.0;
  double bias_bound = 0.0;  // B_n of the oracle's injected bias
  bool clipped = false;
  int inner_iterations = 0;
  double inner_residual = 0.0;
  bool contraction_violated = false;  // RPPM with gamma L >= 1
  // Alternating mode: |V_2(x1+, x2) - V_2(x1, x2)| and |block-1 signal|.
  double alternation_bias = 0.0;
  double block1_update = 0.0;

  Vec error() const { return signal - field; }
};

/// Per-stage state carried between iterations (the recycled ROG query).
struct Carry {
  struct Slot {
    bool ready = false;
    Vec base;
    Vec query;
  };
  std::vector<Slot> slots;  // one per alternating block
};

struct StepOutcome {
  Vec next;
  IterateRecord record;
};

/// Advances x by one step of size gamma. `n` is the step counter used for
/// seed derivation and the bias schedule. Throws DomainError / SolverError.
StepOutcome rrm_step(const AlgorithmSpec& algorithm, const OracleSpec& oracle, double gamma, const Vec& x,
                     std::uint64_t n, std::uint64_t master_seed, Carry& carry);
StepOutcome rrm_step(const AlgorithmSpec& algorithm, const OracleSpec& oracle, const StepSchedule& schedule,
                     const Vec& x, std::uint64_t n, std::uint64_t master_seed, Carry& carry);

struct Trajectory {
  Manifold manifold = Manifold::euclidean(1);
  std::vector<Vec> states;       // X_1 .. X_N
  std::vector<double> steps;     // gamma_1 .. gamma_{N-1}
  std::vector<double> times;     // tau_1 = 0, tau_{n+1} = tau_n + gamma_n
  std::vector<IterateRecord> records;  // N - 1 entries

  std::size_t size() const noexcept { return states.size(); }
  double horizon() const { return times.back(); }
  /// Number of iterates n with tau_n <= t (the counter m(t)).
  std::size_t count_until(double t) const;
};

/// N states (N - 1 sub-steps), bit-reproducible in (scheme, x0, N, master_seed).
/// Step errors are rethrown as IterateError carrying the iterate index.
Trajectory run(const Scheme& scheme, const StepSchedule& schedule, const Vec& x0, std::size_t n_states,
               std::uint64_t master_seed);
Trajectory run(const AlgorithmSpec& algorithm, const OracleSpec& oracle, const StepSchedule& schedule,
               const Vec& x0, std::size_t n_states, std::uint64_t master_seed);

/// Summability audit of the recorded (gamma_n, sigma_n, B_n), where B_n is the
/// larger of the injected-bias bound and the realized |b_n|.
ErrorBoundsAudit audit_error_bounds(const Trajectory& trajectory);

/// Columns: n, tau, gamma, x_0..x_{D-1}, norm_U, norm_noise, norm_bias.
/// The last row (n = N) has no step: gamma and the norms are left empty.
void write_trajectory_csv(std::ostream& os, const Trajectory& trajectory, std::size_t stride = 1,
                          std::optional<int> replication = std::nullopt);

}  // namespace rrm
