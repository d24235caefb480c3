#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "genrec/generator.hpp"
#include "genrec/latent.hpp"
#include "genrec/measurement.hpp"
#include "genrec/metrics.hpp"

namespace genrec {

enum class SolverMode { latent_only, joint };

/// Projection applied to the latent matrix after every z-step.
struct Constraint {
  enum class Kind { none, rank, affine, grouped };

  Kind kind = Kind::none;
  std::size_t rank_r = 0;      ///< rank: target rank
  std::size_t dim = 0;         ///< affine: principal directions kept about the mean
  std::size_t d_global = 0;    ///< grouped: rank of the whole matrix
  std::size_t d_per_group = 0; ///< grouped: affine dimension inside each group

  static Constraint none() { return {}; }
  static Constraint rank(std::size_t r) { return {Kind::rank, r, 0, 0, 0}; }
  static Constraint affine(std::size_t d) { return {Kind::affine, 0, d, 0, 0}; }
  static Constraint grouped(std::size_t d_global, std::size_t d_per_group)
  {
    return {Kind::grouped, 0, 0, d_global, d_per_group};
  }

  /// True for affine(1) and grouped(·, 1): every (group of) code(s) lies on a line.
  bool is_line() const noexcept;
  std::string describe() const;

  friend bool operator==(Constraint const &, Constraint const &) = default;
};

struct SolverConfig {
  SolverMode mode = SolverMode::joint;
  Constraint constraint;
  /// Weight of the data term; the adjacent-code penalty gets 1 - λ. λ = 1 disables the penalty.
  double similarity_lambda = 1.0;
  /// β_t for the T - 1 adjacent pairs; empty means all ones.
  std::vector<double> similarity_beta;
  double lr_z = 1.0;
  double lr_gamma = 0.01;
  std::size_t epochs = 2000;
  /// Stop when the mean loss of the last `window` epochs changes by less than tol relative to
  /// the window before it.
  double tol = 1e-6;
  std::size_t window = 50;
  std::uint64_t seed = 0;
  /// 0-based frame indices excluded from the data term.
  std::vector<std::size_t> holdout;
  /// First column of each sequence for grouped constraints; {0} is a single sequence.
  std::vector<std::size_t> groups{0};
  std::size_t restarts = 1;
  /// Worker threads for per-frame passes; results are reduced in ascending frame order.
  std::size_t threads = 1;

  void validate(std::size_t frames, std::size_t latent_dim) const;
  bool holds_out(std::size_t t) const;
};

struct SolverState {
  LatentMatrix z;
  Weights weights;
  std::size_t epoch = 0;   ///< epochs completed
  std::size_t restart = 0;
  std::vector<double> residual_history; ///< data loss at the start of each epoch
};

struct RecoveryResult {
  std::vector<Tensor> frames; ///< G(ẑ_t) for every frame, held-out ones included
  LatentMatrix z;
  LatentBasis basis;
  Weights weights;
  std::vector<double> residual_history;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::size_t restart = 0;
  SolverConfig config;
  std::optional<MetricsReport> metrics;
};

struct DataTerm {
  double loss = 0.0;
  LatentMatrix dz;     ///< k × T, zero columns for held-out frames
  Gradients dweights;  ///< empty unless weight gradients were requested
};

struct DataTermOptions {
  bool weight_gradients = true;
  std::size_t threads = 1;
};

/// Σ_{t ∉ holdout} ‖y_t − A_t G(z_t)‖² and its gradients. Per-frame weight gradients are summed
/// in ascending frame order regardless of the thread count.
DataTerm data_loss_and_grads(Weights const &weights, LatentMatrix const &z, MeasurementSet const &meas,
                             std::span<std::size_t const> holdout, DataTermOptions const &opts = {});

/// Forward-only Σ_{t ∉ holdout} ‖y_t − A_t G(z_t)‖².
double data_loss(Weights const &weights, LatentMatrix const &z, MeasurementSet const &meas,
                 std::span<std::size_t const> holdout = {}, std::size_t threads = 1);

struct SimilarityTerm {
  double penalty = 0.0;
  LatentMatrix dz;
};

/// (1 − λ) Σ_t β_t ‖z_{t+1} − z_t‖² and its gradient in Z. Empty β means all ones.
SimilarityTerm similarity_grad(LatentMatrix const &z, double lambda, std::span<double const> beta = {});

/// Applies the configured projection; `groups` is only used by grouped constraints.
Projection apply_constraint(LatentMatrix const &z, Constraint const &c, std::span<std::size_t const> groups);

using EpochObserver = std::function<void(SolverState const &)>;

/// Gradient descent over the latent codes (and the generator weights in joint mode).
///
/// Each epoch takes a z-step on λ·data + similarity, projects Z onto the constraint set and,
/// in joint mode, takes a weight step on λ·data evaluated at the projected codes. Latent codes
/// start i.i.d. standard normal; among `restarts` initialisations the lowest final data loss wins.
/// Throws DivergedError when a loss becomes non-finite.
RecoveryResult run(SolverConfig const &config, MeasurementSet const &meas, Weights const &init_weights, SeededRng &rng,
                   EpochObserver const &observer = {});

/// Fills result.metrics against the ground-truth frames.
void attach_metrics(RecoveryResult &result, std::span<Tensor const> truth);

struct HeldOutFrame {
  std::size_t index = 0; ///< 0-based frame index
  std::size_t before = 0;
  std::size_t after = 0;
  double position = 0.0; ///< (index − before) / (after − before)
  std::vector<double> code;
  Tensor frame;
};

/// Synthesises held-out frames from codes interpolated between the nearest observed neighbours.
/// Requires a line-constrained result; throws RangeError for a frame not bracketed by observations.
std::vector<HeldOutFrame> interpolate_holdout(RecoveryResult const &result, std::span<std::size_t const> holdout);

/// Joint fit of the generator to clean frames (identity measurements); returns the fitted weights.
Weights prefit(Weights const &init, std::span<Tensor const> frames, SolverConfig config, SeededRng &rng);

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t probes = 0;
  /// Probes dropped because the ±step interval crossed a relu kink.
  std::size_t skipped = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries; ///< fc, deconv1..L, z
  double threshold = 1e-6;
  std::size_t probes_requested = 0;

  bool passed() const;
};

/// Hook applied to the analytic gradients before comparison; used to plant faults in tests.
using GradientHook = std::function<void(Gradients &, LatentMatrix &)>;

/// Compares analytic gradients of the data loss against central differences at `probes`
/// random entries of every weight tensor and of Z. The relative error of a probe is
/// |a − f| / max(|a|, |f|, floor · max|a| over the tensor), so entries far below the
/// tensor's gradient scale are judged against that scale rather than their own size. A probe
/// whose ±step evaluations disagree on any relu activation is redrawn, up to 20·probes draws
/// per tensor.
GradCheckReport gradient_check(Weights const &weights, LatentMatrix const &z, MeasurementSet const &meas,
                               std::size_t probes, SeededRng &rng, double step = 1e-5, double floor = 1e-4,
                               GradientHook const &hook = {});

} // namespace genrec
