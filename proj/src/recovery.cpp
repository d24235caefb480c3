#include "genrec/recovery.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>

namespace genrec {

namespace {

void check_measurements(Weights const &weights, LatentMatrix const &z, MeasurementSet const &meas)
{
  auto const &arch = weights.architecture();
  if (z.rank() != 2 || z.rows() != arch.latent_dim) { throw ShapeError("latent matrix rows must equal latent_dim"); }
  if (meas.frames() != z.cols() || meas.measurements.size() != z.cols()) {
    throw ShapeError("measurement set has " + std::to_string(meas.frames()) + " frames, latent matrix has " +
                     std::to_string(z.cols()));
  }
  for (std::size_t t = 0; t < meas.frames(); ++t) {
    if (meas.operators[t].input_dim() != arch.output_length()) {
      throw ShapeError("measurement operator " + std::to_string(t) + " expects frames of length " +
                       std::to_string(meas.operators[t].input_dim()) + ", generator emits " +
                       std::to_string(arch.output_length()));
    }
    if (meas.measurements[t].size() != meas.operators[t].output_dim()) {
      throw ShapeError("measurement vector " + std::to_string(t) + " does not match its operator");
    }
  }
}

std::vector<std::size_t> observed_frames(std::size_t frames, std::span<std::size_t const> holdout)
{
  std::vector<std::size_t> out;
  for (std::size_t t = 0; t < frames; ++t) {
    if (std::find(holdout.begin(), holdout.end(), t) == holdout.end()) { out.push_back(t); }
  }
  return out;
}

// Runs fn(slot, frame) for every frame, `threads` frames at a time, then hands each finished
// slot to reduce(slot, frame) in ascending frame order.
template <class Slot, class Compute, class Reduce>
void for_each_frame(std::vector<std::size_t> const &frames, std::size_t threads, Compute &&compute, Reduce &&reduce)
{
  std::size_t const workers = std::max<std::size_t>(1, threads);
  for (std::size_t start = 0; start < frames.size(); start += workers) {
    std::size_t const n = std::min(workers, frames.size() - start);
    std::vector<Slot> slots(n);
    std::vector<std::exception_ptr> errors(n);
    auto task = [&](std::size_t i) {
      try {
        slots[i] = compute(frames[start + i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    };
    {
      std::vector<std::jthread> pool;
      for (std::size_t i = 1; i < n; ++i) { pool.emplace_back(task, i); }
      task(0);
    }
    for (auto const &e : errors) {
      if (e) { std::rethrow_exception(e); }
    }
    for (std::size_t i = 0; i < n; ++i) { reduce(slots[i], frames[start + i]); }
  }
}

struct FrameTerm {
  double loss = 0.0;
  Gradients grads;
};

double mean_of(std::span<double const> v)
{
  double acc = 0.0;
  for (double x : v) { acc += x; }
  return acc / double(v.size());
}

} // namespace

bool Constraint::is_line() const noexcept
{
  return (kind == Kind::affine && dim == 1) || (kind == Kind::grouped && d_per_group == 1);
}

std::string Constraint::describe() const
{
  switch (kind) {
  case Kind::none: return "none";
  case Kind::rank: return "rank(" + std::to_string(rank_r) + ")";
  case Kind::affine: return "affine(" + std::to_string(dim) + ")";
  case Kind::grouped: return "grouped(" + std::to_string(d_global) + "," + std::to_string(d_per_group) + ")";
  }
  return "unknown";
}

bool SolverConfig::holds_out(std::size_t t) const
{
  return std::find(holdout.begin(), holdout.end(), t) != holdout.end();
}

void SolverConfig::validate(std::size_t frames, std::size_t latent_dim) const
{
  if (!(similarity_lambda > 0.0 && similarity_lambda <= 1.0)) { throw RangeError("similarity lambda must be in (0, 1]"); }
  if (!similarity_beta.empty()) {
    if (similarity_beta.size() + 1 != frames) { throw RangeError("similarity beta needs one weight per adjacent pair"); }
    for (double b : similarity_beta) {
      if (!(b >= 0.0) || !std::isfinite(b)) { throw RangeError("similarity beta must be finite and non-negative"); }
    }
  }
  if (!(lr_z > 0.0) || !(lr_gamma > 0.0)) { throw RangeError("learning rates must be positive"); }
  if (epochs == 0) { throw RangeError("epochs must be positive"); }
  if (!(tol >= 0.0) || window == 0) { throw RangeError("stopping tolerance must be non-negative with a positive window"); }
  if (restarts == 0 || threads == 0) { throw RangeError("restarts and threads must be positive"); }
  for (std::size_t i = 0; i < holdout.size(); ++i) {
    if (holdout[i] >= frames) { throw RangeError("holdout frame " + std::to_string(holdout[i]) + " out of range"); }
    if (std::find(holdout.begin(), holdout.begin() + std::ptrdiff_t(i), holdout[i]) != holdout.begin() + std::ptrdiff_t(i)) {
      throw RangeError("holdout frames must be unique");
    }
  }
  if (holdout.size() >= frames) { throw RangeError("at least one frame must remain observed"); }

  std::size_t const p = std::min(latent_dim, frames);
  switch (constraint.kind) {
  case Constraint::Kind::none: break;
  case Constraint::Kind::rank:
    if (constraint.rank_r < 1 || constraint.rank_r > p) { throw RangeError("rank constraint outside [1, min(k, T)]"); }
    break;
  case Constraint::Kind::affine:
    if (constraint.dim > std::min(latent_dim, frames - 1)) { throw RangeError("affine dimension outside [0, min(k, T-1)]"); }
    break;
  case Constraint::Kind::grouped: {
    if (constraint.d_global < 1 || constraint.d_global > p) { throw RangeError("grouped global rank outside [1, min(k, T)]"); }
    if (groups.empty() || groups.front() != 0 || groups.back() >= frames) {
      throw ContractError("groups must start at 0 and lie inside the sequence");
    }
    for (std::size_t g = 0; g < groups.size(); ++g) {
      std::size_t const end = g + 1 < groups.size() ? groups[g + 1] : frames;
      if (end <= groups[g]) { throw ContractError("group starts must be strictly increasing"); }
      if (constraint.d_per_group > std::min(latent_dim, end - groups[g] - 1)) {
        throw RangeError("per-group affine dimension too large for group " + std::to_string(g));
      }
    }
    break;
  }
  }
}

double data_loss(Weights const &weights, LatentMatrix const &z, MeasurementSet const &meas,
                 std::span<std::size_t const> holdout, std::size_t threads)
{
  check_measurements(weights, z, meas);
  double loss = 0.0;
  for_each_frame<double>(
      observed_frames(z.cols(), holdout), threads,
      [&](std::size_t t) {
        auto const x = generate(weights, z.column(t));
        auto r = meas.operators[t].apply(x.values());
        axpy(-1.0, meas.measurements[t], r);
        return dot(r, r);
      },
      [&](double l, std::size_t) { loss += l; });
  return loss;
}

DataTerm data_loss_and_grads(Weights const &weights, LatentMatrix const &z, MeasurementSet const &meas,
                             std::span<std::size_t const> holdout, DataTermOptions const &opts)
{
  check_measurements(weights, z, meas);
  auto const &arch = weights.architecture();
  DataTerm out;
  out.dz = Tensor::matrix(arch.latent_dim, z.cols());
  if (opts.weight_gradients) {
    out.dweights = Gradients::zeros(arch);
    out.dweights.d_z.clear();
  }
  BackwardOptions const bopts{opts.weight_gradients};
  for_each_frame<FrameTerm>(
      observed_frames(z.cols(), holdout), opts.threads,
      [&](std::size_t t) {
        auto const fr = forward(weights, z.column(t));
        auto const &op = meas.operators[t];
        auto r = op.apply(fr.image.values());
        axpy(-1.0, meas.measurements[t], r);
        FrameTerm term;
        term.loss = dot(r, r);
        auto adj = op.adjoint(r);
        for (auto &v : adj) { v *= 2.0; }
        term.grads = backward(weights, fr.tape, Tensor(fr.image.shape(), std::move(adj)), bopts);
        return term;
      },
      [&](FrameTerm &term, std::size_t t) {
        out.loss += term.loss;
        out.dz.set_column(t, term.grads.d_z);
        if (opts.weight_gradients) {
          term.grads.d_z.clear();
          out.dweights += term.grads;
        }
      });
  return out;
}

SimilarityTerm similarity_grad(LatentMatrix const &z, double lambda, std::span<double const> beta)
{
  std::size_t const k = z.rows(), t = z.cols();
  SimilarityTerm out;
  out.dz = Tensor::matrix(k, t);
  if (t < 2) { return out; }
  if (!beta.empty() && beta.size() + 1 != t) { throw ShapeError("similarity_grad: beta needs T - 1 weights"); }
  double const w = 1.0 - lambda;
  for (std::size_t c = 0; c + 1 < t; ++c) {
    double const b = beta.empty() ? 1.0 : beta[c];
    double sq = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      double const d = z.at(i, c + 1) - z.at(i, c);
      sq += d * d;
      out.dz.at(i, c) -= 2.0 * w * b * d;
      out.dz.at(i, c + 1) += 2.0 * w * b * d;
    }
    out.penalty += w * b * sq;
  }
  return out;
}

Projection apply_constraint(LatentMatrix const &z, Constraint const &c, std::span<std::size_t const> groups)
{
  switch (c.kind) {
  case Constraint::Kind::none: return {z, project_rank(z, std::min(z.rows(), z.cols())).basis};
  case Constraint::Kind::rank: return project_rank(z, c.rank_r);
  case Constraint::Kind::affine: return project_affine(z, c.dim);
  case Constraint::Kind::grouped: {
    auto codes = project_affine_grouped(z, groups, c.d_global, c.d_per_group);
    auto basis = project_rank(codes, c.d_global).basis;
    return {std::move(codes), std::move(basis)};
  }
  }
  throw RangeError("apply_constraint: unknown constraint");
}

namespace {

LatentMatrix project_codes(LatentMatrix const &z, SolverConfig const &config)
{
  switch (config.constraint.kind) {
  case Constraint::Kind::none: return z;
  case Constraint::Kind::rank: return project_rank(z, config.constraint.rank_r).codes;
  case Constraint::Kind::affine: return project_affine(z, config.constraint.dim).codes;
  case Constraint::Kind::grouped:
    return project_affine_grouped(z, config.groups, config.constraint.d_global, config.constraint.d_per_group);
  }
  return z;
}

} // namespace

RecoveryResult run(SolverConfig const &config, MeasurementSet const &meas, Weights const &init_weights, SeededRng &rng,
                   EpochObserver const &observer)
{
  auto const &arch = init_weights.architecture();
  std::size_t const frames = meas.frames();
  if (frames == 0) { throw ShapeError("run: empty measurement set"); }
  config.validate(frames, arch.latent_dim);
  if (!init_weights.all_finite()) { throw NumericError("run: initial weights are not finite"); }

  bool const joint = config.mode == SolverMode::joint;
  bool const penalised = config.similarity_lambda < 1.0;
  double const lambda = config.similarity_lambda;

  std::optional<RecoveryResult> best;
  for (std::size_t restart = 0; restart < config.restarts; ++restart) {
    SolverState state;
    state.restart = restart;
    state.weights = init_weights;
    state.z = gaussian(rng, {arch.latent_dim, frames}, 1.0);

    std::size_t const window = config.window;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
      auto term = data_loss_and_grads(state.weights, state.z, meas, config.holdout, {false, config.threads});
      if (!std::isfinite(term.loss) || !term.dz.all_finite()) { throw DivergedError(epoch); }
      state.residual_history.push_back(term.loss);

      LatentMatrix step = std::move(term.dz);
      if (penalised) {
        step *= lambda;
        step += similarity_grad(state.z, lambda, config.similarity_beta).dz;
      }
      axpy(-config.lr_z, step.values(), state.z.values());
      state.z = project_codes(state.z, config);

      if (joint) {
        auto wterm = data_loss_and_grads(state.weights, state.z, meas, config.holdout, {true, config.threads});
        if (!std::isfinite(wterm.loss)) { throw DivergedError(epoch); }
        state.weights.add_scaled(-config.lr_gamma * lambda, wterm.dweights);
      }
      if (!state.z.all_finite() || !state.weights.all_finite()) { throw DivergedError(epoch); }
      state.epoch = epoch + 1;
      if (observer) { observer(state); }

      auto const &h = state.residual_history;
      if (h.size() >= 2 * window) {
        double const recent = mean_of(std::span(h).last(window));
        double const previous = mean_of(std::span(h).subspan(h.size() - 2 * window, window));
        if (previous == 0.0 || std::abs(previous - recent) <= config.tol * previous) { break; }
      }
    }

    double const final_loss = data_loss(state.weights, state.z, meas, config.holdout, config.threads);
    if (!std::isfinite(final_loss)) { throw DivergedError(state.epoch); }
    if (!best || final_loss < best->final_loss) {
      RecoveryResult r;
      r.z = state.z;
      r.weights = state.weights;
      r.residual_history = state.residual_history;
      r.initial_loss = state.residual_history.front();
      r.final_loss = final_loss;
      r.restart = restart;
      best = std::move(r);
    }
  }

  RecoveryResult &r = *best;
  r.config = config;
  r.basis = apply_constraint(r.z, config.constraint, config.groups).basis;
  for (std::size_t t = 0; t < frames; ++t) { r.frames.push_back(generate(r.weights, r.z.column(t))); }
  return std::move(r);
}

void attach_metrics(RecoveryResult &result, std::span<Tensor const> truth)
{
  result.metrics = evaluate(truth, result.frames);
}

std::vector<HeldOutFrame> interpolate_holdout(RecoveryResult const &result, std::span<std::size_t const> holdout)
{
  if (holdout.empty()) { return {}; }
  if (!result.config.constraint.is_line()) {
    throw ContractError("interpolate_holdout: result was not fitted with a line constraint");
  }
  std::size_t const frames = result.z.cols();
  std::vector<HeldOutFrame> out;
  for (std::size_t h : holdout) {
    if (h >= frames) { throw RangeError("interpolate_holdout: frame " + std::to_string(h) + " out of range"); }
    auto held = [&](std::size_t t) { return std::find(holdout.begin(), holdout.end(), t) != holdout.end(); };
    std::optional<std::size_t> before, after;
    for (std::size_t t = h; t-- > 0;) {
      if (!held(t)) {
        before = t;
        break;
      }
    }
    for (std::size_t t = h + 1; t < frames; ++t) {
      if (!held(t)) {
        after = t;
        break;
      }
    }
    if (!before || !after) {
      throw RangeError("interpolate_holdout: frame " + std::to_string(h) + " is not bracketed by observed frames");
    }
    HeldOutFrame f;
    f.index = h;
    f.before = *before;
    f.after = *after;
    f.position = double(h - *before) / double(*after - *before);
    f.code = interpolate(result.z.column(*before), result.z.column(*after), f.position).code;
    f.frame = generate(result.weights, f.code);
    out.push_back(std::move(f));
  }
  return out;
}

Weights prefit(Weights const &init, std::span<Tensor const> frames, SolverConfig config, SeededRng &rng)
{
  std::vector<MeasurementOperator> ops;
  for (auto const &f : frames) { ops.push_back(MeasurementOperator::identity(f.size())); }
  auto const meas = measure_sequence(frames, std::move(ops), 0.0, rng);
  config.mode = SolverMode::joint;
  config.holdout.clear();
  return run(config, meas, init, rng).weights;
}

bool GradCheckReport::passed() const
{
  return std::all_of(entries.begin(), entries.end(), [&](auto const &e) {
    return e.probes == probes_requested && e.max_rel_error < threshold;
  });
}

GradCheckReport gradient_check(Weights const &weights, LatentMatrix const &z, MeasurementSet const &meas,
                               std::size_t probes, SeededRng &rng, double step, double floor, GradientHook const &hook)
{
  auto term = data_loss_and_grads(weights, z, meas, {}, {true, 1});
  LatentMatrix dz = term.dz;
  Gradients grads = std::move(term.dweights);
  if (hook) { hook(grads, dz); }


  // Residuals at the probe point, kept so (f⁺ − f⁻) can be formed as Σ (r⁺ − r⁻)(r⁺ + r⁻)
  // without cancelling two large loss values against each other.
  struct Evaluation {
    std::vector<std::vector<double>> residuals;
    std::vector<bool> active;
  };
  auto evaluate = [&](Weights const &ww, LatentMatrix const &zz) {
    Evaluation out;
    for (std::size_t t = 0; t < zz.cols(); ++t) {
      auto const fr = forward(ww, zz.column(t));
      for (double v : fr.tape.fc_pre.values()) { out.active.push_back(v > 0.0); }
      for (std::size_t l = 0; l + 1 < fr.tape.layer_pre.size(); ++l) {
        for (double v : fr.tape.layer_pre[l].values()) { out.active.push_back(v > 0.0); }
      }
      auto r = meas.operators[t].apply(fr.image.values());
      axpy(-1.0, meas.measurements[t], r);
      out.residuals.push_back(std::move(r));
    }
    return out;
  };
  auto difference = [](Evaluation const &up, Evaluation const &down) {
    double acc = 0.0;
    for (std::size_t t = 0; t < up.residuals.size(); ++t) {
      auto const &a = up.residuals[t];
      auto const &b = down.residuals[t];
      for (std::size_t i = 0; i < a.size(); ++i) { acc += (a[i] - b[i]) * (a[i] + b[i]); }
    }
    return acc;
  };

  GradCheckReport report;
  report.probes_requested = probes;
  Weights w = weights;
  LatentMatrix zz = z;
  auto probe_tensor = [&](std::string name, Tensor const &analytic, auto &&slot) {
    GradCheckEntry e{std::move(name), 0.0, 0, 0};
    double peak = 0.0;
    for (double g : analytic.values()) { peak = std::max(peak, std::abs(g)); }
    double const denom_floor = std::max(floor * peak, 1e-300);
    auto rel = [&](double a, double f) { return std::abs(a - f) / std::max({std::abs(a), std::abs(f), denom_floor}); };
    std::size_t const attempts = 20 * probes;
    while (e.probes < probes && e.probes + e.skipped < attempts) {
      std::size_t const i = std::size_t(rng.below(analytic.size()));
      double &x = slot(i);
      double const orig = x;
      x = orig + step;
      auto const up = evaluate(w, zz);
      x = orig - step;
      auto const down = evaluate(w, zz);
      x = orig;
      if (up.active != down.active) {
        ++e.skipped;
        continue;
      }
      ++e.probes;
      e.max_rel_error = std::max(e.max_rel_error, rel(analytic[i], difference(up, down) / (2.0 * step)));
    }
    report.entries.push_back(std::move(e));
  };

  probe_tensor("fc", grads.d_fc, [&](std::size_t i) -> double & { return w.mutable_fc()[i]; });
  for (std::size_t l = 0; l < grads.d_kernels.size(); ++l) {
    probe_tensor("deconv" + std::to_string(l + 1), grads.d_kernels[l],
                 [&](std::size_t i) -> double & { return w.mutable_kernel(l)[i]; });
  }
  probe_tensor("z", dz, [&](std::size_t i) -> double & { return zz[i]; });
  return report;
}

} // namespace genrec
