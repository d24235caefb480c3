#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "genrec/runner.hpp"

namespace {

using namespace genrec;

constexpr int kExitFailure = 1;
constexpr int kExitDiverged = 3;

struct SynthArgs {
  std::string kind = "rotating_sprite";
  std::optional<std::size_t> frames;
  std::size_t size = 64;
  std::optional<double> deg_per_frame;
  std::size_t slices = 12;
  std::vector<int> velocity{2, 1};
  std::size_t sprite = 0;
  std::optional<std::uint64_t> seed;
  std::string out = "frames";
};

int run_synth(SynthArgs const &a)
{
  auto spec = SequenceSpec::defaults(parse_sequence_kind(a.kind));
  if (a.frames) { spec.frames = *a.frames; }
  spec.size = a.size;
  if (a.deg_per_frame) { spec.degrees_per_frame = *a.deg_per_frame; }
  spec.slices = a.slices;
  spec.velocity = {a.velocity.at(0), a.velocity.at(1)};
  spec.sprite = a.sprite;
  spec.seed = a.seed.value_or(default_seed());
  auto const seq = make_sequence(spec);
  write_sequence(a.out, seq);
  std::cout << "wrote " << seq.frames.size() << " frames to " << a.out << '\n';
  return 0;
}

struct RecoverArgs {
  std::string config_file;
  ConfigMap overrides;
};

int run_recover(RecoverArgs const &a)
{
  ConfigMap map = a.config_file.empty() ? ConfigMap{} : load_config(a.config_file);
  for (auto const &[k, v] : a.overrides) { map[k] = v; }
  auto const config = ExperimentConfig::from_map(map);
  auto const outcome = run_experiment(config);
  auto const &r = outcome.result;
  std::cout << std::setprecision(6) << "epochs " << r.residual_history.size() << "  initial loss " << r.initial_loss
            << "  final loss " << r.final_loss << "  mean PSNR " << r.metrics->mean_psnr << " dB\n";
  if (outcome.holdout_psnr) {
    std::cout << "held-out PSNR " << *outcome.holdout_psnr << " dB (nearest-frame copy " << *outcome.baseline_psnr
              << " dB)\n";
  }
  std::cout << "outputs in " << config.output_dir.string() << '\n';
  return 0;
}

struct InterpolateArgs {
  std::string weights;
  std::string basis;
  std::size_t from = 1;
  std::size_t to = 2;
  std::size_t steps = 10;
  std::string out = "interpolated";
};

int run_interpolate(InterpolateArgs const &a)
{
  auto const weights = load_weights(a.weights);
  std::ifstream is(a.basis);
  if (!is) { throw IoError("cannot open basis '" + a.basis + "'"); }
  auto const basis = read_basis_csv(is);
  if (a.from == 0 || a.to == 0 || a.from > basis.frames || a.to > basis.frames) {
    throw RangeError("interpolate: --from/--to are 1-based frame numbers within the fitted sequence");
  }
  if (a.steps < 2) { throw RangeError("interpolate: need at least 2 steps"); }
  auto const za = basis.code(a.from - 1), zb = basis.code(a.to - 1);
  fs::create_directories(a.out);
  std::ofstream codes(fs::path(a.out) / "codes.csv", std::ios::binary);
  codes << "step,position";
  for (std::size_t i = 0; i < za.size(); ++i) { codes << ",z" << i; }
  codes << '\n';
  for (std::size_t s = 0; s < a.steps; ++s) {
    double const pos = double(s) / double(a.steps - 1);
    auto const code = interpolate(za, zb, pos).code;
    auto const frame = generate(weights, code);
    std::ostringstream name;
    name << "frame_" << std::setw(3) << std::setfill('0') << s << (frame.dim(0) == 1 ? ".pgm" : ".ppm");
    write_frame(fs::path(a.out) / name.str(), frame);
    codes << s << ',' << std::setprecision(17) << pos;
    for (double v : code) { codes << ',' << v; }
    codes << '\n';
  }
  std::cout << "wrote " << a.steps << " frames to " << a.out << '\n';
  return 0;
}

struct GradcheckArgs {
  std::optional<std::uint64_t> seed;
  std::size_t probes = 50;
  std::size_t frames = 4;
  std::string measure = "gaussian:16";
  bool corrupt = false;
};

int run_gradcheck(GradcheckArgs const &a)
{
  SeededRng rng(a.seed.value_or(default_seed()));
  auto const arch = Architecture::tiny();
  auto const weights = Weights::random(arch, rng);
  auto const truth = Weights::random(arch, rng);
  std::vector<Tensor> frames;
  for (std::size_t t = 0; t < a.frames; ++t) {
    frames.push_back(generate(truth, gaussian(rng, {arch.latent_dim}, 1.0).values()));
  }
  auto ops = make_operators(MeasureSpec::parse(a.measure), arch.output_length(), a.frames, rng);
  auto const meas = measure_sequence(frames, std::move(ops), 0.0, rng);
  auto const z = gaussian(rng, {arch.latent_dim, a.frames}, 1.0);

  GradientHook hook;
  if (a.corrupt) {
    hook = [](Gradients &g, LatentMatrix &) { g.d_kernels.at(1) *= 1.001; };
  }
  auto const report = gradient_check(weights, z, meas, a.probes, rng, 1e-5, 1e-4, hook);
  for (auto const &e : report.entries) {
    std::cout << std::left << std::setw(8) << e.name << " max rel error " << std::scientific << std::setprecision(3)
              << e.max_rel_error << "  (" << e.probes << " probes, " << e.skipped << " at kinks)  " << (e.max_rel_error < report.threshold ? "ok" : "FAIL")
              << '\n';
  }
  bool const ok = report.passed();
  std::cout << (ok ? "PASS" : "FAIL") << '\n';
  return ok ? 0 : kExitFailure;
}

struct MetricsArgs {
  std::string reference;
  std::string estimate;
  std::string out;
};

int run_metrics(MetricsArgs const &a)
{
  auto const ref = read_frames(a.reference);
  auto const est = read_frames(a.estimate);
  auto const report = evaluate(ref, est);
  if (a.out.empty()) {
    write_metrics_csv(std::cout, report);
  } else {
    std::ofstream os(a.out, std::ios::binary);
    if (!os) { throw IoError("cannot open '" + a.out + "' for writing"); }
    write_metrics_csv(os, report);
  }
  std::cerr << "mean PSNR " << report.mean_psnr << " dB over " << report.psnr.size() << " frames\n";
  return 0;
}

} // namespace

int main(int argc, char **argv)
{
  CLI::App app{"Video recovery from under-sampled measurements with a deconvolutional generator prior"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto *cmd_synth = app.add_subcommand("synth", "Generate a synthetic video sequence as PGM/PPM frames");
  cmd_synth->add_option("--kind", synth.kind, "rotating_sprite | color_wheel | translating_sprites")
      ->check(CLI::IsMember({"rotating_sprite", "color_wheel", "translating_sprites"}));
  cmd_synth->add_option("--frames", synth.frames, "Number of frames");
  cmd_synth->add_option("--size", synth.size, "Frame side (16, 32 or 64)");
  cmd_synth->add_option("--deg-per-frame", synth.deg_per_frame, "Rotation per frame in degrees");
  cmd_synth->add_option("--slices", synth.slices, "Color-wheel slices");
  cmd_synth->add_option("--velocity", synth.velocity, "Sprite velocity vx vy")->expected(2);
  cmd_synth->add_option("--sprite", synth.sprite, "Glyph index");
  cmd_synth->add_option("--seed", synth.seed, "Seed (falls back to GENREC_SEED)");
  cmd_synth->add_option("--out", synth.out, "Output directory");

  RecoverArgs recover;
  auto *cmd_recover = app.add_subcommand("recover", "Recover a sequence from simulated measurements");
  cmd_recover->add_option("--config", recover.config_file, "key = value config file; flags override it");
  auto add_key = [&](std::string const &flag, std::string const &key, std::string const &help) {
    cmd_recover->add_option_function<std::string>(
        flag, [&recover, key](std::string const &v) { recover.overrides[key] = v; }, help);
  };
  add_key("--input", "input", "Directory of frame_*.pgm/ppm files (otherwise synthesised)");
  add_key("--kind", "kind", "Synthetic sequence kind");
  add_key("--frames", "frames", "Synthetic frame count");
  add_key("--size", "size", "Synthetic frame side");
  add_key("--deg-per-frame", "deg_per_frame", "Synthetic rotation per frame");
  add_key("--sprite", "sprite", "Synthetic glyph index");
  add_key("--arch", "arch", "Generator preset: grayscale | rgb | tiny");
  add_key("--output-channels", "output_channels", "Override the generator's output channels");
  add_key("--measure", "measure", "identity | gaussian:<m> | mask:<keep fraction>");
  add_key("--noise", "noise_std", "Measurement noise standard deviation");
  add_key("--mode", "mode", "latent | joint");
  add_key("--lambda", "lambda", "Data-term weight of the similarity objective (1 disables it)");
  add_key("--lr-z", "lr_z", "Latent step size");
  add_key("--lr-gamma", "lr_gamma", "Weight step size");
  add_key("--epochs", "epochs", "Maximum epochs");
  add_key("--tol", "tol", "Windowed relative loss change for stopping");
  add_key("--holdout", "holdout", "1-based frames excluded from the data term, e.g. 11-15");
  add_key("--groups", "groups", "1-based first frame of each sequence, e.g. 1,21,41");
  add_key("--restarts", "restarts", "Random latent initialisations");
  add_key("--threads", "threads", "Per-frame worker threads");
  add_key("--init", "init", "random | prefit | <weights file>");
  add_key("--prefit-epochs", "prefit_epochs", "Epochs of generator pre-fitting");
  add_key("--seed", "seed", "Seed (falls back to GENREC_SEED)");
  add_key("--out", "output", "Output directory");
  cmd_recover->add_option_function<std::size_t>(
      "--rank", [&](std::size_t r) { recover.overrides["constraint"] = "rank(" + std::to_string(r) + ")"; },
      "Rank constraint on the latent matrix");
  cmd_recover->add_option_function<std::size_t>(
      "--affine", [&](std::size_t d) { recover.overrides["constraint"] = "affine(" + std::to_string(d) + ")"; },
      "Mean plus d principal directions (1 = line)");
  cmd_recover->add_option_function<std::vector<std::size_t>>(
      "--grouped",
      [&](std::vector<std::size_t> const &v) {
        recover.overrides["constraint"] = "grouped(" + std::to_string(v.at(0)) + "," + std::to_string(v.at(1)) + ")";
      },
      "Global rank and per-group affine dimension")
      ->expected(2);
  cmd_recover->add_flag_function(
      "--shared-mask", [&](std::int64_t) { recover.overrides["shared_mask"] = "true"; }, "Reuse one mask for all frames");

  InterpolateArgs interp;
  auto *cmd_interp = app.add_subcommand("interpolate", "Render frames along the line between two fitted codes");
  cmd_interp->add_option("--weights", interp.weights, "weights.bin from recover")->required();
  cmd_interp->add_option("--basis", interp.basis, "latent_basis.csv from recover")->required();
  cmd_interp->add_option("--from", interp.from, "1-based start frame");
  cmd_interp->add_option("--to", interp.to, "1-based end frame");
  cmd_interp->add_option("--steps", interp.steps, "Number of frames including endpoints");
  cmd_interp->add_option("--out", interp.out, "Output directory");

  GradcheckArgs grad;
  auto *cmd_grad = app.add_subcommand("gradcheck", "Finite-difference check of the tiny generator's gradients");
  cmd_grad->add_option("--seed", grad.seed, "Seed (falls back to GENREC_SEED)");
  cmd_grad->add_option("--probes", grad.probes, "Probes per tensor");
  cmd_grad->add_option("--frames", grad.frames, "Frames in the objective");
  cmd_grad->add_option("--measure", grad.measure, "Measurement operator");
  cmd_grad->add_flag("--corrupt", grad.corrupt, "Perturb the analytic deconv2 gradient (negative control)");

  MetricsArgs met;
  auto *cmd_metrics = app.add_subcommand("metrics", "Per-frame MSE and PSNR between two frame directories");
  cmd_metrics->add_option("--reference", met.reference, "Ground-truth frames")->required();
  cmd_metrics->add_option("--estimate", met.estimate, "Reconstructed frames")->required();
  cmd_metrics->add_option("--out", met.out, "CSV path (stdout when omitted)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*cmd_synth) { return run_synth(synth); }
    if (*cmd_recover) { return run_recover(recover); }
    if (*cmd_interp) { return run_interpolate(interp); }
    if (*cmd_grad) { return run_gradcheck(grad); }
    if (*cmd_metrics) { return run_metrics(met); }
  } catch (DivergedError const &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitDiverged;
  } catch (std::exception const &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}
