#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "genrec/generator.hpp"
#include "genrec/measurement.hpp"
#include "genrec/recovery.hpp"
#include "genrec/synth.hpp"

namespace genrec {

namespace fs = std::filesystem;

inline constexpr std::string_view kWeightsMagic = "GENREC1";
inline constexpr std::string_view kVersion = "genrec 0.1.0";

// Weights file: "GENREC1", then little-endian u32 latent_dim, base_channels, base_size,
// layer_count, one u32 per deconv channel count, u32 output_channels, then the f64 payload in
// layer order fc, deconv 1..L.
void write_weights(std::ostream &os, Weights const &weights);
Weights read_weights(std::istream &is);
void save_weights(fs::path const &path, Weights const &weights);
Weights load_weights(fs::path const &path);

/// Stored byte v maps to v / 127.5 - 1; values are clamped and rounded half up when writing.
std::uint8_t to_byte(double v);
double from_byte(std::uint8_t b);

/// Binary PGM for one channel, PPM for three.
void write_frame(fs::path const &path, Tensor const &frame);
Tensor read_frame(fs::path const &path);

/// frame_000.pgm ... plus manifest.txt listing the sequence settings.
void write_sequence(fs::path const &dir, VideoSequence const &seq);
/// All frame_*.pgm / frame_*.ppm files in name order.
std::vector<Tensor> read_frames(fs::path const &dir);

/// Flat "key = value" text; '#' starts a comment. Later keys override earlier ones.
using ConfigMap = std::map<std::string, std::string>;
ConfigMap parse_config(std::istream &is);
ConfigMap load_config(fs::path const &path);

/// "identity", "gaussian:<m>" or "mask:<keep fraction>".
struct MeasureSpec {
  MeasurementKind kind = MeasurementKind::identity;
  std::size_t rows = 0;
  double keep_fraction = 1.0;

  static MeasureSpec parse(std::string_view text);
  std::string describe() const;
};

/// One operator per frame, drawn in frame order; a shared mask reuses the first draw.
std::vector<MeasurementOperator> make_operators(MeasureSpec const &spec, std::size_t n, std::size_t frames,
                                                SeededRng &rng, bool shared_mask = false);

/// Parses "11-15,18" into the 0-based indices {10..14, 17}.
std::vector<std::size_t> parse_frame_list(std::string_view text);
std::vector<std::size_t> parse_size_list(std::string_view text);

struct ExperimentConfig {
  std::optional<fs::path> input_dir;
  SequenceSpec sequence;
  std::string preset = "grayscale";
  Architecture architecture = Architecture::grayscale();
  MeasureSpec measure;
  double noise_std = 0.0;
  bool shared_mask = false;
  /// "random", "prefit" or a weights file path.
  std::string init = "random";
  std::size_t prefit_epochs = 200;
  SolverConfig solver;
  fs::path output_dir = "genrec_out";
  std::uint64_t seed = 0;

  /// Applies recognised keys on top of the defaults; unknown keys throw RangeError.
  static ExperimentConfig from_map(ConfigMap const &map);
  /// Canonical key = value form; from_map(parse(to_text())) reproduces the config.
  std::string to_text(bool include_output = true) const;
};

/// Seed fallback: GENREC_SEED when set, otherwise 0.
std::uint64_t default_seed();

struct ExperimentOutcome {
  RecoveryResult result;
  std::vector<Tensor> truth;
  std::vector<HeldOutFrame> held_out;
  /// Mean PSNR of interpolated held-out frames and of the nearest-observed-frame copy.
  std::optional<double> holdout_psnr;
  std::optional<double> baseline_psnr;
};

/// Loads or synthesises the frames, measures them, recovers and writes every artifact:
/// frames/, metrics.csv, residuals.csv, weights.bin, latent_basis.csv, holdout.csv and manifest.txt.
ExperimentOutcome run_experiment(ExperimentConfig const &config);

void write_residuals_csv(std::ostream &os, std::vector<double> const &history);

/// Mean PSNR of copying the nearest observed frame (earlier one on ties) into each held-out slot.
double nearest_copy_psnr(std::span<Tensor const> truth, std::span<std::size_t const> holdout);

} // namespace genrec
