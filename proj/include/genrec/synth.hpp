#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "genrec/tensor.hpp"

namespace genrec {

enum class SequenceKind { rotating_sprite, color_wheel, translating_sprites };

SequenceKind parse_sequence_kind(std::string_view name);
std::string_view to_string(SequenceKind kind);

struct SequenceSpec {
  SequenceKind kind = SequenceKind::rotating_sprite;
  std::size_t frames = 32;
  std::size_t size = 64;
  /// rotating_sprite and color_wheel: rotation per frame in degrees.
  double degrees_per_frame = 2.0;
  /// color_wheel: number of equal slices.
  std::size_t slices = 12;
  /// translating_sprites: integer velocity of the first sprite; the second moves with (-vy, vx).
  std::array<int, 2> velocity{2, 1};
  /// Glyph index into the bundled sprite set; translating_sprites uses it and the next one.
  std::size_t sprite = 0;
  std::uint64_t seed = 0;

  /// Defaults for each kind: 32 frames at 2°/frame, 64 frames at 1°/frame with 12 slices, 20 frames.
  static SequenceSpec defaults(SequenceKind kind);
  void validate() const;
};

struct VideoSequence {
  std::vector<Tensor> frames; ///< each C × H × W with values in [-1, 1]
  SequenceSpec spec;

  std::size_t channels() const { return frames.front().dim(0); }
  std::size_t size() const { return frames.front().dim(1); }
};

inline constexpr double kBackground = -1.0;

std::size_t sprite_count();
/// Bundled glyph `index` rendered into a side × side single-channel image (stroke 1, background -1).
Tensor sprite_bitmap(std::size_t index, std::size_t side);

/// Rotates every channel about the image centre by theta degrees (counter-clockwise as displayed),
/// bilinear resampling, out-of-bounds samples read as the background value -1.
Tensor rotate_frame(Tensor const &image, double theta_degrees);

/// Linear map of [min, max] onto [-1, 1]; a constant image maps to -1.
Tensor normalize_frame(Tensor const &image);

/// The 12 wheel colours in [-1, 1] RGB, extended cyclically for other slice counts.
std::array<double, 3> wheel_color(std::size_t slice, std::size_t slices);

VideoSequence rotating_sprite_sequence(SequenceSpec const &spec);
VideoSequence color_wheel_sequence(SequenceSpec const &spec);
/// Top-left corner positions of both sprites over time, used by translating_sprites_sequence.
std::vector<std::array<std::array<int, 2>, 2>> sprite_trajectory(SequenceSpec const &spec, std::size_t sprite_side);
VideoSequence translating_sprites_sequence(SequenceSpec const &spec);

VideoSequence make_sequence(SequenceSpec const &spec);

} // namespace genrec
