#include "genrec/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace genrec {

namespace {

// 8×8 thick-stroke glyphs, '#' is ink.
constexpr std::array<std::array<char const *, 8>, 5> kGlyphs{{
    {"..####..", ".##..##.", "......##", ".....##.", "...###..", "..##....", ".##.....", ".#######"}, // 2
    {".######.", "......##", ".....##.", "....##..", "...##...", "...##...", "..##....", "..##...."}, // 7
    {"..####..", ".##..##.", "......##", "...####.", "......##", "......##", ".##..##.", "..####.."}, // 3
    {"....##..", "...###..", "..####..", ".##.##..", "########", "....##..", "....##..", "....##.."}, // 4
    {"..####..", ".##..##.", ".##..##.", "..####..", ".##..##.", ".##..##.", ".##..##.", "..####.."}, // 8
}};

struct Trig {
  double c, s;
};

// Exact values at multiples of 90° so quarter turns are pure permutations.
Trig trig_degrees(double theta)
{
  double const r = std::fmod(theta, 360.0);
  double const t = r < 0.0 ? r + 360.0 : r;
  if (t == 0.0) { return {1.0, 0.0}; }
  if (t == 90.0) { return {0.0, 1.0}; }
  if (t == 180.0) { return {-1.0, 0.0}; }
  if (t == 270.0) { return {0.0, -1.0}; }
  double const rad = t * std::numbers::pi / 180.0;
  return {std::cos(rad), std::sin(rad)};
}

int bounce(int pos, int &vel, int max_pos)
{
  pos += vel;
  // Reflect until inside; large velocities can cross the box more than once.
  while (pos < 0 || pos > max_pos) {
    if (pos < 0) {
      pos = -pos;
    } else {
      pos = 2 * max_pos - pos;
    }
    vel = -vel;
  }
  return pos;
}

} // namespace

SequenceKind parse_sequence_kind(std::string_view name)
{
  if (name == "rotating_sprite") { return SequenceKind::rotating_sprite; }
  if (name == "color_wheel") { return SequenceKind::color_wheel; }
  if (name == "translating_sprites") { return SequenceKind::translating_sprites; }
  throw RangeError("unknown sequence kind '" + std::string(name) + "'");
}

std::string_view to_string(SequenceKind kind)
{
  switch (kind) {
  case SequenceKind::rotating_sprite: return "rotating_sprite";
  case SequenceKind::color_wheel: return "color_wheel";
  case SequenceKind::translating_sprites: return "translating_sprites";
  }
  return "unknown";
}

SequenceSpec SequenceSpec::defaults(SequenceKind kind)
{
  SequenceSpec s;
  s.kind = kind;
  switch (kind) {
  case SequenceKind::rotating_sprite:
    s.frames = 32;
    s.degrees_per_frame = 2.0;
    break;
  case SequenceKind::color_wheel:
    s.frames = 64;
    s.degrees_per_frame = 1.0;
    s.slices = 12;
    break;
  case SequenceKind::translating_sprites: s.frames = 20; break;
  }
  return s;
}

void SequenceSpec::validate() const
{
  if (frames < 1) { throw RangeError("sequence: at least one frame required"); }
  if (size != 16 && size != 32 && size != 64) { throw RangeError("sequence: size must be 16, 32 or 64"); }
  if (kind == SequenceKind::color_wheel && slices < 1) { throw RangeError("sequence: slices must be positive"); }
  if (!std::isfinite(degrees_per_frame)) { throw RangeError("sequence: rotation rate must be finite"); }
}

std::size_t sprite_count() { return kGlyphs.size(); }

Tensor sprite_bitmap(std::size_t index, std::size_t side)
{
  auto const &glyph = kGlyphs.at(index % kGlyphs.size());
  if (side < 8) { throw ShapeError("sprite_bitmap: side must be at least 8"); }
  Tensor img({1, side, side}, kBackground);
  for (std::size_t y = 0; y < side; ++y) {
    for (std::size_t x = 0; x < side; ++x) {
      if (glyph[y * 8 / side][x * 8 / side] == '#') { img[y * side + x] = 1.0; }
    }
  }
  return img;
}

Tensor rotate_frame(Tensor const &image, double theta_degrees)
{
  if (image.rank() != 3 || image.dim(1) != image.dim(2)) { throw ShapeError("rotate_frame: image must be C × N × N"); }
  std::size_t const ch = image.dim(0), n = image.dim(1);
  auto const [c, s] = trig_degrees(theta_degrees);
  double const centre = (double(n) - 1.0) / 2.0;
  Tensor out(image.shape(), kBackground);

  auto sample = [&](std::size_t channel, std::ptrdiff_t y, std::ptrdiff_t x) {
    if (y < 0 || x < 0 || y >= std::ptrdiff_t(n) || x >= std::ptrdiff_t(n)) { return kBackground; }
    return image[(channel * n + std::size_t(y)) * n + std::size_t(x)];
  };

  for (std::size_t y = 0; y < n; ++y) {
    for (std::size_t x = 0; x < n; ++x) {
      double const dx = double(x) - centre, dy = double(y) - centre;
      double const sx = centre + c * dx - s * dy;
      double const sy = centre + s * dx + c * dy;
      double const fx = std::floor(sx), fy = std::floor(sy);
      double const wx = sx - fx, wy = sy - fy;
      auto const x0 = std::ptrdiff_t(fx), y0 = std::ptrdiff_t(fy);
      for (std::size_t k = 0; k < ch; ++k) {
        double const top = (1.0 - wx) * sample(k, y0, x0) + wx * sample(k, y0, x0 + 1);
        double const bottom = (1.0 - wx) * sample(k, y0 + 1, x0) + wx * sample(k, y0 + 1, x0 + 1);
        out[(k * n + y) * n + x] = (1.0 - wy) * top + wy * bottom;
      }
    }
  }
  return out;
}

Tensor normalize_frame(Tensor const &image)
{
  auto const [lo, hi] = std::minmax_element(image.values().begin(), image.values().end());
  double const a = *lo, b = *hi;
  Tensor out = image;
  for (auto &v : out.values()) { v = b > a ? 2.0 * (v - a) / (b - a) - 1.0 : kBackground; }
  return out;
}

std::array<double, 3> wheel_color(std::size_t slice, std::size_t slices)
{
  (void)slices;
  // Hue steps of 30°: primaries, secondaries and tertiaries.
  static constexpr std::array<std::array<double, 3>, 12> palette{{
      {1.0, -1.0, -1.0}, {1.0, 0.0, -1.0}, {1.0, 1.0, -1.0}, {0.0, 1.0, -1.0},
      {-1.0, 1.0, -1.0}, {-1.0, 1.0, 0.0}, {-1.0, 1.0, 1.0}, {-1.0, 0.0, 1.0},
      {-1.0, -1.0, 1.0}, {0.0, -1.0, 1.0}, {1.0, -1.0, 1.0}, {1.0, -1.0, 0.0},
  }};
  return palette[slice % palette.size()];
}

VideoSequence rotating_sprite_sequence(SequenceSpec const &spec)
{
  spec.validate();
  std::size_t const n = spec.size;
  std::size_t const side = n / 2;
  Tensor const glyph = sprite_bitmap(spec.sprite, side);
  Tensor base({1, n, n}, kBackground);
  std::size_t const off = (n - side) / 2;
  for (std::size_t y = 0; y < side; ++y) {
    for (std::size_t x = 0; x < side; ++x) { base[(off + y) * n + off + x] = glyph[y * side + x]; }
  }
  VideoSequence seq;
  seq.spec = spec;
  for (std::size_t t = 0; t < spec.frames; ++t) {
    seq.frames.push_back(rotate_frame(base, double(t) * spec.degrees_per_frame));
  }
  return seq;
}

VideoSequence color_wheel_sequence(SequenceSpec const &spec)
{
  spec.validate();
  std::size_t const n = spec.size;
  double const centre = (double(n) - 1.0) / 2.0;
  double const radius = double(n) / 2.0 - 1.0;
  double const width = 360.0 / double(spec.slices);
  VideoSequence seq;
  seq.spec = spec;
  for (std::size_t t = 0; t < spec.frames; ++t) {
    Tensor img({3, n, n}, kBackground);
    double const offset = double(t) * spec.degrees_per_frame;
    for (std::size_t y = 0; y < n; ++y) {
      for (std::size_t x = 0; x < n; ++x) {
        double const dx = double(x) - centre, dy = centre - double(y);
        if (dx * dx + dy * dy > radius * radius) { continue; }
        double angle = std::atan2(dy, dx) * 180.0 / std::numbers::pi - offset;
        angle = std::fmod(angle, 360.0);
        if (angle < 0.0) { angle += 360.0; }
        auto const slice = std::min(spec.slices - 1, std::size_t(std::floor(angle / width)));
        auto const rgb = wheel_color(slice, spec.slices);
        for (std::size_t k = 0; k < 3; ++k) { img[(k * n + y) * n + x] = rgb[k]; }
      }
    }
    seq.frames.push_back(std::move(img));
  }
  return seq;
}

std::vector<std::array<std::array<int, 2>, 2>> sprite_trajectory(SequenceSpec const &spec, std::size_t sprite_side)
{
  if (sprite_side > spec.size) { throw ShapeError("translating_sprites: sprite larger than frame"); }
  int const max_pos = int(spec.size - sprite_side);
  SeededRng rng(spec.seed);
  std::array<std::array<int, 2>, 2> pos{};
  for (auto &p : pos) {
    for (auto &c : p) { c = int(rng.below(std::uint64_t(max_pos) + 1)); }
  }
  std::array<std::array<int, 2>, 2> vel{{{spec.velocity[0], spec.velocity[1]}, {-spec.velocity[1], spec.velocity[0]}}};
  std::vector<std::array<std::array<int, 2>, 2>> out{pos};
  for (std::size_t t = 1; t < spec.frames; ++t) {
    for (std::size_t s = 0; s < 2; ++s) {
      for (std::size_t a = 0; a < 2; ++a) { pos[s][a] = bounce(pos[s][a], vel[s][a], max_pos); }
    }
    out.push_back(pos);
  }
  return out;
}

VideoSequence translating_sprites_sequence(SequenceSpec const &spec)
{
  spec.validate();
  std::size_t const n = spec.size;
  std::size_t const side = n * 7 / 16;
  std::array<Tensor, 2> const glyphs{sprite_bitmap(spec.sprite, side), sprite_bitmap(spec.sprite + 1, side)};
  auto const traj = sprite_trajectory(spec, side);
  VideoSequence seq;
  seq.spec = spec;
  for (auto const &pos : traj) {
    Tensor img({1, n, n}, kBackground);
    for (std::size_t s = 0; s < 2; ++s) {
      auto const px = std::size_t(pos[s][0]), py = std::size_t(pos[s][1]);
      for (std::size_t y = 0; y < side; ++y) {
        for (std::size_t x = 0; x < side; ++x) {
          double &dst = img[(py + y) * n + px + x];
          dst = std::max(dst, glyphs[s][y * side + x]);
        }
      }
    }
    seq.frames.push_back(std::move(img));
  }
  return seq;
}

VideoSequence make_sequence(SequenceSpec const &spec)
{
  switch (spec.kind) {
  case SequenceKind::rotating_sprite: return rotating_sprite_sequence(spec);
  case SequenceKind::color_wheel: return color_wheel_sequence(spec);
  case SequenceKind::translating_sprites: return translating_sprites_sequence(spec);
  }
  throw RangeError("make_sequence: unknown kind");
}

} // namespace genrec
