#include <doctest.h>

#include <cmath>
#include <numbers>

#include "genrec/synth.hpp"
#include "oracles.hpp"

using namespace genrec;

namespace {

double mean_abs_diff(Tensor const &a, Tensor const &b)
{
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) { s += std::abs(a[i] - b[i]); }
  return s / double(a.size());
}

double mass(Tensor const &img)
{
  double s = 0.0;
  for (double v : img.values()) { s += v - kBackground; }
  return s;
}

Tensor centred_sprite(std::size_t n)
{
  auto spec = SequenceSpec::defaults(SequenceKind::rotating_sprite);
  spec.size = n;
  spec.frames = 1;
  return rotating_sprite_sequence(spec).frames[0];
}

} // namespace

TEST_CASE("sequence spec defaults and validation")
{
  auto const rot = SequenceSpec::defaults(SequenceKind::rotating_sprite);
  CHECK(rot.frames == 32);
  CHECK(rot.degrees_per_frame == 2.0);
  auto const wheel = SequenceSpec::defaults(SequenceKind::color_wheel);
  CHECK(wheel.frames == 64);
  CHECK(wheel.degrees_per_frame == 1.0);
  CHECK(wheel.slices == 12);
  CHECK(SequenceSpec::defaults(SequenceKind::translating_sprites).frames == 20);

  auto bad = rot;
  bad.size = 48;
  CHECK_THROWS_AS(bad.validate(), RangeError);
  bad = rot;
  bad.frames = 0;
  CHECK_THROWS_AS(bad.validate(), RangeError);

  CHECK(parse_sequence_kind("color_wheel") == SequenceKind::color_wheel);
  CHECK(to_string(SequenceKind::translating_sprites) == "translating_sprites");
  CHECK_THROWS_AS(parse_sequence_kind("mnist"), RangeError);
}

TEST_CASE("rotate_frame identity and quarter turn")
{
  auto const img = centred_sprite(32);
  CHECK(rotate_frame(img, 0.0) == img);

  SeededRng rng(1);
  auto const noise = gaussian(rng, {2, 16, 16}, 0.3);
  auto const q = rotate_frame(noise, 90.0);
  std::size_t const n = 16;
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t y = 0; y < n; ++y) {
      for (std::size_t x = 0; x < n; ++x) {
        // Output pixel (y, x) samples source row x, column n-1-y.
        CHECK(q[(c * n + y) * n + x] == noise[(c * n + x) * n + (n - 1 - y)]);
      }
    }
  }
  CHECK_THROWS_AS(rotate_frame(Tensor({1, 4, 5}), 10.0), ShapeError);
}

TEST_CASE("cumulative small rotations return close to the start")
{
  // Smooth off-centre bump; hard glyph edges blur further under 180 resamplings.
  std::size_t const n = 64;
  Tensor img({1, n, n});
  for (std::size_t y = 0; y < n; ++y) {
    for (std::size_t x = 0; x < n; ++x) {
      double const dx = double(x) - 43.5, dy = double(y) - 31.5;
      img[y * n + x] = 2.0 * std::exp(-(dx * dx + dy * dy) / 32.0) - 1.0;
    }
  }
  Tensor cur = img;
  for (int i = 0; i < 180; ++i) { cur = rotate_frame(cur, 2.0); }
  CHECK(mean_abs_diff(cur, img) < 0.1);
  CHECK(mean_abs_diff(rotate_frame(img, 180.0), img) > 2.0 * mean_abs_diff(cur, img));
}

TEST_CASE("rotation preserves sprite mass")
{
  auto const img = centred_sprite(64);
  for (double theta : {15.0, 30.0, 45.0, 137.0}) {
    CHECK(std::abs(mass(rotate_frame(img, theta)) / mass(img) - 1.0) < 0.05);
  }
}

TEST_CASE("rotating sprite sequence")
{
  auto spec = SequenceSpec::defaults(SequenceKind::rotating_sprite);
  spec.size = 32;
  auto const seq = rotating_sprite_sequence(spec);
  CHECK(seq.frames.size() == 32);
  CHECK(seq.channels() == 1);
  CHECK(seq.frames[5] == rotate_frame(seq.frames[0], 10.0));
  for (auto const &f : seq.frames) {
    for (double v : f.values()) {
      CHECK(v >= -1.0);
      CHECK(v <= 1.0);
    }
  }
  CHECK(rotating_sprite_sequence(spec).frames == seq.frames);
}

TEST_CASE("colour wheel matches a per-pixel angle oracle")
{
  auto spec = SequenceSpec::defaults(SequenceKind::color_wheel);
  spec.size = 32;
  spec.frames = 40;
  auto const seq = color_wheel_sequence(spec);
  std::size_t const n = 32;
  double const c = (double(n) - 1.0) / 2.0;
  double const radius = double(n) / 2.0 - 1.0;

  for (std::size_t t : {0, 7, 30}) {
    auto const &f = seq.frames[t];
    for (std::size_t y = 0; y < n; ++y) {
      for (std::size_t x = 0; x < n; ++x) {
        double const dx = double(x) - c, dy = c - double(y);
        std::array<double, 3> expected{-1.0, -1.0, -1.0};
        if (std::hypot(dx, dy) <= radius) {
          // Angle in radians on [0, 2π) after undoing the rotation.
          double a = std::atan2(dy, dx) - double(t) * std::numbers::pi / 180.0;
          while (a < 0) { a += 2.0 * std::numbers::pi; }
          while (a >= 2.0 * std::numbers::pi) { a -= 2.0 * std::numbers::pi; }
          auto const slice = std::size_t(a / (std::numbers::pi / 6.0)) % 12;
          expected = wheel_color(slice, 12);
        }
        for (std::size_t k = 0; k < 3; ++k) { CHECK(f[(k * n + y) * n + x] == expected[k]); }
      }
    }
  }
}

TEST_CASE("colour wheel palette and thirty-degree periodicity")
{
  auto spec = SequenceSpec::defaults(SequenceKind::color_wheel);
  spec.size = 64;
  spec.frames = 31;
  auto const seq = color_wheel_sequence(spec);
  CHECK(seq.channels() == 3);

  std::vector<std::array<double, 3>> palette;
  for (std::size_t s = 0; s < 12; ++s) { palette.push_back(wheel_color(s, 12)); }
  for (std::size_t i = 0; i < 12; ++i) {
    for (std::size_t j = i + 1; j < 12; ++j) { CHECK(palette[i] != palette[j]); }
  }

  std::size_t const n = 64, px = n * n;
  auto const &f0 = seq.frames[0];
  auto const &f30 = seq.frames[30];
  std::size_t mismatched = 0;
  for (std::size_t i = 0; i < px; ++i) {
    std::array<double, 3> const a{f0[i], f0[px + i], f0[2 * px + i]};
    std::array<double, 3> const b{f30[i], f30[px + i], f30[2 * px + i]};
    if (a == std::array<double, 3>{-1, -1, -1}) {
      CHECK(b == a);
      continue;
    }
    auto const it = std::find(palette.begin(), palette.end(), a);
    REQUIRE(it != palette.end());
    auto const s = std::size_t(it - palette.begin());
    // Rotating by one slice width shifts every pixel to the previous slice's colour.
    mismatched += b != palette[(s + 11) % 12];
  }
  CHECK(mismatched == 0);
}

TEST_CASE("translating sprites follow the bounce oracle")
{
  auto spec = SequenceSpec::defaults(SequenceKind::translating_sprites);
  spec.size = 32;
  spec.frames = 60;
  spec.velocity = {1, 0};
  std::size_t const side = 32 * 7 / 16;
  int const limit = int(32 - side);
  auto const traj = sprite_trajectory(spec, side);
  REQUIRE(traj.size() == 60);
  auto const x0 = oracle::bounce(traj[0][0][0], 1, limit, 60);
  auto const y1 = oracle::bounce(traj[0][1][1], 1, limit, 60);
  for (std::size_t t = 0; t < 60; ++t) {
    CHECK(traj[t][0][0] == x0[t]);
    CHECK(traj[t][0][1] == traj[0][0][1]);
    CHECK(traj[t][1][1] == y1[t]);
    CHECK(traj[t][1][0] == traj[0][1][0]);
  }

  spec.velocity = {0, 0};
  auto const still = translating_sprites_sequence(spec);
  for (auto const &f : still.frames) { CHECK(f == still.frames[0]); }

  CHECK_THROWS_AS(sprite_trajectory(spec, 40), ShapeError);
}

TEST_CASE("translating sprites sequence")
{
  auto const spec = SequenceSpec::defaults(SequenceKind::translating_sprites);
  auto const seq = make_sequence(spec);
  CHECK(seq.frames.size() == 20);
  CHECK(seq.size() == 64);
  for (auto const &f : seq.frames) {
    for (double v : f.values()) {
      CHECK(v >= -1.0);
      CHECK(v <= 1.0);
    }
  }
  CHECK(make_sequence(spec).frames == seq.frames);
  auto other = spec;
  other.seed = 99;
  CHECK(make_sequence(other).frames != seq.frames);
}

TEST_CASE("normalize_frame and sprites")
{
  auto const img = Tensor::vector({2.0, 4.0, 3.0});
  auto const n = normalize_frame(img);
  CHECK(n == Tensor::vector({-1.0, 1.0, 0.0}));
  CHECK(normalize_frame(Tensor::vector({3.0, 3.0})) == Tensor::vector({-1.0, -1.0}));

  CHECK(sprite_count() >= 2);
  auto const s = sprite_bitmap(0, 16);
  CHECK(s.shape() == Shape{1, 16, 16});
  bool any = false;
  for (double v : s.values()) { any |= v == 1.0; }
  CHECK(any);
  CHECK_THROWS_AS(sprite_bitmap(0, 4), ShapeError);
}
