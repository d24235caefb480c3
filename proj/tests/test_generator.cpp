#include <doctest.h>

#include <cmath>

#include "genrec/generator.hpp"
#include "oracles.hpp"

using namespace genrec;

namespace {

std::vector<double> random_vector(SeededRng &rng, std::size_t n) { return gaussian(rng, {n}, 1.0).storage(); }

// ⟨c, G(z)⟩ for a fixed cotangent c.
double contracted(Weights const &w, std::span<double const> z, Tensor const &c)
{
  return dot(c.values(), generate(w, z).values());
}

} // namespace

TEST_CASE("parameter counts of the presets")
{
  auto const gray = Architecture::grayscale();
  CHECK(gray.layer_param_counts() == std::vector<std::size_t>{131072, 524288, 131072, 32768, 512});
  CHECK(param_count(gray) == 819712);
  CHECK(param_count(Architecture::rgb()) == 4852736);
  CHECK(param_count(Architecture::rgb()) == oracle::param_count(256, 512, 4, {256, 128, 64, 3}));

  auto const tiny = Architecture::tiny();
  CHECK(param_count(tiny) == oracle::param_count(4, 8, 1, {8, 4, 2, 1}));
  SeededRng rng(1);
  CHECK(Weights::random(tiny, rng).flatten().size() == param_count(tiny));
}

TEST_CASE("architecture geometry")
{
  CHECK(Architecture::grayscale().output_shape() == Shape{1, 64, 64});
  CHECK(Architecture::rgb().output_shape() == Shape{3, 64, 64});
  CHECK(Architecture::tiny().output_shape() == Shape{1, 16, 16});
  CHECK(Architecture::grayscale().with_output_channels(3).output_shape() == Shape{3, 64, 64});
  CHECK(Architecture::preset("tiny") == Architecture::tiny());
  CHECK_THROWS_AS(Architecture::preset("huge"), RangeError);

  Architecture bad = Architecture::tiny();
  bad.deconv_channels.clear();
  CHECK_THROWS_AS(bad.validate(), ShapeError);
  bad = Architecture::tiny();
  bad.latent_dim = 0;
  CHECK_THROWS_AS(bad.validate(), ShapeError);
}

TEST_CASE("deconv matches the scatter-add oracle")
{
  SeededRng rng(3);
  auto const k0 = Tensor({1, 1, 4, 4});
  auto const in0 = gaussian(rng, {1, 3, 3}, 1.0);
  auto const zero_out = deconv2d_forward(in0, k0);
  CHECK(zero_out.shape() == Shape{1, 6, 6});
  for (double v : zero_out.values()) { CHECK(v == 0.0); }

  CHECK(deconv2d_forward(gaussian(rng, {1, 4, 4}, 1.0), gaussian(rng, {1, 1, 4, 4}, 1.0)).shape() == Shape{1, 8, 8});

  auto const in = gaussian(rng, {1, 2, 2}, 1.0);
  auto const kernel = gaussian(rng, {1, 1, 4, 4}, 1.0);
  auto const out = deconv2d_forward(in, kernel);
  REQUIRE(out.shape() == Shape{1, 4, 4});
  auto const ref = oracle::scatter_deconv(in.storage(), 1, 2, 2, kernel.storage(), 1);
  for (std::size_t i = 0; i < ref.size(); ++i) { CHECK(std::abs(out[i] - ref[i]) < 1e-12); }

  for (int trial = 0; trial < 20; ++trial) {
    std::size_t const cin = 1 + rng.below(4), cout = 1 + rng.below(4), h = 1 + rng.below(5), w = 1 + rng.below(5);
    auto const x = gaussian(rng, {cin, h, w}, 1.0);
    auto const k = gaussian(rng, {cin, cout, 4, 4}, 1.0);
    auto const y = deconv2d_forward(x, k);
    auto const r = oracle::scatter_deconv(x.storage(), cin, h, w, k.storage(), cout);
    REQUIRE(y.size() == r.size());
    for (std::size_t i = 0; i < r.size(); ++i) { CHECK(std::abs(y[i] - r[i]) < 1e-12); }
  }

  CHECK_THROWS_AS(deconv2d_forward(gaussian(rng, {2, 2, 2}, 1.0), kernel), ShapeError);
  CHECK_THROWS_AS(deconv2d_forward(in, gaussian(rng, {1, 1, 3, 3}, 1.0)), ShapeError);
}

TEST_CASE("deconv backward is the adjoint of forward")
{
  SeededRng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    std::size_t const cin = 1 + rng.below(4), cout = 1 + rng.below(4), h = 1 + rng.below(4), w = 1 + rng.below(4);
    auto const x = gaussian(rng, {cin, h, w}, 1.0);
    auto const k = gaussian(rng, {cin, cout, 4, 4}, 1.0);
    auto const g = gaussian(rng, {cout, 2 * h, 2 * w}, 1.0);
    Tensor dx, dk;
    deconv2d_backward(x, k, g, &dx, &dk);
    double const lhs = dot(g.values(), deconv2d_forward(x, k).values());
    CHECK(std::abs(lhs - dot(dx.values(), x.values())) < 1e-10 * (1.0 + std::abs(lhs)));
    CHECK(std::abs(lhs - dot(dk.values(), k.values())) < 1e-10 * (1.0 + std::abs(lhs)));
  }
}

TEST_CASE("forward on zero weights and output shapes")
{
  Weights zero(Architecture::tiny());
  auto const img = generate(zero, std::vector<double>{1, -2, 3, 4});
  for (double v : img.values()) { CHECK(v == 0.0); }

  SeededRng rng(6);
  auto const rgb = Weights::random(Architecture::rgb(), rng);
  CHECK(generate(rgb, random_vector(rng, 256)).shape() == Shape{3, 64, 64});

  CHECK_THROWS_AS(generate(zero, std::vector<double>{1, 2}), ShapeError);
}

TEST_CASE("single active path equals the hand-traced composition")
{
  auto const arch = Architecture::tiny();
  for (double sign : {1.0, -1.0}) {
    Weights w(arch);
    double const w0 = 0.7 * sign, w1 = 1.3, w2 = 0.9, w3 = 1.1, w4 = 0.8;
    w.mutable_fc().at(0, 0) = w0;
    // Kernel tap (1, 1) carries input pixel (0, 0) to output pixel (0, 0).
    w.mutable_kernel(0)[5] = w1;
    w.mutable_kernel(1)[5] = w2;
    w.mutable_kernel(2)[5] = w3;
    w.mutable_kernel(3)[5] = w4;
    std::vector<double> const z{1.5, 0.3, -0.2, 0.4};
    auto relu = [](double v) { return v > 0 ? v : 0.0; };
    double const expected = std::tanh(w4 * relu(w3 * relu(w2 * relu(w1 * relu(w0 * z[0])))));
    auto const img = generate(w, z);
    CHECK(img[0] == doctest::Approx(expected).epsilon(1e-14));
    for (std::size_t i = 1; i < img.size(); ++i) { CHECK(img[i] == 0.0); }
  }
}

TEST_CASE("forward is deterministic and bounded")
{
  SeededRng rng(7);
  auto const w = Weights::random(Architecture::tiny(), rng);
  for (int trial = 0; trial < 20; ++trial) {
    auto const z = random_vector(rng, 4);
    auto const a = generate(w, z);
    CHECK(a == generate(w, z));
    CHECK(a == forward(w, z).image);
    for (double v : a.values()) {
      CHECK(v > -1.0);
      CHECK(v < 1.0);
    }
  }
}

TEST_CASE("random initialisation scale")
{
  SeededRng rng(8);
  auto const w = Weights::random(Architecture::grayscale(), rng);
  auto rms = [](Tensor const &t) { return std::sqrt(dot(t.values(), t.values()) / double(t.size())); };
  CHECK(rms(w.fc()) == doctest::Approx(std::sqrt(2.0 / 32.0)).epsilon(0.02));
  CHECK(rms(w.kernel(1)) == doctest::Approx(std::sqrt(2.0 / (4.0 * 128.0))).epsilon(0.02));
}

TEST_CASE("backward trivial cases and contracts")
{
  SeededRng rng(9);
  auto const arch = Architecture::tiny();
  auto w = Weights::random(arch, rng);
  auto const z = random_vector(rng, 4);
  auto const fr = forward(w, z);

  auto const g0 = backward(w, fr.tape, Tensor(arch.output_shape()));
  for (double v : g0.d_z) { CHECK(v == 0.0); }
  for (double v : g0.d_fc.values()) { CHECK(v == 0.0); }
  for (auto const &k : g0.d_kernels) {
    for (double v : k.values()) { CHECK(v == 0.0); }
  }

  auto const only_z = backward(w, fr.tape, Tensor(arch.output_shape(), 1.0), {false});
  CHECK(only_z.d_z.size() == 4);
  CHECK(only_z.d_kernels.empty());

  CHECK_THROWS_AS(backward(w, fr.tape, Tensor({1, 8, 8})), ShapeError);
  Weights other = w;
  CHECK_THROWS_AS(backward(other, fr.tape, Tensor(arch.output_shape())), ContractError);
  w.mutable_fc()[0] += 1.0;
  CHECK_THROWS_AS(backward(w, fr.tape, Tensor(arch.output_shape())), ContractError);
}

TEST_CASE("relu gradient vanishes at negative pre-activations")
{
  auto const arch = Architecture::tiny();
  Weights w(arch);
  w.mutable_fc().at(0, 0) = -1.0; // channel 0 pre-activation = -z0 < 0
  w.mutable_fc().at(1, 1) = 1.0;
  w.mutable_kernel(0)[5] = 1.0;
  std::vector<double> const z{1.0, 1.0, 0.0, 0.0};
  auto const fr = forward(w, z);
  CHECK(fr.tape.fc_pre[0] < 0.0);
  auto const g = backward(w, fr.tape, Tensor(arch.output_shape(), 1.0));
  CHECK(g.d_z[0] == 0.0);
  // fc column 0 only feeds the dead unit.
  for (std::size_t i = 0; i < 4; ++i) { CHECK(g.d_fc.at(i, 0) == 0.0); }
}

TEST_CASE("gradients match central differences entrywise")
{
  SeededRng rng(10);
  auto const arch = Architecture::tiny();
  auto w = Weights::random(arch, rng);
  auto const z = random_vector(rng, 4);
  auto const c = gaussian(rng, arch.output_shape(), 1.0);
  auto const g = backward(w, forward(w, z).tape, c);

  double const h = 1e-5;
  double worst = 0.0;
  auto compare = [&](double analytic, double fd) {
    worst = std::max(worst, std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), 1e-6}));
  };
  for (std::size_t i = 0; i < 4; ++i) {
    compare(g.d_z[i], oracle::central_difference(
                          [&](double v) {
                            auto zz = z;
                            zz[i] = v;
                            return contracted(w, zz, c);
                          },
                          z[i], h));
  }
  for (std::size_t i = 0; i < w.fc().size(); i += 3) {
    double const orig = w.fc()[i];
    compare(g.d_fc[i], oracle::central_difference(
                           [&](double v) {
                             Weights ww = w;
                             ww.mutable_fc()[i] = v;
                             return contracted(ww, z, c);
                           },
                           orig, h));
  }
  for (std::size_t l = 0; l < arch.layer_count(); ++l) {
    for (std::size_t i = 0; i < w.kernel(l).size(); i += 7) {
      double const orig = w.kernel(l)[i];
      compare(g.d_kernels[l][i], oracle::central_difference(
                                     [&](double v) {
                                       Weights ww = w;
                                       ww.mutable_kernel(l)[i] = v;
                                       return contracted(ww, z, c);
                                     },
                                     orig, h));
    }
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("directional derivatives over random directions")
{
  SeededRng rng(11);
  auto const arch = Architecture::tiny();
  auto const w = Weights::random(arch, rng);
  auto const z = random_vector(rng, 4);
  auto const c = gaussian(rng, arch.output_shape(), 1.0);
  auto const g = backward(w, forward(w, z).tape, c);
  double const h = 1e-5;

  auto const flat = w.flatten();
  std::vector<double> grad_flat = g.d_fc.storage();
  for (auto const &k : g.d_kernels) { grad_flat.insert(grad_flat.end(), k.values().begin(), k.values().end()); }

  int passed = 0;
  for (int trial = 0; trial < 50; ++trial) {
    auto const vz = random_vector(rng, 4);
    auto const vw = random_vector(rng, flat.size());
    auto shifted = [&](double s) {
      auto p = flat;
      axpy(s, vw, p);
      auto zz = z;
      axpy(s, vz, zz);
      return contracted(Weights::unflatten(arch, p), zz, c);
    };
    double const fd = (shifted(h) - shifted(-h)) / (2.0 * h);
    double const an = dot(g.d_z, vz) + dot(grad_flat, vw);
    passed += std::abs(fd - an) / std::max(std::abs(an), 1e-6) < 1e-6;
  }
  CHECK(passed == 50);
}

TEST_CASE("flatten round trip and gradient arithmetic")
{
  SeededRng rng(12);
  auto const arch = Architecture::tiny();
  auto const w = Weights::random(arch, rng);
  auto const back = Weights::unflatten(arch, w.flatten());
  CHECK(back == w);
  CHECK_THROWS_AS(Weights::unflatten(arch, std::vector<double>(3)), ShapeError);

  auto g = Gradients::zeros(arch);
  g.d_fc.fill(1.0);
  auto w2 = w;
  w2.add_scaled(-0.5, g);
  CHECK(w2.fc()[0] == doctest::Approx(w.fc()[0] - 0.5));
  CHECK(w2.kernel(0) == w.kernel(0));
  g += g;
  g *= 0.25;
  CHECK(g.d_fc[0] == 0.5);
  CHECK(g.all_finite());
}
