#include "genrec/generator.hpp"

#include <algorithm>
#include <cmath>

namespace genrec {

namespace {

constexpr std::size_t kTaps = Architecture::kernel_size * Architecture::kernel_size;

void check_kernel(Tensor const &input, Tensor const &kernel)
{
  if (input.rank() != 3) { throw ShapeError("deconv2d: input must be C×H×W"); }
  if (kernel.rank() != 4 || kernel.dim(2) != Architecture::kernel_size || kernel.dim(3) != Architecture::kernel_size) {
    throw ShapeError("deconv2d: kernel must be C_in×C_out×4×4");
  }
  if (kernel.dim(0) != input.dim(0)) {
    throw ShapeError("deconv2d: kernel expects " + std::to_string(kernel.dim(0)) + " input channels, got " +
                     std::to_string(input.dim(0)));
  }
}

// cols[(o·16 + ky·4 + kx), y·W + x] scattered into the doubled output grid.
void col2im(std::span<double const> cols, std::size_t out_channels, std::size_t h, std::size_t w, Tensor &out)
{
  std::size_t const oh = 2 * h, ow = 2 * w, hw = h * w;
  double *dst = out.data();
  for (std::size_t o = 0; o < out_channels; ++o) {
    double *plane = dst + o * oh * ow;
    for (std::size_t ky = 0; ky < 4; ++ky) {
      for (std::size_t kx = 0; kx < 4; ++kx) {
        double const *src = cols.data() + ((o * 4 + ky) * 4 + kx) * hw;
        for (std::size_t y = 0; y < h; ++y) {
          std::ptrdiff_t const oy = std::ptrdiff_t(2 * y + ky) - 1;
          if (oy < 0 || oy >= std::ptrdiff_t(oh)) { continue; }
          double *row = plane + std::size_t(oy) * ow;
          double const *srow = src + y * w;
          for (std::size_t x = 0; x < w; ++x) {
            std::ptrdiff_t const ox = std::ptrdiff_t(2 * x + kx) - 1;
            if (ox < 0 || ox >= std::ptrdiff_t(ow)) { continue; }
            row[ox] += srow[x];
          }
        }
      }
    }
  }
}

// Adjoint of col2im.
void im2col(Tensor const &d_out, std::size_t out_channels, std::size_t h, std::size_t w, std::span<double> cols)
{
  std::size_t const oh = 2 * h, ow = 2 * w, hw = h * w;
  double const *srcp = d_out.data();
  for (std::size_t o = 0; o < out_channels; ++o) {
    double const *plane = srcp + o * oh * ow;
    for (std::size_t ky = 0; ky < 4; ++ky) {
      for (std::size_t kx = 0; kx < 4; ++kx) {
        double *dst = cols.data() + ((o * 4 + ky) * 4 + kx) * hw;
        for (std::size_t y = 0; y < h; ++y) {
          std::ptrdiff_t const oy = std::ptrdiff_t(2 * y + ky) - 1;
          double *drow = dst + y * w;
          if (oy < 0 || oy >= std::ptrdiff_t(oh)) {
            std::fill(drow, drow + w, 0.0);
            continue;
          }
          double const *row = plane + std::size_t(oy) * ow;
          for (std::size_t x = 0; x < w; ++x) {
            std::ptrdiff_t const ox = std::ptrdiff_t(2 * x + kx) - 1;
            drow[x] = (ox < 0 || ox >= std::ptrdiff_t(ow)) ? 0.0 : row[ox];
          }
        }
      }
    }
  }
}

} // namespace

Shape Architecture::kernel_shape(std::size_t layer) const
{
  if (layer >= deconv_channels.size()) { throw RangeError("kernel_shape: layer out of range"); }
  std::size_t const in = layer == 0 ? base_channels : deconv_channels[layer - 1];
  return {in, deconv_channels[layer], kernel_size, kernel_size};
}

std::vector<std::size_t> Architecture::layer_param_counts() const
{
  std::vector<std::size_t> counts{shape_size(fc_shape())};
  for (std::size_t l = 0; l < layer_count(); ++l) { counts.push_back(shape_size(kernel_shape(l))); }
  return counts;
}

void Architecture::validate() const
{
  if (latent_dim == 0 || base_channels == 0 || base_size == 0) {
    throw ShapeError("architecture: latent_dim, base_channels and base_size must be positive");
  }
  if (deconv_channels.empty()) { throw ShapeError("architecture: at least one deconvolution layer required"); }
  if (std::any_of(deconv_channels.begin(), deconv_channels.end(), [](auto c) { return c == 0; })) {
    throw ShapeError("architecture: channel counts must be positive");
  }
}

Architecture Architecture::with_output_channels(std::size_t channels) const
{
  Architecture out = *this;
  out.deconv_channels.back() = channels;
  return out;
}

Architecture Architecture::grayscale() { return {32, 256, 4, {128, 64, 32, 1}}; }
Architecture Architecture::rgb() { return {256, 512, 4, {256, 128, 64, 3}}; }
Architecture Architecture::tiny() { return {4, 8, 1, {8, 4, 2, 1}}; }

Architecture Architecture::preset(std::string_view name)
{
  if (name == "grayscale") { return grayscale(); }
  if (name == "rgb") { return rgb(); }
  if (name == "tiny") { return tiny(); }
  throw RangeError("unknown architecture preset '" + std::string(name) + "'");
}

std::size_t param_count(Architecture const &arch)
{
  auto const counts = arch.layer_param_counts();
  std::size_t total = 0;
  for (auto c : counts) { total += c; }
  return total;
}

Weights::Weights(Architecture arch)
  : arch_{std::move(arch)}
{
  arch_.validate();
  fc_ = Tensor(arch_.fc_shape());
  for (std::size_t l = 0; l < arch_.layer_count(); ++l) { kernels_.emplace_back(arch_.kernel_shape(l)); }
}

Weights Weights::random(Architecture arch, SeededRng &rng)
{
  Weights w(std::move(arch));
  w.fc_ = gaussian(rng, w.arch_.fc_shape(), std::sqrt(2.0 / double(w.arch_.latent_dim)));
  for (std::size_t l = 0; l < w.arch_.layer_count(); ++l) {
    auto const shape = w.arch_.kernel_shape(l);
    double const fan_in = double(shape[0] * kTaps / 4);
    w.kernels_[l] = gaussian(rng, shape, std::sqrt(2.0 / fan_in));
  }
  return w;
}

Tensor &Weights::mutable_fc() noexcept
{
  ++revision_;
  return fc_;
}

Tensor &Weights::mutable_kernel(std::size_t layer)
{
  ++revision_;
  return kernels_.at(layer);
}

void Weights::add_scaled(double scale, Gradients const &grads)
{
  if (grads.d_fc.shape() != fc_.shape() || grads.d_kernels.size() != kernels_.size()) {
    throw ShapeError("add_scaled: gradient layout does not match weights");
  }
  ++revision_;
  axpy(scale, grads.d_fc.values(), fc_.values());
  for (std::size_t l = 0; l < kernels_.size(); ++l) {
    if (grads.d_kernels[l].shape() != kernels_[l].shape()) { throw ShapeError("add_scaled: kernel shape mismatch"); }
    axpy(scale, grads.d_kernels[l].values(), kernels_[l].values());
  }
}

std::vector<double> Weights::flatten() const
{
  std::vector<double> out(fc_.storage());
  for (auto const &k : kernels_) { out.insert(out.end(), k.storage().begin(), k.storage().end()); }
  return out;
}

Weights Weights::unflatten(Architecture arch, std::span<double const> payload)
{
  Weights w(std::move(arch));
  if (payload.size() != param_count(w.arch_)) {
    throw ShapeError("unflatten: payload has " + std::to_string(payload.size()) + " values, architecture needs " +
                     std::to_string(param_count(w.arch_)));
  }
  auto it = payload.begin();
  auto take = [&](Tensor &t) {
    std::copy(it, it + std::ptrdiff_t(t.size()), t.data());
    it += std::ptrdiff_t(t.size());
  };
  take(w.fc_);
  for (auto &k : w.kernels_) { take(k); }
  return w;
}

bool Weights::all_finite() const noexcept
{
  return fc_.all_finite() && std::all_of(kernels_.begin(), kernels_.end(), [](auto const &k) { return k.all_finite(); });
}

Gradients Gradients::zeros(Architecture const &arch)
{
  Gradients g;
  g.d_fc = Tensor(arch.fc_shape());
  for (std::size_t l = 0; l < arch.layer_count(); ++l) { g.d_kernels.emplace_back(arch.kernel_shape(l)); }
  g.d_z.assign(arch.latent_dim, 0.0);
  return g;
}

Gradients &Gradients::operator+=(Gradients const &other)
{
  if (other.d_kernels.size() != d_kernels.size()) { throw ShapeError("gradient accumulation: layer count mismatch"); }
  if (!other.d_fc.storage().empty()) { d_fc += other.d_fc; }
  for (std::size_t l = 0; l < d_kernels.size(); ++l) { d_kernels[l] += other.d_kernels[l]; }
  if (!other.d_z.empty()) { axpy(1.0, other.d_z, d_z); }
  return *this;
}

Gradients &Gradients::operator*=(double s)
{
  d_fc *= s;
  for (auto &k : d_kernels) { k *= s; }
  for (auto &v : d_z) { v *= s; }
  return *this;
}

bool Gradients::all_finite() const noexcept
{
  return d_fc.all_finite() &&
         std::all_of(d_kernels.begin(), d_kernels.end(), [](auto const &k) { return k.all_finite(); }) &&
         std::all_of(d_z.begin(), d_z.end(), [](double v) { return std::isfinite(v); });
}

Tensor deconv2d_forward(Tensor const &input, Tensor const &kernel)
{
  check_kernel(input, kernel);
  std::size_t const cin = input.dim(0), h = input.dim(1), w = input.dim(2), cout = kernel.dim(1);
  std::size_t const hw = h * w;
  // cols = kernelᵀ (C_out·16 × C_in) · input (C_in × HW)
  std::vector<double> cols(cout * kTaps * hw);
  gemm(kernel.values(), cin, cout * kTaps, true, input.values(), cin, hw, false, cols);
  Tensor out({cout, 2 * h, 2 * w});
  col2im(cols, cout, h, w, out);
  return out;
}

void deconv2d_backward(Tensor const &input, Tensor const &kernel, Tensor const &d_output, Tensor *d_input,
                       Tensor *d_kernel)
{
  check_kernel(input, kernel);
  std::size_t const cin = input.dim(0), h = input.dim(1), w = input.dim(2), cout = kernel.dim(1);
  std::size_t const hw = h * w;
  if (d_output.shape() != Shape{cout, 2 * h, 2 * w}) { throw ShapeError("deconv2d_backward: d_output shape mismatch"); }
  std::vector<double> d_cols(cout * kTaps * hw);
  im2col(d_output, cout, h, w, d_cols);
  if (d_input) {
    *d_input = Tensor(input.shape());
    gemm(kernel.values(), cin, cout * kTaps, false, d_cols, cout * kTaps, hw, false, d_input->values());
  }
  if (d_kernel) {
    *d_kernel = Tensor(kernel.shape());
    gemm(input.values(), cin, hw, false, d_cols, cout * kTaps, hw, true, d_kernel->values());
  }
}

ForwardResult forward(Weights const &weights, std::span<double const> z)
{
  Architecture const &arch = weights.architecture();
  if (z.size() != arch.latent_dim) {
    throw ShapeError("forward: latent code has length " + std::to_string(z.size()) + ", expected " +
                     std::to_string(arch.latent_dim));
  }
  ForwardResult r;
  ForwardTape &tape = r.tape;
  tape.weights = &weights;
  tape.revision = weights.revision();
  tape.z.assign(z.begin(), z.end());

  std::size_t const base = arch.base_channels * arch.base_size * arch.base_size;
  tape.fc_pre = Tensor({base});
  gemm(z, 1, arch.latent_dim, false, weights.fc().values(), arch.latent_dim, base, false, tape.fc_pre.values());

  Tensor h = tape.fc_pre.reshaped({arch.base_channels, arch.base_size, arch.base_size});
  for (auto &v : h.values()) { v = std::max(v, 0.0); }

  std::size_t const layers = arch.layer_count();
  for (std::size_t l = 0; l < layers; ++l) {
    Tensor pre = deconv2d_forward(h, weights.kernel(l));
    tape.layer_input.push_back(std::move(h));
    h = pre;
    if (l + 1 < layers) {
      for (auto &v : h.values()) { v = std::max(v, 0.0); }
    } else {
      for (auto &v : h.values()) { v = std::tanh(v); }
    }
    tape.layer_pre.push_back(std::move(pre));
  }
  tape.image = h;
  r.image = std::move(h);
  return r;
}

Tensor generate(Weights const &weights, std::span<double const> z) { return forward(weights, z).image; }

Gradients backward(Weights const &weights, ForwardTape const &tape, Tensor const &d_image, BackwardOptions const &opts)
{
  if (tape.weights != &weights || tape.revision != weights.revision()) {
    throw ContractError("backward: tape was recorded against different or since-modified weights");
  }
  Architecture const &arch = weights.architecture();
  std::size_t const layers = arch.layer_count();
  if (tape.layer_pre.size() != layers || tape.layer_input.size() != layers) {
    throw ContractError("backward: tape layer count does not match architecture");
  }
  if (d_image.shape() != tape.image.shape()) { throw ShapeError("backward: d_image shape mismatch"); }

  Gradients g;
  if (opts.weight_gradients) { g.d_kernels.resize(layers); }

  Tensor grad = d_image;
  {
    auto const out = tape.image.values();
    auto gv = grad.values();
    for (std::size_t i = 0; i < gv.size(); ++i) { gv[i] *= 1.0 - out[i] * out[i]; }
  }
  for (std::size_t l = layers; l-- > 0;) {
    Tensor d_in;
    deconv2d_backward(tape.layer_input[l], weights.kernel(l), grad, &d_in,
                      opts.weight_gradients ? &g.d_kernels[l] : nullptr);
    // relu' of the activation feeding layer l; zero at exactly zero.
    Tensor const &pre = l > 0 ? tape.layer_pre[l - 1] : tape.fc_pre;
    auto const pv = pre.values();
    auto dv = d_in.values();
    for (std::size_t i = 0; i < dv.size(); ++i) {
      if (!(pv[i] > 0.0)) { dv[i] = 0.0; }
    }
    grad = std::move(d_in);
  }

  std::size_t const base = arch.base_channels * arch.base_size * arch.base_size;
  g.d_z.assign(arch.latent_dim, 0.0);
  gemm(weights.fc().values(), arch.latent_dim, base, false, grad.values(), base, 1, false, g.d_z);
  if (opts.weight_gradients) {
    g.d_fc = Tensor(arch.fc_shape());
    gemm(tape.z, arch.latent_dim, 1, false, grad.values(), 1, base, false, g.d_fc.values());
  }
  return g;
}

} // namespace genrec
