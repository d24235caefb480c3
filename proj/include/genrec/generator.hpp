#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "genrec/tensor.hpp"

namespace genrec {

/// DCGAN-style generator layout: a bias-free fully-connected projection reshaped to a
/// base_channels × base_size × base_size grid, followed by bias-free stride-2 transposed
/// convolutions (kernel 4, padding 1). Hidden activations are relu, the output is tanh.
struct Architecture {
  static constexpr std::size_t kernel_size = 4;

  std::size_t latent_dim = 0;
  std::size_t base_channels = 0;
  std::size_t base_size = 4;
  std::vector<std::size_t> deconv_channels;

  std::size_t layer_count() const noexcept { return deconv_channels.size(); }
  std::size_t output_channels() const { return deconv_channels.back(); }
  std::size_t output_size() const noexcept { return base_size << deconv_channels.size(); }
  Shape output_shape() const { return {output_channels(), output_size(), output_size()}; }
  std::size_t output_length() const { return shape_size(output_shape()); }

  Shape fc_shape() const { return {latent_dim, base_channels * base_size * base_size}; }
  /// (in_channels, out_channels, 4, 4) for deconv layer `layer` (0-based).
  Shape kernel_shape(std::size_t layer) const;
  /// Parameter count per layer in file order: fc, deconv 1..L.
  std::vector<std::size_t> layer_param_counts() const;

  /// Throws ShapeError for zero sizes or an empty layer list.
  void validate() const;

  /// Same layout with the final layer emitting `channels` channels.
  Architecture with_output_channels(std::size_t channels) const;

  friend bool operator==(Architecture const &, Architecture const &) = default;

  /// k=32, 256×4×4 base, deconv 128,64,32,1: the 64×64 grayscale generator.
  static Architecture grayscale();
  /// k=256, 512×4×4 base, deconv 256,128,64,3: the 64×64 RGB generator.
  static Architecture rgb();
  /// k=4, 8×1×1 base, deconv 8,4,2,1: a 16×16 generator small enough for finite differences.
  static Architecture tiny();
  /// Looks up "grayscale", "rgb" or "tiny"; throws RangeError otherwise.
  static Architecture preset(std::string_view name);
};

std::size_t param_count(Architecture const &arch);

struct Gradients;

class Weights {
public:
  Weights() = default;
  /// Zero-initialised weights for `arch`.
  explicit Weights(Architecture arch);

  /// He-style initialisation: N(0, 2 / fan_in), fan_in = k for the projection and
  /// 4·in_channels (taps reaching one output pixel) for each transposed convolution.
  static Weights random(Architecture arch, SeededRng &rng);

  Architecture const &architecture() const noexcept { return arch_; }
  Tensor const &fc() const noexcept { return fc_; }
  Tensor const &kernel(std::size_t layer) const { return kernels_.at(layer); }
  std::vector<Tensor> const &kernels() const noexcept { return kernels_; }

  /// Mutable access invalidates any ForwardTape recorded against these weights.
  Tensor &mutable_fc() noexcept;
  Tensor &mutable_kernel(std::size_t layer);

  std::uint64_t revision() const noexcept { return revision_; }

  /// weights += scale * grads (fc and kernels only).
  void add_scaled(double scale, Gradients const &grads);

  /// Flattened payload in layer order: fc, deconv 1..L.
  std::vector<double> flatten() const;
  static Weights unflatten(Architecture arch, std::span<double const> payload);

  bool all_finite() const noexcept;

  /// Value equality; the revision counter is not compared.
  friend bool operator==(Weights const &a, Weights const &b)
  {
    return a.arch_ == b.arch_ && a.fc_ == b.fc_ && a.kernels_ == b.kernels_;
  }

private:
  Architecture arch_;
  Tensor fc_;
  std::vector<Tensor> kernels_;
  std::uint64_t revision_ = 0;
};

/// Activations retained from one forward pass.
struct ForwardTape {
  Weights const *weights = nullptr;
  std::uint64_t revision = 0;
  std::vector<double> z;
  Tensor fc_pre;                   ///< projection before relu, base_channels·base_size²
  std::vector<Tensor> layer_input; ///< input to each deconv layer (post-activation of the previous)
  std::vector<Tensor> layer_pre;   ///< each deconv output before its activation
  Tensor image;                    ///< tanh of the last pre-activation
};

struct Gradients {
  Tensor d_fc;
  std::vector<Tensor> d_kernels;
  std::vector<double> d_z;

  /// Zero gradients shaped for `arch`.
  static Gradients zeros(Architecture const &arch);
  Gradients &operator+=(Gradients const &other);
  Gradients &operator*=(double s);
  bool all_finite() const noexcept;
};

/// Stride-2 transposed convolution, kernel 4, padding 1: (C_in, H, W) -> (C_out, 2H, 2W).
///
/// out[o, 2y - 1 + ky, 2x - 1 + kx] += in[c, y, x] · kernel[c, o, ky, kx], taps outside the
/// output grid are dropped.
Tensor deconv2d_forward(Tensor const &input, Tensor const &kernel);

/// Reverse pass of deconv2d_forward. Either output pointer may be null to skip that product.
void deconv2d_backward(Tensor const &input, Tensor const &kernel, Tensor const &d_output, Tensor *d_input,
                       Tensor *d_kernel);

struct ForwardResult {
  Tensor image;
  ForwardTape tape;
};

ForwardResult forward(Weights const &weights, std::span<double const> z);
/// Image only, no tape retained.
Tensor generate(Weights const &weights, std::span<double const> z);

struct BackwardOptions {
  /// When false only d_z is computed; d_fc and d_kernels are left empty.
  bool weight_gradients = true;
};

/// Reverse-mode gradients of ⟨d_image, G(z)⟩ with respect to z and every weight tensor.
/// Throws ContractError if the tape was recorded against other or since-modified weights.
Gradients backward(Weights const &weights, ForwardTape const &tape, Tensor const &d_image,
                   BackwardOptions const &opts = {});

} // namespace genrec
