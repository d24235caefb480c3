#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "genrec/tensor.hpp"

namespace genrec {

enum class MeasurementKind { identity, gaussian_dense, pixel_mask };

/// A linear operator A_t acting on a flattened (channel-major, row-major) frame of length n.
class MeasurementOperator {
public:
  static MeasurementOperator identity(std::size_t n);
  /// Dense m × n matrix with i.i.d. N(0, 1/m) entries.
  static MeasurementOperator gaussian(std::size_t m, std::size_t n, SeededRng &rng);
  static MeasurementOperator gaussian(Tensor matrix);
  /// Keeps the given strictly increasing indices.
  static MeasurementOperator mask(std::size_t n, std::vector<std::size_t> kept);

  MeasurementKind kind() const noexcept { return kind_; }
  std::size_t input_dim() const noexcept { return n_; }
  std::size_t output_dim() const noexcept;

  Tensor const &matrix() const noexcept { return matrix_; }
  std::vector<std::size_t> const &kept() const noexcept { return kept_; }

  std::vector<double> apply(std::span<double const> x) const;
  /// Exact transpose action Aᵀ y.
  std::vector<double> adjoint(std::span<double const> y) const;

private:
  MeasurementKind kind_ = MeasurementKind::identity;
  std::size_t n_ = 0;
  Tensor matrix_;
  std::vector<std::size_t> kept_;
};

/// Uniformly samples round-half-up(keep_fraction · n) pixels without replacement.
MeasurementOperator make_mask(std::size_t n, double keep_fraction, SeededRng &rng);

struct MeasurementSet {
  std::vector<MeasurementOperator> operators;
  std::vector<std::vector<double>> measurements;
  double noise_std = 0.0;

  std::size_t frames() const noexcept { return operators.size(); }
};

/// y_t = A_t x_t + e_t with e_t ~ N(0, noise_std²) drawn from `rng` in frame order.
MeasurementSet measure_sequence(std::span<Tensor const> frames, std::vector<MeasurementOperator> operators,
                                double noise_std, SeededRng &rng);

} // namespace genrec
