#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <vector>

#include "genrec/error.hpp"

namespace genrec {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(Shape const &shape);

/// Dense row-major array of doubles. Rank-2 tensors double as matrices.
class Tensor {
public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor vector(std::vector<double> values);
  static Tensor identity(std::size_t n);

  Shape const &shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t dim(std::size_t axis) const;

  std::size_t rows() const;
  std::size_t cols() const;

  double *data() noexcept { return data_.data(); }
  double const *data() const noexcept { return data_.data(); }
  std::span<double> values() noexcept { return data_; }
  std::span<double const> values() const noexcept { return data_; }
  std::vector<double> const &storage() const noexcept { return data_; }

  double &operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }
  double &at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  /// Same data under a new shape with equal element count.
  Tensor reshaped(Shape shape) const;

  std::vector<double> column(std::size_t c) const;
  void set_column(std::size_t c, std::span<double const> values);

  Tensor transposed() const;

  void fill(double v);
  bool all_finite() const noexcept;
  double norm() const noexcept;

  Tensor &operator+=(Tensor const &other);
  Tensor &operator-=(Tensor const &other);
  Tensor &operator*=(double s) noexcept;

  friend bool operator==(Tensor const &, Tensor const &) = default;

private:
  Shape shape_;
  std::vector<double> data_;
};

Tensor operator+(Tensor a, Tensor const &b);
Tensor operator-(Tensor a, Tensor const &b);
Tensor operator*(double s, Tensor a);

/// Adds s * x to y element-wise.
void axpy(double s, std::span<double const> x, std::span<double> y);
double dot(std::span<double const> a, std::span<double const> b);
double norm2(std::span<double const> a);

Tensor matmul(Tensor const &a, Tensor const &b);
/// aᵀ · b without materialising the transpose.
Tensor matmul_tn(Tensor const &a, Tensor const &b);
/// a · bᵀ without materialising the transpose.
Tensor matmul_nt(Tensor const &a, Tensor const &b);

/// Raw row-major GEMM kernels used by the generator: c = op(a) · op(b), or c += when accumulate.
void gemm(std::span<double const> a, std::size_t a_rows, std::size_t a_cols, bool trans_a,
          std::span<double const> b, std::size_t b_rows, std::size_t b_cols, bool trans_b,
          std::span<double> c, bool accumulate = false);

/// Reproducible random stream.
///
/// The engine is the standard MT19937-64, whose output sequence is fixed by the C++ standard.
/// Library distributions are implementation-defined, so uniform and normal variates are derived
/// here: uniform as the top 53 bits scaled by 2^-53, normal by the Box-Muller transform with the
/// second variate of each pair cached, and bounded integers by rejection sampling.
class SeededRng {
public:
  explicit SeededRng(std::uint64_t seed = 0);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t next_u64();
  /// Uniform on [0, 1).
  double uniform();
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  /// Derived independent stream, deterministic in (seed, stream).
  SeededRng split(std::uint64_t stream) const;

private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

Tensor gaussian(SeededRng &rng, Shape shape, double stddev);

struct SvdResult {
  Tensor left;                       ///< k × p, orthonormal columns
  std::vector<double> singular_values; ///< p values, non-increasing
  Tensor right;                      ///< T × p, orthonormal columns
  std::size_t sweeps = 0;

  Tensor reconstruct() const;
  /// Reconstruction from the leading r triplets only.
  Tensor reconstruct(std::size_t r) const;
};

struct SvdOptions {
  std::size_t max_sweeps = 100;
  double tolerance = 1e-12;
};

/// Thin SVD of a k × T matrix by one-sided (Hestenes) Jacobi rotations.
///
/// Singular vectors are sign-normalised so the first non-negligible entry of each left vector is
/// positive. Left vectors belonging to zero singular values are completed to an orthonormal set.
SvdResult svd_thin(Tensor const &m, SvdOptions const &opts = {});

} // namespace genrec
