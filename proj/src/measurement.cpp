#include "genrec/measurement.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace genrec {

MeasurementOperator MeasurementOperator::identity(std::size_t n)
{
  if (n == 0) { throw ShapeError("measurement: ambient dimension must be positive"); }
  MeasurementOperator op;
  op.kind_ = MeasurementKind::identity;
  op.n_ = n;
  return op;
}

MeasurementOperator MeasurementOperator::gaussian(std::size_t m, std::size_t n, SeededRng &rng)
{
  if (m == 0 || n == 0) { throw ShapeError("measurement: gaussian operator needs m, n > 0"); }
  return gaussian(genrec::gaussian(rng, {m, n}, std::sqrt(1.0 / double(m))));
}

MeasurementOperator MeasurementOperator::gaussian(Tensor matrix)
{
  MeasurementOperator op;
  op.kind_ = MeasurementKind::gaussian_dense;
  op.n_ = matrix.cols();
  op.matrix_ = std::move(matrix);
  return op;
}

MeasurementOperator MeasurementOperator::mask(std::size_t n, std::vector<std::size_t> kept)
{
  if (n == 0) { throw ShapeError("measurement: ambient dimension must be positive"); }
  for (std::size_t i = 0; i < kept.size(); ++i) {
    if (kept[i] >= n || (i > 0 && kept[i] <= kept[i - 1])) {
      throw RangeError("measurement: mask indices must be strictly increasing and below n");
    }
  }
  MeasurementOperator op;
  op.kind_ = MeasurementKind::pixel_mask;
  op.n_ = n;
  op.kept_ = std::move(kept);
  return op;
}

std::size_t MeasurementOperator::output_dim() const noexcept
{
  switch (kind_) {
  case MeasurementKind::identity: return n_;
  case MeasurementKind::gaussian_dense: return matrix_.shape()[0];
  case MeasurementKind::pixel_mask: return kept_.size();
  }
  return 0;
}

std::vector<double> MeasurementOperator::apply(std::span<double const> x) const
{
  if (x.size() != n_) {
    throw ShapeError("measurement apply: frame length " + std::to_string(x.size()) + ", expected " + std::to_string(n_));
  }
  switch (kind_) {
  case MeasurementKind::identity: return {x.begin(), x.end()};
  case MeasurementKind::gaussian_dense: {
    std::vector<double> y(matrix_.rows());
    gemm(matrix_.values(), matrix_.rows(), n_, false, x, n_, 1, false, y);
    return y;
  }
  case MeasurementKind::pixel_mask: {
    std::vector<double> y(kept_.size());
    for (std::size_t i = 0; i < kept_.size(); ++i) { y[i] = x[kept_[i]]; }
    return y;
  }
  }
  return {};
}

std::vector<double> MeasurementOperator::adjoint(std::span<double const> y) const
{
  if (y.size() != output_dim()) {
    throw ShapeError("measurement adjoint: length " + std::to_string(y.size()) + ", expected " +
                     std::to_string(output_dim()));
  }
  switch (kind_) {
  case MeasurementKind::identity: return {y.begin(), y.end()};
  case MeasurementKind::gaussian_dense: {
    std::vector<double> x(n_);
    gemm(matrix_.values(), matrix_.rows(), n_, true, y, y.size(), 1, false, x);
    return x;
  }
  case MeasurementKind::pixel_mask: {
    std::vector<double> x(n_, 0.0);
    for (std::size_t i = 0; i < kept_.size(); ++i) { x[kept_[i]] = y[i]; }
    return x;
  }
  }
  return {};
}

MeasurementOperator make_mask(std::size_t n, double keep_fraction, SeededRng &rng)
{
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) { throw RangeError("make_mask: keep fraction must be in (0, 1]"); }
  auto const keep = std::min(n, std::size_t(std::floor(keep_fraction * double(n) + 0.5)));
  // Partial Fisher-Yates over the index range.
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < keep; ++i) {
    std::size_t const j = i + std::size_t(rng.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(keep);
  std::sort(idx.begin(), idx.end());
  return MeasurementOperator::mask(n, std::move(idx));
}

MeasurementSet measure_sequence(std::span<Tensor const> frames, std::vector<MeasurementOperator> operators,
                                double noise_std, SeededRng &rng)
{
  if (frames.size() != operators.size()) {
    throw ShapeError("measure_sequence: " + std::to_string(frames.size()) + " frames but " +
                     std::to_string(operators.size()) + " operators");
  }
  if (!(noise_std >= 0.0)) { throw RangeError("measure_sequence: noise_std must be non-negative"); }
  MeasurementSet set;
  set.noise_std = noise_std;
  for (std::size_t t = 0; t < frames.size(); ++t) {
    auto y = operators[t].apply(frames[t].values());
    if (noise_std > 0.0) {
      for (auto &v : y) { v += noise_std * rng.normal(); }
    }
    set.measurements.push_back(std::move(y));
  }
  set.operators = std::move(operators);
  return set;
}

} // namespace genrec
