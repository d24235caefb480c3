#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "genrec/tensor.hpp"

namespace genrec {

double mse(std::span<double const> x, std::span<double const> x_hat);

/// 20·log10((max(x) - min(x)) / sqrt(MSE)), with the dynamic range taken from the reference x.
/// Returns +inf for an exact match and -inf when x is constant but x_hat differs.
double psnr(std::span<double const> x, std::span<double const> x_hat);

inline double mse(Tensor const &x, Tensor const &x_hat) { return mse(x.values(), x_hat.values()); }
double psnr(Tensor const &x, Tensor const &x_hat);

struct MetricsReport {
  std::vector<double> mse;
  std::vector<double> psnr;
  double mean_psnr = 0.0;
  /// Frames whose reference had zero dynamic range with a nonzero error.
  std::vector<std::size_t> degenerate;
};

MetricsReport evaluate(std::span<Tensor const> reference, std::span<Tensor const> estimate);

/// "frame_index,mse,psnr" header plus one row per frame.
void write_metrics_csv(std::ostream &os, MetricsReport const &report);

} // namespace genrec
