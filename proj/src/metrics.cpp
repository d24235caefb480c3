#include "genrec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

namespace genrec {

double mse(std::span<double const> x, std::span<double const> x_hat)
{
  if (x.size() != x_hat.size() || x.empty()) { throw ShapeError("mse: inputs differ in length or are empty"); }
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double const d = x[i] - x_hat[i];
    acc += d * d;
  }
  return acc / double(x.size());
}

double psnr(std::span<double const> x, std::span<double const> x_hat)
{
  double const err = mse(x, x_hat);
  if (err == 0.0) { return std::numeric_limits<double>::infinity(); }
  auto const [lo, hi] = std::minmax_element(x.begin(), x.end());
  double const range = *hi - *lo;
  if (range == 0.0) { return -std::numeric_limits<double>::infinity(); }
  return 20.0 * std::log10(range / std::sqrt(err));
}

double psnr(Tensor const &x, Tensor const &x_hat)
{
  if (x.shape() != x_hat.shape()) { throw ShapeError("psnr: shape mismatch"); }
  return psnr(x.values(), x_hat.values());
}

MetricsReport evaluate(std::span<Tensor const> reference, std::span<Tensor const> estimate)
{
  if (reference.size() != estimate.size()) { throw ShapeError("evaluate: frame counts differ"); }
  MetricsReport r;
  double acc = 0.0;
  for (std::size_t t = 0; t < reference.size(); ++t) {
    if (reference[t].shape() != estimate[t].shape()) { throw ShapeError("evaluate: frame shape mismatch"); }
    r.mse.push_back(mse(reference[t], estimate[t]));
    double const p = psnr(reference[t], estimate[t]);
    if (p == -std::numeric_limits<double>::infinity()) { r.degenerate.push_back(t); }
    r.psnr.push_back(p);
    acc += p;
  }
  r.mean_psnr = reference.empty() ? 0.0 : acc / double(reference.size());
  return r;
}

void write_metrics_csv(std::ostream &os, MetricsReport const &report)
{
  os << "frame_index,mse,psnr\n";
  for (std::size_t t = 0; t < report.mse.size(); ++t) {
    os << t << ',' << std::setprecision(17) << report.mse[t] << ',' << report.psnr[t] << '\n';
  }
}

} // namespace genrec
