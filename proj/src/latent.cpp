#include "genrec/latent.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

namespace genrec {

namespace {

void check_latent(LatentMatrix const &z, char const *what)
{
  if (z.rank() != 2) { throw ShapeError(std::string(what) + ": latent matrix must be k × T"); }
  if (!z.all_finite()) { throw NumericError(std::string(what) + ": non-finite latent code"); }
}

std::vector<double> column_mean(LatentMatrix const &z)
{
  std::size_t const k = z.rows(), t = z.cols();
  std::vector<double> mean(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < t; ++c) { acc += z.at(i, c); }
    mean[i] = acc / double(t);
  }
  return mean;
}

// Basis from the leading d triplets of an SVD, offset by `mean`.
LatentBasis basis_from_svd(SvdResult const &svd, std::size_t d, std::vector<double> mean)
{
  LatentBasis b;
  b.mean = std::move(mean);
  b.frames = svd.right.rows();
  for (std::size_t j = 0; j < d; ++j) {
    b.directions.push_back(svd.left.column(j));
    auto alpha = svd.right.column(j);
    for (auto &a : alpha) { a *= svd.singular_values[j]; }
    b.coefficients.push_back(std::move(alpha));
  }
  return b;
}

} // namespace

std::vector<double> LatentBasis::code(std::size_t t) const
{
  if (t >= frames) { throw RangeError("LatentBasis::code: frame index out of range"); }
  std::vector<double> z = mean;
  for (std::size_t j = 0; j < directions.size(); ++j) { axpy(coefficients[j][t], directions[j], z); }
  return z;
}

LatentMatrix LatentBasis::reconstruct() const
{
  LatentMatrix z = Tensor::matrix(mean.size(), frames);
  for (std::size_t t = 0; t < frames; ++t) { z.set_column(t, code(t)); }
  return z;
}

bool LatentBasis::order_preserved() const
{
  if (coefficients.empty() || frames < 3) { return true; }
  auto const &a = coefficients.front();
  bool up = true, down = true;
  for (std::size_t t = 1; t < a.size(); ++t) {
    up = up && a[t] >= a[t - 1];
    down = down && a[t] <= a[t - 1];
  }
  return up || down;
}

Projection project_rank(LatentMatrix const &z, std::size_t r)
{
  check_latent(z, "project_rank");
  std::size_t const p = std::min(z.rows(), z.cols());
  if (r < 1 || r > p) {
    throw RangeError("project_rank: rank " + std::to_string(r) + " outside [1, " + std::to_string(p) + "]");
  }
  auto const svd = svd_thin(z);
  Projection out;
  out.codes = svd.reconstruct(r);
  out.basis = basis_from_svd(svd, r, std::vector<double>(z.rows(), 0.0));
  return out;
}

Projection project_affine(LatentMatrix const &z, std::size_t d)
{
  check_latent(z, "project_affine");
  std::size_t const k = z.rows(), t = z.cols();
  std::size_t const dmax = std::min(k, t - 1);
  if (d > dmax) {
    throw RangeError("project_affine: dimension " + std::to_string(d) + " outside [0, " + std::to_string(dmax) + "]");
  }
  auto mean = column_mean(z);
  Projection out;
  if (d == 0) {
    out.basis.mean = mean;
    out.basis.frames = t;
  } else {
    LatentMatrix centred = z;
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t c = 0; c < t; ++c) { centred.at(i, c) -= mean[i]; }
    }
    out.basis = basis_from_svd(svd_thin(centred), d, std::move(mean));
  }
  out.codes = out.basis.reconstruct();
  return out;
}

LatentMatrix project_affine_grouped(LatentMatrix const &z, std::span<std::size_t const> group_starts,
                                    std::size_t d_global, std::size_t d_per_group)
{
  check_latent(z, "project_affine_grouped");
  std::size_t const t = z.cols();
  if (group_starts.empty() || group_starts.front() != 0) {
    throw ContractError("project_affine_grouped: groups must start at column 0");
  }
  for (std::size_t g = 1; g < group_starts.size(); ++g) {
    if (group_starts[g] <= group_starts[g - 1]) {
      throw ContractError("project_affine_grouped: group starts must be strictly increasing");
    }
  }
  if (group_starts.back() >= t) { throw ContractError("project_affine_grouped: group start beyond last column"); }

  LatentMatrix out = project_rank(z, d_global).codes;
  std::size_t const k = z.rows();
  for (std::size_t g = 0; g < group_starts.size(); ++g) {
    std::size_t const begin = group_starts[g];
    std::size_t const end = g + 1 < group_starts.size() ? group_starts[g + 1] : t;
    LatentMatrix block = Tensor::matrix(k, end - begin);
    for (std::size_t c = begin; c < end; ++c) { block.set_column(c - begin, out.column(c)); }
    auto const projected = project_affine(block, d_per_group).codes;
    for (std::size_t c = begin; c < end; ++c) { out.set_column(c, projected.column(c - begin)); }
  }
  return out;
}

Interpolated interpolate(std::span<double const> z_a, std::span<double const> z_b, double s, InterpolationMode mode)
{
  if (z_a.size() != z_b.size()) { throw ShapeError("interpolate: codes differ in length"); }
  if (!std::isfinite(s)) { throw RangeError("interpolate: non-finite position"); }
  Interpolated r;
  r.extrapolated = s < 0.0 || s > 1.0;
  if (r.extrapolated && mode == InterpolationMode::strict) {
    throw RangeError("interpolate: position " + std::to_string(s) + " outside [0, 1]");
  }
  r.code.resize(z_a.size());
  for (std::size_t i = 0; i < z_a.size(); ++i) { r.code[i] = (1.0 - s) * z_a[i] + s * z_b[i]; }
  return r;
}

double max_line_distance(LatentMatrix const &z)
{
  check_latent(z, "max_line_distance");
  if (z.cols() < 2) { return 0.0; }
  auto const fit = project_affine(z, 1).codes;
  double worst = 0.0;
  for (std::size_t c = 0; c < z.cols(); ++c) {
    double acc = 0.0;
    for (std::size_t i = 0; i < z.rows(); ++i) {
      double const d = z.at(i, c) - fit.at(i, c);
      acc += d * d;
    }
    worst = std::max(worst, std::sqrt(acc));
  }
  return worst;
}

void write_basis_csv(std::ostream &os, LatentBasis const &basis)
{
  std::size_t const width = std::max(basis.mean.size(), basis.frames);
  os << "kind,index";
  for (std::size_t i = 0; i < width; ++i) { os << ",c" << i; }
  os << '\n';
  auto row = [&](char const *kind, std::size_t index, std::vector<double> const &values) {
    os << kind << ',' << index;
    for (double v : values) { os << ',' << std::setprecision(17) << v; }
    for (std::size_t i = values.size(); i < width; ++i) { os << ','; }
    os << '\n';
  };
  row("mean", 0, basis.mean);
  for (std::size_t j = 0; j < basis.directions.size(); ++j) { row("direction", j, basis.directions[j]); }
  for (std::size_t j = 0; j < basis.coefficients.size(); ++j) { row("coefficient", j, basis.coefficients[j]); }
}

LatentBasis read_basis_csv(std::istream &is)
{
  std::string line;
  if (!std::getline(is, line) || line.rfind("kind,index", 0) != 0) {
    throw IoError("latent basis csv: missing header row");
  }
  LatentBasis b;
  bool have_mean = false;
  while (std::getline(is, line)) {
    if (line.empty()) { continue; }
    std::stringstream ss(line);
    std::string kind, index, field;
    std::getline(ss, kind, ',');
    std::getline(ss, index, ',');
    std::vector<double> values;
    while (std::getline(ss, field, ',')) {
      if (field.empty()) { continue; }
      try {
        values.push_back(std::stod(field));
      } catch (std::exception const &) {
        throw IoError("latent basis csv: bad number '" + field + "'");
      }
    }
    if (kind == "mean") {
      b.mean = std::move(values);
      have_mean = true;
    } else if (kind == "direction") {
      b.directions.push_back(std::move(values));
    } else if (kind == "coefficient") {
      b.frames = values.size();
      b.coefficients.push_back(std::move(values));
    } else {
      throw IoError("latent basis csv: unknown row kind '" + kind + "'");
    }
  }
  if (!have_mean || b.directions.size() != b.coefficients.size()) {
    throw IoError("latent basis csv: incomplete basis");
  }
  for (auto const &d : b.directions) {
    if (d.size() != b.mean.size()) { throw IoError("latent basis csv: direction length mismatch"); }
  }
  for (auto const &c : b.coefficients) {
    if (c.size() != b.frames) { throw IoError("latent basis csv: coefficient length mismatch"); }
  }
  return b;
}

} // namespace genrec
