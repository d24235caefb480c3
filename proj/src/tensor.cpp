#include "genrec/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

namespace genrec {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<RowMajor const>;
using MutMap = Eigen::Map<RowMajor>;

std::string shape_string(Shape const &s)
{
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < s.size(); ++i) {
    os << (i ? "," : "") << s[i];
  }
  os << ')';
  return os.str();
}

void require_matrix(Tensor const &t, char const *what)
{
  if (t.rank() != 2) {
    throw ShapeError(std::string(what) + ": expected a matrix, got shape " + shape_string(t.shape()));
  }
}

std::uint64_t splitmix64(std::uint64_t x)
{
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

} // namespace

std::size_t shape_size(Shape const &shape)
{
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

Tensor::Tensor(Shape shape, double fill)
  : shape_{std::move(shape)}
  , data_(shape_size(shape_), fill)
{
  for (auto d : shape_) {
    if (d == 0) { throw ShapeError("tensor dimensions must be positive, got " + shape_string(shape_)); }
  }
}

Tensor::Tensor(Shape shape, std::vector<double> data)
  : shape_{std::move(shape)}
  , data_{std::move(data)}
{
  for (auto d : shape_) {
    if (d == 0) { throw ShapeError("tensor dimensions must be positive, got " + shape_string(shape_)); }
  }
  if (data_.size() != shape_size(shape_)) {
    throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " + shape_string(shape_));
  }
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, double fill) { return Tensor({rows, cols}, fill); }

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows)
{
  std::size_t const r = rows.size();
  std::size_t const c = r ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (auto const &row : rows) {
    if (row.size() != c) { throw ShapeError("ragged matrix literal"); }
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(data));
}

Tensor Tensor::vector(std::vector<double> values)
{
  auto const n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::identity(std::size_t n)
{
  Tensor t = matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) { t.at(i, i) = 1.0; }
  return t;
}

std::size_t Tensor::dim(std::size_t axis) const
{
  if (axis >= shape_.size()) { throw ShapeError("axis out of range for shape " + shape_string(shape_)); }
  return shape_[axis];
}

std::size_t Tensor::rows() const
{
  require_matrix(*this, "rows");
  return shape_[0];
}

std::size_t Tensor::cols() const
{
  require_matrix(*this, "cols");
  return shape_[1];
}

Tensor Tensor::reshaped(Shape shape) const
{
  if (shape_size(shape) != data_.size()) {
    throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

std::vector<double> Tensor::column(std::size_t c) const
{
  std::size_t const r = rows(), n = cols();
  if (c >= n) { throw ShapeError("column index out of range"); }
  std::vector<double> out(r);
  for (std::size_t i = 0; i < r; ++i) { out[i] = data_[i * n + c]; }
  return out;
}

void Tensor::set_column(std::size_t c, std::span<double const> values)
{
  std::size_t const r = rows(), n = cols();
  if (c >= n || values.size() != r) { throw ShapeError("set_column: index or length mismatch"); }
  for (std::size_t i = 0; i < r; ++i) { data_[i * n + c] = values[i]; }
}

Tensor Tensor::transposed() const
{
  std::size_t const r = rows(), c = cols();
  Tensor out = matrix(c, r);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) { out.data_[j * r + i] = data_[i * c + j]; }
  }
  return out;
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const noexcept
{
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double Tensor::norm() const noexcept { return norm2(data_); }

Tensor &Tensor::operator+=(Tensor const &other)
{
  if (other.shape_ != shape_) { throw ShapeError("elementwise add: shape mismatch"); }
  axpy(1.0, other.data_, data_);
  return *this;
}

Tensor &Tensor::operator-=(Tensor const &other)
{
  if (other.shape_ != shape_) { throw ShapeError("elementwise subtract: shape mismatch"); }
  axpy(-1.0, other.data_, data_);
  return *this;
}

Tensor &Tensor::operator*=(double s) noexcept
{
  for (auto &v : data_) { v *= s; }
  return *this;
}

Tensor operator+(Tensor a, Tensor const &b) { return a += b; }
Tensor operator-(Tensor a, Tensor const &b) { return a -= b; }
Tensor operator*(double s, Tensor a) { return a *= s; }

void axpy(double s, std::span<double const> x, std::span<double> y)
{
  if (x.size() != y.size()) { throw ShapeError("axpy: length mismatch"); }
  for (std::size_t i = 0; i < x.size(); ++i) { y[i] += s * x[i]; }
}

double dot(std::span<double const> a, std::span<double const> b)
{
  if (a.size() != b.size()) { throw ShapeError("dot: length mismatch"); }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) { acc += a[i] * b[i]; }
  return acc;
}

double norm2(std::span<double const> a) { return std::sqrt(dot(a, a)); }

void gemm(std::span<double const> a, std::size_t a_rows, std::size_t a_cols, bool trans_a,
          std::span<double const> b, std::size_t b_rows, std::size_t b_cols, bool trans_b,
          std::span<double> c, bool accumulate)
{
  std::size_t const m = trans_a ? a_cols : a_rows;
  std::size_t const ka = trans_a ? a_rows : a_cols;
  std::size_t const kb = trans_b ? b_cols : b_rows;
  std::size_t const n = trans_b ? b_rows : b_cols;
  if (ka != kb || a.size() != a_rows * a_cols || b.size() != b_rows * b_cols || c.size() != m * n) {
    throw ShapeError("gemm: inner or buffer dimensions disagree");
  }
  ConstMap const A(a.data(), Eigen::Index(a_rows), Eigen::Index(a_cols));
  ConstMap const B(b.data(), Eigen::Index(b_rows), Eigen::Index(b_cols));
  MutMap C(c.data(), Eigen::Index(m), Eigen::Index(n));
  if (!accumulate) { C.setZero(); }
  if (trans_a && trans_b) {
    C.noalias() += A.transpose() * B.transpose();
  } else if (trans_a) {
    C.noalias() += A.transpose() * B;
  } else if (trans_b) {
    C.noalias() += A * B.transpose();
  } else {
    C.noalias() += A * B;
  }
}

Tensor matmul(Tensor const &a, Tensor const &b)
{
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  }
  Tensor c = Tensor::matrix(a.rows(), b.cols());
  gemm(a.values(), a.rows(), a.cols(), false, b.values(), b.rows(), b.cols(), false, c.values());
  return c;
}

Tensor matmul_tn(Tensor const &a, Tensor const &b)
{
  require_matrix(a, "matmul_tn");
  require_matrix(b, "matmul_tn");
  if (a.rows() != b.rows()) {
    throw ShapeError("matmul_tn: " + shape_string(a.shape()) + "ᵀ x " + shape_string(b.shape()));
  }
  Tensor c = Tensor::matrix(a.cols(), b.cols());
  gemm(a.values(), a.rows(), a.cols(), true, b.values(), b.rows(), b.cols(), false, c.values());
  return c;
}

Tensor matmul_nt(Tensor const &a, Tensor const &b)
{
  require_matrix(a, "matmul_nt");
  require_matrix(b, "matmul_nt");
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt: " + shape_string(a.shape()) + " x " + shape_string(b.shape()) + "ᵀ");
  }
  Tensor c = Tensor::matrix(a.rows(), b.rows());
  gemm(a.values(), a.rows(), a.cols(), false, b.values(), b.rows(), b.cols(), true, c.values());
  return c;
}

SeededRng::SeededRng(std::uint64_t seed)
  : seed_{seed}
  , engine_{seed}
{
}

std::uint64_t SeededRng::next_u64() { return engine_(); }

double SeededRng::uniform() { return double(engine_() >> 11) * 0x1.0p-53; }

double SeededRng::normal()
{
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double const u1 = 1.0 - uniform(); // (0, 1]
  double const u2 = uniform();
  double const r = std::sqrt(-2.0 * std::log(u1));
  double const theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::uint64_t SeededRng::below(std::uint64_t n)
{
  if (n == 0) { throw RangeError("SeededRng::below: n must be positive"); }
  std::uint64_t const threshold = (0 - n) % n;
  std::uint64_t x = engine_();
  while (x < threshold) { x = engine_(); }
  return x % n;
}

SeededRng SeededRng::split(std::uint64_t stream) const
{
  return SeededRng(splitmix64(seed_ ^ splitmix64(stream + 0x632BE59BD9B4E019ULL)));
}

Tensor gaussian(SeededRng &rng, Shape shape, double stddev)
{
  if (!(stddev > 0.0) || !std::isfinite(stddev)) { throw RangeError("gaussian: stddev must be positive"); }
  Tensor t(std::move(shape));
  for (auto &v : t.values()) { v = stddev * rng.normal(); }
  return t;
}

Tensor SvdResult::reconstruct() const { return reconstruct(singular_values.size()); }

Tensor SvdResult::reconstruct(std::size_t r) const
{
  std::size_t const k = left.rows(), t = right.rows(), p = singular_values.size();
  if (r > p) { throw RangeError("reconstruct: rank exceeds available triplets"); }
  Tensor out = Tensor::matrix(k, t);
  for (std::size_t j = 0; j < r; ++j) {
    double const s = singular_values[j];
    for (std::size_t i = 0; i < k; ++i) {
      double const us = left.at(i, j) * s;
      for (std::size_t c = 0; c < t; ++c) { out.at(i, c) += us * right.at(c, j); }
    }
  }
  return out;
}

namespace {

using Columns = std::vector<std::vector<double>>;

// Completes cols[j] for every j flagged in `missing` to an orthonormal set with the others.
void complete_orthonormal(Columns &cols, std::vector<bool> const &missing)
{
  std::size_t const len = cols.empty() ? 0 : cols[0].size();
  for (std::size_t j = 0; j < cols.size(); ++j) {
    if (!missing[j]) { continue; }
    std::vector<double> best;
    double best_norm = -1.0;
    for (std::size_t e = 0; e < len; ++e) {
      std::vector<double> v(len, 0.0);
      v[e] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t o = 0; o < cols.size(); ++o) {
          if (o == j || (missing[o] && o > j)) { continue; }
          axpy(-dot(cols[o], v), cols[o], v);
        }
      }
      double const nv = norm2(v);
      if (nv > best_norm + 1e-12) {
        best_norm = nv;
        best = std::move(v);
      }
    }
    for (auto &x : best) { x /= best_norm; }
    cols[j] = std::move(best);
  }
}

} // namespace

SvdResult svd_thin(Tensor const &m, SvdOptions const &opts)
{
  require_matrix(m, "svd_thin");
  if (!m.all_finite()) { throw NumericError("svd_thin: non-finite input"); }

  bool const transpose = m.rows() < m.cols();
  Tensor const a = transpose ? m.transposed() : m;
  std::size_t const rows = a.rows(), n = a.cols();

  Columns cols(n, std::vector<double>(rows));
  Columns v(n, std::vector<double>(n, 0.0));
  for (std::size_t j = 0; j < n; ++j) {
    cols[j] = a.column(j);
    v[j][j] = 1.0;
  }

  auto rotate = [](std::vector<double> &x, std::vector<double> &y, double c, double s) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      double const xi = x[i], yi = y[i];
      x[i] = c * xi - s * yi;
      y[i] = s * xi + c * yi;
    }
  };

  std::size_t sweep = 0;
  bool converged = n < 2;
  while (!converged) {
    if (sweep == opts.max_sweeps) {
      throw ConvergenceError("svd_thin: no convergence after " + std::to_string(opts.max_sweeps) + " sweeps");
    }
    ++sweep;
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double const alpha = dot(cols[p], cols[p]);
        double const beta = dot(cols[q], cols[q]);
        double const gamma = dot(cols[p], cols[q]);
        if (alpha == 0.0 || beta == 0.0 || std::abs(gamma) <= opts.tolerance * std::sqrt(alpha * beta)) {
          continue;
        }
        rotated = true;
        double const zeta = (beta - alpha) / (2.0 * gamma);
        double const t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        double const c = 1.0 / std::sqrt(1.0 + t * t);
        double const s = c * t;
        rotate(cols[p], cols[q], c, s);
        rotate(v[p], v[q], c, s);
      }
    }
    converged = !rotated;
  }

  std::vector<double> sigma(n);
  for (std::size_t j = 0; j < n; ++j) { sigma[j] = norm2(cols[j]); }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

  Columns u_sorted(n), v_sorted(n);
  std::vector<double> s_sorted(n);
  std::vector<bool> missing(n, false);
  for (std::size_t j = 0; j < n; ++j) {
    std::size_t const src = order[j];
    s_sorted[j] = sigma[src];
    v_sorted[j] = v[src];
    u_sorted[j] = cols[src];
    if (sigma[src] > 0.0) {
      for (auto &x : u_sorted[j]) { x /= sigma[src]; }
    } else {
      missing[j] = true;
    }
  }
  complete_orthonormal(u_sorted, missing);

  // Sign convention on the k-side (left) vectors.
  Columns &left_cols = transpose ? v_sorted : u_sorted;
  Columns &right_cols = transpose ? u_sorted : v_sorted;
  for (std::size_t j = 0; j < n; ++j) {
    double peak = 0.0;
    for (double x : left_cols[j]) { peak = std::max(peak, std::abs(x)); }
    for (double x : left_cols[j]) {
      if (std::abs(x) > 1e-12 * peak) {
        if (x < 0.0) {
          for (auto &y : left_cols[j]) { y = -y; }
          for (auto &y : right_cols[j]) { y = -y; }
        }
        break;
      }
    }
  }

  SvdResult out;
  out.sweeps = sweep;
  out.singular_values = std::move(s_sorted);
  out.left = Tensor::matrix(left_cols[0].size(), n);
  out.right = Tensor::matrix(right_cols[0].size(), n);
  for (std::size_t j = 0; j < n; ++j) {
    out.left.set_column(j, left_cols[j]);
    out.right.set_column(j, right_cols[j]);
  }
  return out;
}

} // namespace genrec
