// SPDX-License-Identifier: Apache-2.0

#include "mivc/numkern.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace mivc {

const char* to_string(LoadErrorKind kind) {
  switch (kind) {
    case LoadErrorKind::kMissingFile: return "missing_file";
    case LoadErrorKind::kBadMagic: return "bad_magic";
    case LoadErrorKind::kBadVersion: return "bad_version";
    case LoadErrorKind::kTruncated: return "truncated";
    case LoadErrorKind::kCountMismatch: return "count_mismatch";
    case LoadErrorKind::kShapeMismatch: return "shape_mismatch";
    case LoadErrorKind::kNonFinite: return "non_finite";
    case LoadErrorKind::kParse: return "parse";
    case LoadErrorKind::kValidation: return "validation";
  }
  return "unknown";
}

Vector::Vector(std::size_t n, double fill) : data_(n, fill) {
  if (n == 0) throw ShapeError("vector length must be positive");
}

Vector::Vector(std::vector<double> data) : data_(std::move(data)) {
  if (data_.empty()) throw ShapeError("vector length must be positive");
}

Vector::Vector(std::initializer_list<double> init) : data_(init) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
  if (rows == 0 || cols == 0) {
    throw ShapeError("matrix dimensions must be positive, got " + shape_string(*this));
  }
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (rows == 0 || cols == 0) {
    throw ShapeError("matrix dimensions must be positive, got " + shape_string(*this));
  }
  if (data_.size() != rows * cols) {
    throw ShapeError("matrix " + shape_string(*this) + " given " +
                     std::to_string(data_.size()) + " values");
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() ? rows.begin()->size() : 0) {
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ShapeError("ragged matrix initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

std::string shape_string(const Matrix& m) {
  std::ostringstream os;
  os << '(' << m.rows() << 'x' << m.cols() << ')';
  return os.str();
}

std::string shape_string(std::span<const double> v) {
  return "(" + std::to_string(v.size()) + ")";
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  // 1 - u lies in (0, 1], so the log is finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw UsageError("Rng::below requires n > 0");
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return x % n;
}

std::int64_t Rng::between(std::int64_t lo, std::int64_t hi) {
  if (hi < lo) throw UsageError("Rng::between requires lo <= hi");
  return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo) + 1));
}

namespace {

void require_same_length(std::span<const double> a, std::span<const double> b, const char* op) {
  if (a.size() != b.size()) {
    throw ShapeError(std::string(op) + ": length mismatch " + shape_string(a) + " vs " +
                     shape_string(b));
  }
}

template <typename F>
Vector map(std::span<const double> v, F f) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = f(v[i]);
  return Vector(std::move(out));
}

}  // namespace

Vector matvec(const Matrix& m, std::span<const double> v) {
  if (m.cols() != v.size()) {
    throw ShapeError("matvec: matrix " + shape_string(m) + " vs vector " + shape_string(v));
  }
  std::vector<double> out(m.rows(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto r = m.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j) acc += r[j] * v[j];
    out[i] = acc;
  }
  return Vector(std::move(out));
}

Vector matvec_transposed(const Matrix& m, std::span<const double> v) {
  if (m.rows() != v.size()) {
    throw ShapeError("matvec_transposed: matrix " + shape_string(m) + " vs vector " +
                     shape_string(v));
  }
  std::vector<double> out(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto r = m.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) out[j] += r[j] * v[i];
  }
  return Vector(std::move(out));
}

double dot(std::span<const double> a, std::span<const double> b) {
  require_same_length(a, b, "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

Vector softmax_stable(std::span<const double> v) {
  if (v.empty()) throw ShapeError("softmax_stable: empty input");
  const double hi = *std::max_element(v.begin(), v.end());
  std::vector<double> out(v.size());
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - hi);
    total += out[i];
  }
  for (double& x : out) x /= total;
  return Vector(std::move(out));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Vector tanh_vec(std::span<const double> v) {
  return map(v, [](double x) { return std::tanh(x); });
}

Vector sigm_vec(std::span<const double> v) { return map(v, sigmoid); }

Vector relu_vec(std::span<const double> v) {
  return map(v, [](double x) { return x > 0.0 ? x : 0.0; });
}

Vector hadamard(std::span<const double> a, std::span<const double> b) {
  require_same_length(a, b, "hadamard");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return Vector(std::move(out));
}

Vector add(std::span<const double> a, std::span<const double> b) {
  require_same_length(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return Vector(std::move(out));
}

Vector scaled(std::span<const double> v, double s) {
  return map(v, [s](double x) { return s * x; });
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  require_same_length(x, y, "axpy");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

void add_outer(double a, std::span<const double> u, std::span<const double> v, Matrix& m) {
  if (m.rows() != u.size() || m.cols() != v.size()) {
    throw ShapeError("add_outer: matrix " + shape_string(m) + " vs outer " + shape_string(u) +
                     shape_string(v));
  }
  for (std::size_t i = 0; i < u.size(); ++i) {
    auto r = m.row(i);
    const double s = a * u[i];
    for (std::size_t j = 0; j < v.size(); ++j) r[j] += s * v[j];
  }
}

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace mivc
