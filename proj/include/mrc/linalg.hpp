// linalg.hpp
//
// Small dense linear algebra: row-major matrix, LU solve with partial
// pivoting (power-flow Jacobians), Householder QR (least squares).
// Desk-scale sizes only; no blocking, no BLAS.

#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace mrc {

class Mat {
 public:
  Mat() = default;
  Mat(int rows, int cols, double fill = 0.0)
      : r_(rows), c_(cols), a_(static_cast<std::size_t>(rows) * cols, fill) {}

  int rows() const { return r_; }
  int cols() const { return c_; }
  double& operator()(int i, int j) { return a_[static_cast<std::size_t>(i) * c_ + j]; }
  double operator()(int i, int j) const { return a_[static_cast<std::size_t>(i) * c_ + j]; }
  double* row(int i) { return a_.data() + static_cast<std::size_t>(i) * c_; }
  const double* row(int i) const { return a_.data() + static_cast<std::size_t>(i) * c_; }
  std::vector<double>& data() { return a_; }
  const std::vector<double>& data() const { return a_; }

 private:
  int r_ = 0, c_ = 0;
  std::vector<double> a_;
};

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm_inf(const std::vector<double>& a) {
  double s = 0.0;
  for (double v : a) s = std::max(s, std::abs(v));
  return s;
}

// Solve A x = b in place via LU with partial pivoting. Throws on a
// numerically singular pivot.
inline std::vector<double> lu_solve(Mat a, std::vector<double> b) {
  const int n = a.rows();
  if (a.cols() != n || static_cast<int>(b.size()) != n)
    throw std::invalid_argument("lu_solve: dimension mismatch");
  std::vector<int> piv(n);
  for (int k = 0; k < n; ++k) {
    int p = k;
    double best = std::abs(a(k, k));
    for (int i = k + 1; i < n; ++i) {
      const double v = std::abs(a(i, k));
      if (v > best) { best = v; p = i; }
    }
    if (best < 1e-13) throw std::runtime_error("lu_solve: singular matrix at pivot " + std::to_string(k));
    piv[k] = p;
    if (p != k) {
      for (int j = 0; j < n; ++j) std::swap(a(k, j), a(p, j));
      std::swap(b[k], b[p]);
    }
    const double inv = 1.0 / a(k, k);
    for (int i = k + 1; i < n; ++i) {
      const double f = a(i, k) * inv;
      if (f == 0.0) continue;
      a(i, k) = f;
      const double* rk = a.row(k);
      double* ri = a.row(i);
      for (int j = k + 1; j < n; ++j) ri[j] -= f * rk[j];
      b[i] -= f * b[k];
    }
  }
  for (int i = n - 1; i >= 0; --i) {
    double s = b[i];
    const double* ri = a.row(i);
    for (int j = i + 1; j < n; ++j) s -= ri[j] * b[j];
    b[i] = s / a(i, i);
  }
  return b;
}

// Householder QR of an m x n matrix (m >= n). Factors stored compactly;
// used for least squares and for (R^T R)^-1 style solves.
class QR {
 public:
  explicit QR(Mat a) : qr_(std::move(a)), tau_(qr_.cols()) {
    const int m = qr_.rows(), n = qr_.cols();
    if (m < n) throw std::invalid_argument("QR: need rows >= cols");
    for (int k = 0; k < n; ++k) {
      double nrm = 0.0;
      for (int i = k; i < m; ++i) nrm = std::hypot(nrm, qr_(i, k));
      if (nrm == 0.0) { tau_[k] = 0.0; continue; }
      if (qr_(k, k) < 0.0) nrm = -nrm;
      for (int i = k; i < m; ++i) qr_(i, k) /= nrm;
      qr_(k, k) += 1.0;
      for (int j = k + 1; j < n; ++j) {
        double s = 0.0;
        for (int i = k; i < m; ++i) s += qr_(i, k) * qr_(i, j);
        s = -s / qr_(k, k);
        for (int i = k; i < m; ++i) qr_(i, j) += s * qr_(i, k);
      }
      tau_[k] = -nrm;  // diagonal of R
    }
  }

  // |R_kk| relative to the largest: rank detection for the OLS contract
  std::vector<int> deficient_columns(double rtol = 1e-10) const {
    double dmax = 0.0;
    for (double d : tau_) dmax = std::max(dmax, std::abs(d));
    std::vector<int> bad;
    for (int k = 0; k < qr_.cols(); ++k)
      if (std::abs(tau_[k]) <= rtol * std::max(dmax, 1e-300)) bad.push_back(k);
    return bad;
  }

  // least-squares solution of min ||A x - b||_2
  std::vector<double> solve(std::vector<double> b) const {
    const int m = qr_.rows(), n = qr_.cols();
    if (static_cast<int>(b.size()) != m) throw std::invalid_argument("QR::solve: dimension mismatch");
    for (int k = 0; k < n; ++k) {
      if (qr_(k, k) == 0.0 && tau_[k] == 0.0) continue;
      double s = 0.0;
      for (int i = k; i < m; ++i) s += qr_(i, k) * b[i];
      s = -s / qr_(k, k);
      for (int i = k; i < m; ++i) b[i] += s * qr_(i, k);
    }
    std::vector<double> x(n);
    for (int i = n - 1; i >= 0; --i) {
      double s = b[i];
      for (int j = i + 1; j < n; ++j) s -= qr_(i, j) * x[j];
      if (std::abs(tau_[i]) < 1e-300) throw std::runtime_error("QR::solve: rank deficient");
      x[i] = s / tau_[i];
    }
    return x;
  }

  // solve R^T R x = e_k, i.e. (A^T A)^-1 e_k; used for budget-ball radii
  std::vector<double> normal_solve_unit(int k) const {
    const int n = qr_.cols();
    std::vector<double> y(n, 0.0);
    // R^T y = e_k  (forward)
    for (int i = 0; i < n; ++i) {
      double s = (i == k) ? 1.0 : 0.0;
      for (int j = 0; j < i; ++j) s -= qr_(j, i) * y[j];
      if (std::abs(tau_[i]) < 1e-300) throw std::runtime_error("QR: rank deficient");
      y[i] = s / tau_[i];
    }
    // R x = y  (backward)
    std::vector<double> x(n);
    for (int i = n - 1; i >= 0; --i) {
      double s = y[i];
      for (int j = i + 1; j < n; ++j) s -= qr_(i, j) * x[j];
      x[i] = s / tau_[i];
    }
    return x;
  }

 private:
  Mat qr_;
  std::vector<double> tau_;
};

}  // namespace mrc
