#pragma once

// Dense complex linear algebra: row-major matrix, blocked LU with partial
// pivoting, power-iteration norm estimate, small Jacobi solvers for checks.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "hsm/complex_special.hpp"

namespace hsm {

class SingularMatrixError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using ComplexVector = std::vector<Complex>;

/// Row-major dense complex matrix.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  Complex& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  const Complex& operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  Complex* row(std::size_t i) { return data_.data() + i * cols_; }
  const Complex* row(std::size_t i) const { return data_.data() + i * cols_; }
  std::vector<Complex>& data() { return data_; }
  const std::vector<Complex>& data() const { return data_; }

  bool all_finite() const {
    for (const Complex& v : data_)
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
    return true;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Complex> data_;
};

inline ComplexVector matvec(const DenseMatrix& a, const ComplexVector& x) {
  if (x.size() != a.cols()) throw std::invalid_argument("matvec: dimension mismatch");
  ComplexVector y(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const Complex* r = a.row(i);
    Complex acc{0.0, 0.0};
    for (std::size_t j = 0; j < a.cols(); ++j) acc += r[j] * x[j];
    y[i] = acc;
  }
  return y;
}

/// y = A^H x
inline ComplexVector matvec_adjoint(const DenseMatrix& a, const ComplexVector& x) {
  if (x.size() != a.rows()) throw std::invalid_argument("matvec_adjoint: dimension mismatch");
  ComplexVector y(a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const Complex* r = a.row(i);
    const Complex xi = x[i];
    for (std::size_t j = 0; j < a.cols(); ++j) y[j] += std::conj(r[j]) * xi;
  }
  return y;
}

inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: dimension mismatch");
  DenseMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    Complex* ci = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const Complex aik = a(i, k);
      if (aik == Complex(0.0, 0.0)) continue;
      const Complex* bk = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aik * bk[j];
    }
  }
  return c;
}

inline double norm2(const ComplexVector& x) {
  double s = 0.0;
  for (const Complex& v : x) s += std::norm(v);
  return std::sqrt(s);
}

/// ||Ax - b|| / ||b|| (or ||Ax - b|| when b = 0).
inline double relative_residual(const DenseMatrix& a, const ComplexVector& x, const ComplexVector& b) {
  ComplexVector r = matvec(a, x);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= b[i];
  const double nb = norm2(b);
  return nb > 0.0 ? norm2(r) / nb : norm2(r);
}

namespace linalg_detail {

// c[0..len) -= sum_k l[k] * u_k[0..len), complex data viewed as interleaved doubles.
inline void axpy_block(double* __restrict c, const double* const* u, const Complex* l, int nk,
                       std::size_t len) {
  int k = 0;
  for (; k + 4 <= nk; k += 4) {
    const double r0 = l[k].real(), i0 = l[k].imag();
    const double r1 = l[k + 1].real(), i1 = l[k + 1].imag();
    const double r2 = l[k + 2].real(), i2 = l[k + 2].imag();
    const double r3 = l[k + 3].real(), i3 = l[k + 3].imag();
    const double* __restrict u0 = u[k];
    const double* __restrict u1 = u[k + 1];
    const double* __restrict u2 = u[k + 2];
    const double* __restrict u3 = u[k + 3];
    for (std::size_t j = 0; j < 2 * len; j += 2) {
      const double re = r0 * u0[j] - i0 * u0[j + 1] + r1 * u1[j] - i1 * u1[j + 1] + r2 * u2[j] -
                        i2 * u2[j + 1] + r3 * u3[j] - i3 * u3[j + 1];
      const double im = r0 * u0[j + 1] + i0 * u0[j] + r1 * u1[j + 1] + i1 * u1[j] + r2 * u2[j + 1] +
                        i2 * u2[j] + r3 * u3[j + 1] + i3 * u3[j];
      c[j] -= re;
      c[j + 1] -= im;
    }
  }
  for (; k < nk; ++k) {
    const double r0 = l[k].real(), i0 = l[k].imag();
    const double* __restrict u0 = u[k];
    for (std::size_t j = 0; j < 2 * len; j += 2) {
      c[j] -= r0 * u0[j] - i0 * u0[j + 1];
      c[j + 1] -= r0 * u0[j + 1] + i0 * u0[j];
    }
  }
}

}  // namespace linalg_detail

/// In-place LU factorization PA = LU with partial pivoting (unit lower L).
///
/// Right-looking, blocked by `block` columns; the trailing update is the
/// only O(n^3) part and runs over column strips that stay in cache.
class LuFactorization {
 public:
  LuFactorization() = default;
  explicit LuFactorization(DenseMatrix a, int block = 48) : lu_(std::move(a)) { factor(block); }

  std::size_t size() const { return lu_.rows(); }
  const std::vector<std::size_t>& pivots() const { return piv_; }
  const DenseMatrix& packed() const { return lu_; }

  ComplexVector solve(const ComplexVector& b) const {
    const std::size_t n = lu_.rows();
    if (b.size() != n) throw std::invalid_argument("lu solve: dimension mismatch");
    ComplexVector x = b;
    for (std::size_t i = 0; i < n; ++i)
      if (piv_[i] != i) std::swap(x[i], x[piv_[i]]);
    for (std::size_t i = 0; i < n; ++i) {
      const Complex* r = lu_.row(i);
      Complex acc = x[i];
      for (std::size_t j = 0; j < i; ++j) acc -= r[j] * x[j];
      x[i] = acc;
    }
    for (std::size_t ii = n; ii-- > 0;) {
      const Complex* r = lu_.row(ii);
      Complex acc = x[ii];
      for (std::size_t j = ii + 1; j < n; ++j) acc -= r[j] * x[j];
      x[ii] = acc / r[ii];
    }
    return x;
  }

  /// Solve for each column of B.
  DenseMatrix solve(const DenseMatrix& b) const {
    DenseMatrix x(b.rows(), b.cols());
    ComplexVector col(b.rows());
    for (std::size_t j = 0; j < b.cols(); ++j) {
      for (std::size_t i = 0; i < b.rows(); ++i) col[i] = b(i, j);
      const ComplexVector s = solve(col);
      for (std::size_t i = 0; i < b.rows(); ++i) x(i, j) = s[i];
    }
    return x;
  }

 private:
  void factor(int block) {
    const std::size_t n = lu_.rows();
    if (lu_.cols() != n) throw std::invalid_argument("lu: matrix must be square");
    if (!lu_.all_finite()) throw std::invalid_argument("lu: matrix has non-finite entries");
    piv_.resize(n);
    const std::size_t nb = static_cast<std::size_t>(std::max(1, block));
    for (std::size_t k0 = 0; k0 < n; k0 += nb) {
      const std::size_t k1 = std::min(n, k0 + nb);
      factor_panel(k0, k1);
      if (k1 == n) break;
      // U12 = L11^{-1} A12
      for (std::size_t r = k0 + 1; r < k1; ++r) {
        Complex* ar = lu_.row(r);
        for (std::size_t c = k0; c < r; ++c) {
          const Complex l = ar[c];
          if (l == Complex(0.0, 0.0)) continue;
          const Complex* ac = lu_.row(c);
          for (std::size_t j = k1; j < n; ++j) ar[j] -= l * ac[j];
        }
      }
      trailing_update(k0, k1);
    }
  }

  void factor_panel(std::size_t k0, std::size_t k1) {
    const std::size_t n = lu_.rows();
    for (std::size_t c = k0; c < k1; ++c) {
      std::size_t p = c;
      double best = std::abs(lu_(c, c));
      for (std::size_t r = c + 1; r < n; ++r) {
        const double v = std::abs(lu_(r, c));
        if (v > best) {
          best = v;
          p = r;
        }
      }
      if (best < 1e-300)
        throw SingularMatrixError("lu: pivot below 1e-300 in column " + std::to_string(c));
      piv_[c] = p;
      if (p != c) std::swap_ranges(lu_.row(c), lu_.row(c) + n, lu_.row(p));
      const Complex inv = 1.0 / lu_(c, c);
      const Complex* pc = lu_.row(c);
      for (std::size_t r = c + 1; r < n; ++r) {
        Complex* ar = lu_.row(r);
        const Complex l = ar[c] * inv;
        ar[c] = l;
        if (l == Complex(0.0, 0.0)) continue;
        for (std::size_t j = c + 1; j < k1; ++j) ar[j] -= l * pc[j];
      }
    }
  }

  void trailing_update(std::size_t k0, std::size_t k1) {
    const std::size_t n = lu_.rows();
    const int nk = static_cast<int>(k1 - k0);
    constexpr std::size_t kStrip = 192;
    std::vector<const double*> urows(nk);
    for (std::size_t j0 = k1; j0 < n; j0 += kStrip) {
      const std::size_t len = std::min(kStrip, n - j0);
      for (int k = 0; k < nk; ++k)
        urows[k] = reinterpret_cast<const double*>(lu_.row(k0 + k) + j0);
      for (std::size_t i = k1; i < n; ++i) {
        Complex* ai = lu_.row(i);
        linalg_detail::axpy_block(reinterpret_cast<double*>(ai + j0), urows.data(), ai + k0, nk, len);
      }
    }
  }

  DenseMatrix lu_;
  std::vector<std::size_t> piv_;
};

/// Solve A x = b by LU with partial pivoting.
inline ComplexVector lu_solve(const DenseMatrix& a, const ComplexVector& b) {
  return LuFactorization(a).solve(b);
}

/// Cholesky factor of a real symmetric positive definite matrix (lower, row-major).
inline std::vector<double> cholesky(const std::vector<double>& m, std::size_t n) {
  std::vector<double> l(n * n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    double d = m[j * n + j];
    for (std::size_t k = 0; k < j; ++k) d -= l[j * n + k] * l[j * n + k];
    if (!(d > 0.0)) throw SingularMatrixError("cholesky: matrix is not positive definite");
    d = std::sqrt(d);
    l[j * n + j] = d;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = m[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= l[i * n + k] * l[j * n + k];
      l[i * n + j] = s / d;
    }
  }
  return l;
}

/// Largest singular value of L^{-1} A L^{-H}, M = L L^T (or of A when M is empty),
/// by power iteration on the normal operator. For a Galerkin matrix A and mass
/// matrix M this is the L^2 operator norm of the discrete operator.
inline double op_norm_estimate(const DenseMatrix& a, const std::vector<double>& mass = {},
                               double tol = 1e-6, int max_iter = 5000) {
  const std::size_t n = a.cols();
  const bool weighted = !mass.empty();
  if (weighted && (a.rows() != n || mass.size() != n * n))
    throw std::invalid_argument("op_norm_estimate: weight must match a square operator");
  std::vector<double> l;
  if (weighted) l = cholesky(mass, n);
  auto solve_l = [&](ComplexVector& x) {  // x <- L^{-1} x
    for (std::size_t i = 0; i < n; ++i) {
      Complex s = x[i];
      for (std::size_t k = 0; k < i; ++k) s -= l[i * n + k] * x[k];
      x[i] = s / l[i * n + i];
    }
  };
  auto solve_lt = [&](ComplexVector& x) {  // x <- L^{-T} x
    for (std::size_t ii = n; ii-- > 0;) {
      Complex s = x[ii];
      for (std::size_t k = ii + 1; k < n; ++k) s -= l[k * n + ii] * x[k];
      x[ii] = s / l[ii * n + ii];
    }
  };
  // B = L^{-1} A L^{-T}; B^H B v
  ComplexVector v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = Complex(1.0 + 0.01 * std::sin(1.7 * i), 0.3 * std::cos(0.9 * i));
  double nv = norm2(v);
  for (Complex& c : v) c /= nv;
  double sigma_prev = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    ComplexVector w = v;
    if (weighted) solve_lt(w);
    w = matvec(a, w);
    if (weighted) solve_l(w);
    const double sigma = norm2(w);
    if (weighted) solve_lt(w);
    w = matvec_adjoint(a, w);
    if (weighted) solve_l(w);
    const double nw = norm2(w);
    if (nw == 0.0) return 0.0;
    for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / nw;
    if (it > 0 && std::abs(sigma - sigma_prev) <= tol * sigma) return sigma;
    sigma_prev = sigma;
  }
  throw ConvergenceError("op_norm_estimate: power iteration did not converge");
}

/// Singular values (descending) by one-sided Jacobi; intended for small matrices.
inline std::vector<double> singular_values(DenseMatrix a, int max_sweeps = 60) {
  // work on columns: store A^T so that columns of A are contiguous rows
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  std::vector<ComplexVector> col(n, ComplexVector(m));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) col[j][i] = a(i, j);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double app = 0.0, aqq = 0.0;
        Complex apq{0.0, 0.0};
        for (std::size_t i = 0; i < m; ++i) {
          app += std::norm(col[p][i]);
          aqq += std::norm(col[q][i]);
          apq += std::conj(col[p][i]) * col[q][i];
        }
        const double g = std::abs(apq);
        if (g <= 1e-15 * std::sqrt(app * aqq) || g == 0.0) continue;
        rotated = true;
        const Complex phase = apq / g;
        const double zeta = (aqq - app) / (2.0 * g);
        const double t = (zeta >= 0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const Complex xp = col[p][i];
          const Complex xq = col[q][i];
          col[p][i] = c * xp - s * std::conj(phase) * xq;
          col[q][i] = s * phase * xp + c * xq;
        }
      }
    }
    if (!rotated) break;
  }
  std::vector<double> sv(n);
  for (std::size_t j = 0; j < n; ++j) sv[j] = norm2(col[j]);
  std::sort(sv.begin(), sv.end(), std::greater<>());
  return sv;
}

/// Eigenvalues (ascending) of a real symmetric matrix by cyclic Jacobi.
inline std::vector<double> symmetric_eigenvalues(std::vector<double> m, std::size_t n,
                                                 int max_sweeps = 100) {
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += m[i * n + j] * m[i * n + j];
    if (off < 1e-30) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = m[p * n + q];
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double mkp = m[k * n + p];
          const double mkq = m[k * n + q];
          m[k * n + p] = c * mkp - s * mkq;
          m[k * n + q] = s * mkp + c * mkq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double mpk = m[p * n + k];
          const double mqk = m[q * n + k];
          m[p * n + k] = c * mpk - s * mqk;
          m[q * n + k] = s * mpk + c * mqk;
        }
      }
    }
  }
  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = m[i * n + i];
  std::sort(ev.begin(), ev.end());
  return ev;
}

/// 2-norm condition number estimate from singular values (small matrices only).
inline double condition_number(const DenseMatrix& a) {
  const auto sv = singular_values(a);
  if (sv.empty() || sv.back() == 0.0) return INFINITY;
  return sv.front() / sv.back();
}

}  // namespace hsm
