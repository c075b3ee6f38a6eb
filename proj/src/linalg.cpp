#include "spanopt/linalg.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "spanopt/error.hpp"
#include "spanopt/parallel.hpp"
#include "spanopt/random.hpp"

namespace spanopt {

namespace {

std::atomic<unsigned> g_max_threads{1};

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(Errc::DimensionMismatch, std::string(what) + ": shape mismatch");
  }
}

}  // namespace

void set_max_threads(unsigned n) noexcept { g_max_threads = std::max(1u, n); }
unsigned max_threads() noexcept { return g_max_threads; }

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::DimensionTooLarge: return "DimensionTooLarge";
    case Errc::RankDeficient: return "RankDeficient";
    case Errc::NoConvergence: return "NoConvergence";
    case Errc::SingularSystem: return "SingularSystem";
    case Errc::IndefiniteBlock: return "IndefiniteBlock";
    case Errc::NonFiniteResult: return "NonFiniteResult";
    case Errc::BatchTooLarge: return "BatchTooLarge";
    case Errc::InvalidRankParams: return "InvalidRankParams";
    case Errc::ParseError: return "ParseError";
    case Errc::NoMatchingExamples: return "NoMatchingExamples";
    case Errc::DivergingSeries: return "DivergingSeries";
    case Errc::ConfigError: return "ConfigError";
    case Errc::IncompatibleTraces: return "IncompatibleTraces";
  }
  return "Unknown";
}

// ---------------------------------------------------------------------------
// DenseMatrix

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

DenseMatrix::DenseMatrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() ? rows.begin()->size() : 0) {
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw Error(Errc::DimensionMismatch, "ragged initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::diagonal(std::span<const double> diag) {
  DenseMatrix m(diag.size(), diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
  return m;
}

Vector DenseMatrix::column(std::size_t j) const {
  Vector out(rows_);
  for (std::size_t i = 0; i < rows_; ++i) out[i] = (*this)(i, j);
  return out;
}

void DenseMatrix::set_column(std::size_t j, std::span<const double> values) {
  if (values.size() != rows_) throw Error(Errc::DimensionMismatch, "set_column");
  for (std::size_t i = 0; i < rows_; ++i) (*this)(i, j) = values[i];
}

DenseMatrix DenseMatrix::transposed() const {
  DenseMatrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

bool DenseMatrix::all_finite() const noexcept { return spanopt::all_finite(data_); }

double DenseMatrix::max_abs() const noexcept {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

double DenseMatrix::frobenius_norm() const noexcept { return norm2(data_); }

DenseMatrix& DenseMatrix::operator+=(const DenseMatrix& other) {
  require_same_shape(*this, other, "operator+=");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += other.data_[k];
  return *this;
}

DenseMatrix& DenseMatrix::operator-=(const DenseMatrix& other) {
  require_same_shape(*this, other, "operator-=");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= other.data_[k];
  return *this;
}

DenseMatrix& DenseMatrix::operator*=(double s) noexcept {
  for (double& v : data_) v *= s;
  return *this;
}

DenseMatrix operator+(DenseMatrix a, const DenseMatrix& b) { return a += b; }
DenseMatrix operator-(DenseMatrix a, const DenseMatrix& b) { return a -= b; }
DenseMatrix operator*(double s, DenseMatrix a) { return a *= s; }

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) throw Error(Errc::DimensionMismatch, "matmul");
  DenseMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ci = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      axpy(aik, b.row(k), ci);
    }
  }
  return c;
}

DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows()) throw Error(Errc::DimensionMismatch, "matmul_tn");
  DenseMatrix c(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const auto ak = a.row(k);
    const auto bk = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) axpy(ak[i], bk, c.row(i));
  }
  return c;
}

Vector matvec(const DenseMatrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) throw Error(Errc::DimensionMismatch, "matvec");
  Vector y(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) y[i] = dot(a.row(i), x);
  return y;
}

Vector matvec_t(const DenseMatrix& a, std::span<const double> x) {
  if (a.rows() != x.size()) throw Error(Errc::DimensionMismatch, "matvec_t");
  Vector y(a.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) axpy(x[i], a.row(i), y);
  return y;
}

double dot(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) noexcept {
  // Scaled accumulation so that very large or very small power-iterates do not
  // overflow or underflow.
  double scale_ = 0.0;
  for (double v : a) scale_ = std::max(scale_, std::abs(v));
  if (scale_ == 0.0 || !std::isfinite(scale_)) return scale_;
  double s = 0.0;
  for (double v : a) {
    const double r = v / scale_;
    s += r * r;
  }
  return scale_ * std::sqrt(s);
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

void scale(double alpha, std::span<double> x) noexcept {
  for (double& v : x) v *= alpha;
}

bool all_finite(std::span<const double> x) noexcept {
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

// ---------------------------------------------------------------------------
// Kernels

DenseMatrix gaussian_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  if (rows == 0 || cols == 0) throw Error(Errc::InvalidArgument, "gaussian_matrix: empty shape");
  NormalSampler normal(seed);
  DenseMatrix m(rows, cols);
  for (std::size_t j = 0; j < cols; ++j)
    for (std::size_t i = 0; i < rows; ++i) m(i, j) = normal();
  return m;
}

DenseMatrix qr_orthonormal(const DenseMatrix& y) {
  const std::size_t d = y.rows();
  const std::size_t l = y.cols();
  if (l == 0 || d < l) throw Error(Errc::InvalidArgument, "qr_orthonormal: need rows >= cols >= 1");
  if (!y.all_finite()) throw Error(Errc::NonFiniteResult, "qr_orthonormal: non-finite input");

  // Column-major working copy; Householder vectors overwrite the lower part.
  std::vector<double> a(d * l);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < l; ++j) a[j * d + i] = y(i, j);

  std::vector<double> vnorm_sq(l, 0.0);
  std::vector<double> rdiag(l, 0.0);
  for (std::size_t k = 0; k < l; ++k) {
    double* col = a.data() + k * d;
    const double alpha_mag = norm2({col + k, d - k});
    const double alpha = col[k] >= 0.0 ? -alpha_mag : alpha_mag;
    rdiag[k] = alpha;
    col[k] -= alpha;  // v = x - alpha e_1, stored in place
    double vv = 0.0;
    for (std::size_t i = k; i < d; ++i) vv += col[i] * col[i];
    vnorm_sq[k] = vv;
    if (vv == 0.0) continue;
    for (std::size_t j = k + 1; j < l; ++j) {
      double* cj = a.data() + j * d;
      double s = 0.0;
      for (std::size_t i = k; i < d; ++i) s += col[i] * cj[i];
      const double f = 2.0 * s / vv;
      for (std::size_t i = k; i < d; ++i) cj[i] -= f * col[i];
    }
  }

  double rmax = 0.0;
  double rmin = std::numeric_limits<double>::infinity();
  for (double r : rdiag) {
    rmax = std::max(rmax, std::abs(r));
    rmin = std::min(rmin, std::abs(r));
  }
  if (rmax == 0.0 || rmin <= 1e-12 * rmax) {
    throw Error(Errc::RankDeficient, "qr_orthonormal: columns are numerically dependent");
  }

  // Q = H_0 H_1 ... H_{l-1} applied to the first l columns of the identity.
  std::vector<double> q(d * l, 0.0);
  for (std::size_t j = 0; j < l; ++j) q[j * d + j] = 1.0;
  for (std::size_t kk = l; kk-- > 0;) {
    const double vv = vnorm_sq[kk];
    if (vv == 0.0) continue;
    const double* v = a.data() + kk * d;
    for (std::size_t j = kk; j < l; ++j) {
      double* qj = q.data() + j * d;
      double s = 0.0;
      for (std::size_t i = kk; i < d; ++i) s += v[i] * qj[i];
      const double f = 2.0 * s / vv;
      for (std::size_t i = kk; i < d; ++i) qj[i] -= f * v[i];
    }
  }

  DenseMatrix u(d, l);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < l; ++j) u(i, j) = q[j * d + i];
  return u;
}

EigenPairs sym_eig_small(const DenseMatrix& input, std::size_t cap) {
  const std::size_t k = input.rows();
  if (k != input.cols()) throw Error(Errc::DimensionMismatch, "sym_eig_small: matrix not square");
  if (k > cap) throw Error(Errc::DimensionTooLarge, "sym_eig_small: k=" + std::to_string(k));
  if (!input.all_finite()) throw Error(Errc::NonFiniteResult, "sym_eig_small: non-finite input");

  DenseMatrix a(k, k);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) a(i, j) = 0.5 * (input(i, j) + input(j, i));
  DenseMatrix v = DenseMatrix::identity(k);

  const double fnorm = a.frobenius_norm();
  constexpr int kMaxSweeps = 100;
  bool converged = fnorm == 0.0;
  for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < k; ++p)
      for (std::size_t q = p + 1; q < k; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(2.0 * off) <= 1e-14 * fnorm) {
      converged = true;
      break;
    }
    const double skip = 1e-20 * fnorm;
    for (std::size_t p = 0; p + 1 < k; ++p) {
      for (std::size_t q = p + 1; q < k; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= skip) continue;
        const double tau = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::hypot(1.0, tau));
        const double c = 1.0 / std::hypot(1.0, t);
        const double s = t * c;
        for (std::size_t r = 0; r < k; ++r) {
          const double arp = a(r, p);
          const double arq = a(r, q);
          a(r, p) = c * arp - s * arq;
          a(r, q) = s * arp + c * arq;
        }
        auto rp = a.row(p);
        auto rq = a.row(q);
        for (std::size_t r = 0; r < k; ++r) {
          const double apr = rp[r];
          const double aqr = rq[r];
          rp[r] = c * apr - s * aqr;
          rq[r] = s * apr + c * aqr;
        }
        for (std::size_t r = 0; r < k; ++r) {
          const double vrp = v(r, p);
          const double vrq = v(r, q);
          v(r, p) = c * vrp - s * vrq;
          v(r, q) = s * vrp + c * vrq;
        }
      }
    }
  }
  if (!converged) {
    double off = 0.0;
    for (std::size_t p = 0; p < k; ++p)
      for (std::size_t q = p + 1; q < k; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(2.0 * off) > 1e-14 * fnorm) {
      throw Error(Errc::NoConvergence, "sym_eig_small: sweep cap exceeded");
    }
  }

  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });
  EigenPairs out{Vector(k), DenseMatrix(k, k)};
  for (std::size_t j = 0; j < k; ++j) {
    out.values[j] = a(order[j], order[j]);
    for (std::size_t r = 0; r < k; ++r) out.vectors(r, j) = v(r, order[j]);
  }
  return out;
}

DenseMatrix solve_small(const DenseMatrix& a_in, const DenseMatrix& b_in) {
  const std::size_t n = a_in.rows();
  if (n == 0 || a_in.cols() != n) throw Error(Errc::DimensionMismatch, "solve_small: A not square");
  if (b_in.rows() != n) throw Error(Errc::DimensionMismatch, "solve_small: rhs rows");
  if (!a_in.all_finite() || !b_in.all_finite()) {
    throw Error(Errc::NonFiniteResult, "solve_small: non-finite input");
  }

  DenseMatrix a = a_in;
  DenseMatrix x = b_in;
  double pmax = 0.0;
  double pmin = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a(r, c)) > std::abs(a(piv, c))) piv = r;
    if (piv != c) {
      std::swap_ranges(a.row(c).begin(), a.row(c).end(), a.row(piv).begin());
      std::swap_ranges(x.row(c).begin(), x.row(c).end(), x.row(piv).begin());
    }
    const double p = a(c, c);
    pmax = std::max(pmax, std::abs(p));
    pmin = std::min(pmin, std::abs(p));
    if (p == 0.0 || pmin * 1e12 < pmax) {
      throw Error(Errc::SingularSystem, "solve_small: pivot ratio exceeds 1e12");
    }
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a(r, c) / p;
      if (f == 0.0) continue;
      a(r, c) = 0.0;
      for (std::size_t j = c + 1; j < n; ++j) a(r, j) -= f * a(c, j);
      axpy(-f, x.row(c), x.row(r));
    }
  }
  for (std::size_t c = n; c-- > 0;) {
    auto xc = x.row(c);
    for (std::size_t j = c + 1; j < n; ++j) axpy(-a(c, j), x.row(j), xc);
    scale(1.0 / a(c, c), xc);
  }
  return x;
}

Vector solve_small(const DenseMatrix& a, std::span<const double> b) {
  DenseMatrix rhs(b.size(), 1);
  rhs.set_column(0, b);
  return solve_small(a, rhs).column(0);
}

double spectral_norm_sym(const LinearOperator& apply, std::size_t d, double tol,
                         std::uint64_t seed, std::size_t max_iter, double abs_tol) {
  if (d == 0) return 0.0;
  if (!(tol > 0.0)) throw Error(Errc::InvalidArgument, "spectral_norm_sym: tol must be positive");
  Vector v = gaussian_matrix(d, 1, seed).column(0);
  scale(1.0 / norm2(v), v);

  double previous = 0.0;
  int stable = 0;
  for (std::size_t it = 0; it < max_iter; ++it) {
    Vector w = apply(v);
    if (w.size() != d) throw Error(Errc::DimensionMismatch, "spectral_norm_sym: operator output");
    const double estimate = norm2(w);
    if (!std::isfinite(estimate)) throw Error(Errc::NonFiniteResult, "spectral_norm_sym");
    if (estimate == 0.0) return 0.0;
    if (it > 0 && std::abs(estimate - previous) <= tol * estimate + abs_tol) {
      if (++stable >= 3) return estimate;
    } else {
      stable = 0;
    }
    previous = estimate;
    scale(1.0 / estimate, w);
    v = std::move(w);
  }
  throw Error(Errc::NoConvergence, "spectral_norm_sym: iteration cap reached");
}

double spectral_norm_dense(const DenseMatrix& a) {
  if (a.rows() == a.cols() && a == a.transposed()) {
    const auto eig = sym_eig_small(a);
    if (eig.values.empty()) return 0.0;
    return std::max(std::abs(eig.values.front()), std::abs(eig.values.back()));
  }
  const auto eig = sym_eig_small(matmul_tn(a, a));
  return std::sqrt(std::max(0.0, eig.values.front()));
}

}  // namespace spanopt
