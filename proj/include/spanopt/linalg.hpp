#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

namespace spanopt {

using Vector = std::vector<double>;

/// Dense row-major real matrix. Carries the sketch, the orthonormal basis, its
/// Hessian image and the small l-by-l systems.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  DenseMatrix(std::initializer_list<std::initializer_list<double>> rows);

  static DenseMatrix identity(std::size_t n);
  static DenseMatrix diagonal(std::span<const double> diag);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const noexcept {
    return {data_.data() + i * cols_, cols_};
  }
  Vector column(std::size_t j) const;
  void set_column(std::size_t j, std::span<const double> values);

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  DenseMatrix transposed() const;
  bool all_finite() const noexcept;
  double max_abs() const noexcept;
  double frobenius_norm() const noexcept;

  DenseMatrix& operator+=(const DenseMatrix& other);
  DenseMatrix& operator-=(const DenseMatrix& other);
  DenseMatrix& operator*=(double s) noexcept;

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

DenseMatrix operator+(DenseMatrix a, const DenseMatrix& b);
DenseMatrix operator-(DenseMatrix a, const DenseMatrix& b);
DenseMatrix operator*(double s, DenseMatrix a);

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
/// aᵀ·b without forming the transpose.
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b);
Vector matvec(const DenseMatrix& a, std::span<const double> x);
/// aᵀ·x
Vector matvec_t(const DenseMatrix& a, std::span<const double> x);

double dot(std::span<const double> a, std::span<const double> b) noexcept;
double norm2(std::span<const double> a) noexcept;
/// y += alpha·x
void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept;
void scale(double alpha, std::span<double> x) noexcept;
bool all_finite(std::span<const double> x) noexcept;

struct EigenPairs {
  Vector values;         // non-increasing
  DenseMatrix vectors;   // column i pairs with values[i]
};

/// i.i.d. standard normal entries, filled column by column from a stream keyed
/// only by `seed`, so a narrower matrix is a prefix of a wider one.
DenseMatrix gaussian_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed);

/// Thin Q of a Householder QR. Throws RankDeficient when the columns of `y` are
/// numerically dependent.
DenseMatrix qr_orthonormal(const DenseMatrix& y);

inline constexpr std::size_t kSmallEigenCap = 2048;

/// Cyclic Jacobi eigensolver for symmetric matrices (the input is symmetrized).
EigenPairs sym_eig_small(const DenseMatrix& a, std::size_t cap = kSmallEigenCap);

/// LU with partial pivoting. Throws SingularSystem when the pivot ratio exceeds 1e12.
DenseMatrix solve_small(const DenseMatrix& a, const DenseMatrix& b);
Vector solve_small(const DenseMatrix& a, std::span<const double> b);

using LinearOperator = std::function<Vector(std::span<const double>)>;

/// Largest absolute eigenvalue of a symmetric operator by power iteration from
/// a Gaussian start. Stops once the estimate changes by at most `tol`
/// (relative) plus `abs_tol` on three consecutive iterations. A positive
/// `abs_tol` lets noisy operators near zero terminate.
double spectral_norm_sym(const LinearOperator& apply, std::size_t d, double tol = 1e-6,
                         std::uint64_t seed = 0, std::size_t max_iter = 20000,
                         double abs_tol = 0.0);

/// Largest singular value of a dense matrix (via the eigenvalues of aᵀa).
double spectral_norm_dense(const DenseMatrix& a);

}  // namespace spanopt
