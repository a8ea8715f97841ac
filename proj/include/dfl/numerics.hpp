#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace dfl {

/// Dense parameter-space vector. Thin value wrapper over std::vector<double>
/// whose arithmetic helpers insist on matching lengths.
class DenseVector {
 public:
  DenseVector() = default;
  explicit DenseVector(std::size_t n, double fill = 0.0) : values_(n, fill) {}
  explicit DenseVector(std::vector<double> values) : values_(std::move(values)) {}
  DenseVector(std::initializer_list<double> values) : values_(values) {}

  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  double* data() noexcept { return values_.data(); }
  const double* data() const noexcept { return values_.data(); }
  std::span<double> span() noexcept { return values_; }
  std::span<const double> span() const noexcept { return values_; }

  auto begin() noexcept { return values_.begin(); }
  auto end() noexcept { return values_.end(); }
  auto begin() const noexcept { return values_.begin(); }
  auto end() const noexcept { return values_.end(); }

  const std::vector<double>& values() const noexcept { return values_; }

  friend bool operator==(const DenseVector&, const DenseVector&) = default;

 private:
  std::vector<double> values_;
};

/// a*x + y as a new vector.
DenseVector axpy(double a, const DenseVector& x, const DenseVector& y);
/// y += a*x.
void axpy_inplace(double a, const DenseVector& x, DenseVector& y);
DenseVector add(const DenseVector& x, const DenseVector& y);
DenseVector subtract(const DenseVector& x, const DenseVector& y);
DenseVector scaled(double a, const DenseVector& x);
double dot(const DenseVector& x, const DenseVector& y);
double squared_norm(const DenseVector& x);
double norm(const DenseVector& x);
double max_abs(const DenseVector& x);
bool all_finite(const DenseVector& x);
/// Elementwise mean of a nonempty set of equal-length vectors. Summation runs
/// in index order, so the result does not depend on scheduling.
DenseVector mean_of(std::span<const DenseVector> xs);
/// Throws DimensionError unless a and b have the same length.
void require_same_size(const DenseVector& a, const DenseVector& b, const char* where);

/// Square matrix that is symmetric by construction (entries[i][j] ==
/// entries[j][i] bit for bit). Row-major storage.
class SymmetricMatrix {
 public:
  SymmetricMatrix() = default;
  /// Zero matrix of the given order.
  explicit SymmetricMatrix(std::size_t order);
  /// Validates exact symmetry; throws DimensionError otherwise.
  SymmetricMatrix(std::size_t order, std::vector<double> row_major);

  static SymmetricMatrix identity(std::size_t order);
  static SymmetricMatrix diagonal(std::span<const double> diag);
  /// P = (1/m) 1 1^T.
  static SymmetricMatrix averaging(std::size_t order);

  std::size_t order() const noexcept { return order_; }
  double operator()(std::size_t i, std::size_t j) const { return entries_[i * order_ + j]; }
  /// Sets (i,j) and (j,i) together.
  void set(std::size_t i, std::size_t j, double value);
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(entries_).subspan(i * order_, order_);
  }
  const std::vector<double>& entries() const noexcept { return entries_; }

  DenseVector multiply(const DenseVector& x) const;
  SymmetricMatrix minus(const SymmetricMatrix& other) const;
  double max_abs_entry() const;

  friend bool operator==(const SymmetricMatrix&, const SymmetricMatrix&) = default;

 private:
  std::size_t order_ = 0;
  std::vector<double> entries_;
};

struct EigenPair {
  /// Rayleigh quotient when the dominant eigenvalue is unambiguous; the
  /// magnitude when +/-lambda are both dominant.
  double value = 0.0;
  double magnitude = 0.0;
  DenseVector vector;
  std::size_t iterations = 0;
  bool sign_ambiguous = false;
};

struct PowerIterationOptions {
  double relative_tolerance = 1e-10;
  /// 0 means the default budget of 10 * order^2 (at least 10).
  std::size_t max_iterations = 0;
  std::size_t max_restarts = 3;
};

/// Dominant-magnitude eigenpair of a symmetric matrix by power iteration.
/// Throws NumericalError (carrying the best magnitude estimate) when the
/// iteration budget runs out.
EigenPair power_iteration(const SymmetricMatrix& a, std::uint64_t seed,
                          const PowerIterationOptions& options = {});

/// psi = max(|psi_2(W)|, |psi_m(W)|) for a symmetric doubly stochastic W,
/// computed as the spectral radius of W - P.
double second_eigenvalue_magnitude(const SymmetricMatrix& w, std::uint64_t seed = 0x5eed);

}  // namespace dfl
