#include "dfl/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dfl/error.hpp"
#include "dfl/rng.hpp"

namespace dfl {

void require_same_size(const DenseVector& a, const DenseVector& b, const char* where) {
  if (a.size() != b.size()) {
    throw DimensionError(std::string(where) + ": length mismatch (" + std::to_string(a.size()) +
                         " vs " + std::to_string(b.size()) + ")");
  }
}

DenseVector axpy(double a, const DenseVector& x, const DenseVector& y) {
  require_same_size(x, y, "axpy");
  DenseVector out(y);
  axpy_inplace(a, x, out);
  return out;
}

void axpy_inplace(double a, const DenseVector& x, DenseVector& y) {
  require_same_size(x, y, "axpy_inplace");
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

DenseVector add(const DenseVector& x, const DenseVector& y) {
  require_same_size(x, y, "add");
  DenseVector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
  return out;
}

DenseVector subtract(const DenseVector& x, const DenseVector& y) {
  require_same_size(x, y, "subtract");
  DenseVector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
  return out;
}

DenseVector scaled(double a, const DenseVector& x) {
  DenseVector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = a * x[i];
  return out;
}

double dot(const DenseVector& x, const DenseVector& y) {
  require_same_size(x, y, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

double squared_norm(const DenseVector& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

double norm(const DenseVector& x) { return std::sqrt(squared_norm(x)); }

double max_abs(const DenseVector& x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

bool all_finite(const DenseVector& x) {
  for (double v : x) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

DenseVector mean_of(std::span<const DenseVector> xs) {
  if (xs.empty()) throw DimensionError("mean_of: empty set");
  DenseVector out(xs.front().size());
  for (const auto& x : xs) {
    require_same_size(out, x, "mean_of");
    for (std::size_t i = 0; i < x.size(); ++i) out[i] += x[i];
  }
  const double inv = 1.0 / static_cast<double>(xs.size());
  for (auto& v : out) v *= inv;
  return out;
}

SymmetricMatrix::SymmetricMatrix(std::size_t order)
    : order_(order), entries_(order * order, 0.0) {}

SymmetricMatrix::SymmetricMatrix(std::size_t order, std::vector<double> row_major)
    : order_(order), entries_(std::move(row_major)) {
  if (entries_.size() != order_ * order_) {
    throw DimensionError("SymmetricMatrix: expected " + std::to_string(order_ * order_) +
                         " entries, got " + std::to_string(entries_.size()));
  }
  for (std::size_t i = 0; i < order_; ++i) {
    for (std::size_t j = i + 1; j < order_; ++j) {
      if (entries_[i * order_ + j] != entries_[j * order_ + i]) {
        throw DimensionError("SymmetricMatrix: entries (" + std::to_string(i) + "," +
                             std::to_string(j) + ") and transpose differ");
      }
    }
  }
}

SymmetricMatrix SymmetricMatrix::identity(std::size_t order) {
  SymmetricMatrix m(order);
  for (std::size_t i = 0; i < order; ++i) m.entries_[i * order + i] = 1.0;
  return m;
}

SymmetricMatrix SymmetricMatrix::diagonal(std::span<const double> diag) {
  SymmetricMatrix m(diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) m.entries_[i * diag.size() + i] = diag[i];
  return m;
}

SymmetricMatrix SymmetricMatrix::averaging(std::size_t order) {
  SymmetricMatrix m(order);
  const double w = 1.0 / static_cast<double>(order);
  std::fill(m.entries_.begin(), m.entries_.end(), w);
  return m;
}

void SymmetricMatrix::set(std::size_t i, std::size_t j, double value) {
  entries_[i * order_ + j] = value;
  entries_[j * order_ + i] = value;
}

DenseVector SymmetricMatrix::multiply(const DenseVector& x) const {
  if (x.size() != order_) throw DimensionError("SymmetricMatrix::multiply: length mismatch");
  DenseVector out(order_);
  for (std::size_t i = 0; i < order_; ++i) {
    const double* r = &entries_[i * order_];
    double s = 0.0;
    for (std::size_t j = 0; j < order_; ++j) s += r[j] * x[j];
    out[i] = s;
  }
  return out;
}

SymmetricMatrix SymmetricMatrix::minus(const SymmetricMatrix& other) const {
  if (other.order_ != order_) throw DimensionError("SymmetricMatrix::minus: order mismatch");
  SymmetricMatrix out(order_);
  for (std::size_t k = 0; k < entries_.size(); ++k) out.entries_[k] = entries_[k] - other.entries_[k];
  return out;
}

double SymmetricMatrix::max_abs_entry() const {
  double m = 0.0;
  for (double v : entries_) m = std::max(m, std::abs(v));
  return m;
}

namespace {

DenseVector random_unit(std::size_t n, RngStream& rng) {
  DenseVector v(n);
  for (auto& x : v) x = rng.normal();
  const double nv = norm(v);
  for (auto& x : v) x /= nv;
  return v;
}

}  // namespace

EigenPair power_iteration(const SymmetricMatrix& a, std::uint64_t seed,
                          const PowerIterationOptions& options) {
  const std::size_t n = a.order();
  if (n == 0) throw DimensionError("power_iteration: empty matrix");
  EigenPair result;
  if (a.max_abs_entry() == 0.0) {
    result.vector = DenseVector(n, 0.0);
    result.vector[0] = 1.0;
    return result;
  }
  const std::size_t budget =
      options.max_iterations > 0 ? options.max_iterations : std::max<std::size_t>(10, 10 * n * n);

  double best = 0.0;
  std::size_t total_iterations = 0;
  for (std::size_t attempt = 0; attempt <= options.max_restarts; ++attempt) {
    RngStream rng(seed, 0, Purpose::kPower, attempt);
    DenseVector v = random_unit(n, rng);
    double estimate = 0.0;
    int settled = 0;
    bool stalled = false;
    for (std::size_t it = 0; it < budget; ++it) {
      DenseVector av = a.multiply(v);
      const double nav = norm(av);
      ++total_iterations;
      if (nav == 0.0) {
        stalled = true;
        break;
      }
      const double change = std::abs(nav - estimate);
      estimate = nav;
      best = estimate;
      for (std::size_t i = 0; i < n; ++i) v[i] = av[i] / nav;
      if (it > 0 && change <= options.relative_tolerance * estimate) {
        if (++settled >= 2) {
          result.magnitude = estimate;
          const double rq = dot(v, a.multiply(v));
          if (std::abs(std::abs(rq) - estimate) <= 1e-6 * estimate) {
            result.value = rq;
          } else {
            result.value = estimate;
            result.sign_ambiguous = true;
          }
          result.vector = std::move(v);
          result.iterations = total_iterations;
          return result;
        }
      } else {
        settled = 0;
      }
    }
    if (!stalled) {
      throw NumericalError("power_iteration: no convergence after " + std::to_string(budget) +
                               " iterations",
                           best);
    }
  }
  // Every fresh start vector was annihilated: only possible when A == 0 on a
  // set of full measure, i.e. the dominant magnitude is 0.
  result.vector = DenseVector(n, 0.0);
  result.vector[0] = 1.0;
  result.iterations = total_iterations;
  return result;
}

double second_eigenvalue_magnitude(const SymmetricMatrix& w, std::uint64_t seed) {
  const SymmetricMatrix deflated = w.minus(SymmetricMatrix::averaging(w.order()));
  return power_iteration(deflated, seed).magnitude;
}

}  // namespace dfl
