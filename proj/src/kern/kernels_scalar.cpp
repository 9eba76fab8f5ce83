#include "cdpg/kern/kernels.hpp"

#include <cmath>
#include <limits>

// Scalar reference kernels. These define the semantics the SIMD variants are
// equivalence-tested against.

namespace cdpg::kern::detail {
namespace {

double reduce_sum_scalar(const double* x, std::size_t n) {
  // Neumaier-compensated summation: keeps enumeration-table sums (millions of
  // terms) accurate to the 1e-12 normalization tolerance.
  double s = 0.0;
  double c = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double t = s + x[i];
    if (std::abs(s) >= std::abs(x[i])) {
      c += (s - t) + x[i];
    } else {
      c += (x[i] - t) + s;
    }
    s = t;
  }
  return s + c;
}

double reduce_max_scalar(const double* x, std::size_t n) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    if (x[i] > m) m = x[i];
  }
  return m;
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  // std::fma keeps this bit-identical to the AVX2 fmadd path.
  for (std::size_t i = 0; i < n; ++i) y[i] = std::fma(a, x[i], y[i]);
}

void scale_scalar(double* x, double a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

double sum_sq_dev_scalar(const double* x, std::size_t n, double mean) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double d = x[i] - mean;
    s += d * d;
  }
  return s;
}

}  // namespace

const KernelTable scalar_table = {
    reduce_sum_scalar, reduce_max_scalar, dot_scalar,
    axpy_scalar,       scale_scalar,      sum_sq_dev_scalar,
};

}  // namespace cdpg::kern::detail
