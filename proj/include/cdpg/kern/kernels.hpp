#pragma once

#include <cstddef>
#include <span>

// Numeric kernels backing the hot loops: parameter-update axpy, reductions
// over enumeration tables and sample batches, and softmax row math.
//
// Every kernel has a scalar reference implementation and (on x86-64) an AVX2
// variant. The backend is picked once at process start from CPU features and
// can be overridden with the CDPG_KERNELS environment variable
// ("scalar" | "avx2" | "auto") or set_backend(). Transcendentals (exp/log)
// stay scalar in all lanes; only arithmetic loops are vectorized.
//
// Accuracy contract: reduce_sum is compensated (Neumaier) in both lanes;
// axpy and scale are element-wise identical across lanes (scalar uses fma);
// dot and sum_sq_dev may differ across lanes by reassociation only.

namespace cdpg::kern {

enum class Backend { Scalar, Avx2 };

Backend active_backend();
bool backend_supported(Backend b);
void set_backend(Backend b);  // throws std::runtime_error if unsupported
const char* backend_name(Backend b);

double reduce_sum(std::span<const double> x);
double reduce_max(std::span<const double> x);  // -inf for empty x
double dot(std::span<const double> a, std::span<const double> b);
void axpy(double a, std::span<const double> x, std::span<double> y);  // y += a*x
void scale(std::span<double> x, double a);                            // x *= a
double sum_sq_dev(std::span<const double> x, double mean);  // sum (x_i - mean)^2

// Row helpers built on the primitives above.
void softmax(std::span<const double> logits, std::span<double> probs);
double logsumexp(std::span<const double> x);
double log_softmax_at(std::span<const double> logits, std::size_t idx);

namespace detail {

struct KernelTable {
  double (*reduce_sum)(const double*, std::size_t);
  double (*reduce_max)(const double*, std::size_t);
  double (*dot)(const double*, const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  void (*scale)(double*, double, std::size_t);
  double (*sum_sq_dev)(const double*, std::size_t, double);
};

extern const KernelTable scalar_table;
#if defined(__x86_64__) || defined(_M_X64)
extern const KernelTable avx2_table;
#endif

}  // namespace detail

}  // namespace cdpg::kern
