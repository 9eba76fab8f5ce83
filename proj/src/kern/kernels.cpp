#include "cdpg/kern/kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace cdpg::kern {

namespace {

bool avx2_supported() {
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const detail::KernelTable* table_for(Backend b) {
#if defined(__x86_64__) || defined(_M_X64)
  if (b == Backend::Avx2) return &detail::avx2_table;
#endif
  (void)b;
  return &detail::scalar_table;
}

struct Dispatch {
  Backend backend;
  const detail::KernelTable* table;
  Dispatch() {
    backend = avx2_supported() ? Backend::Avx2 : Backend::Scalar;
    if (const char* env = std::getenv("CDPG_KERNELS")) {
      std::string v(env);
      if (v == "scalar") {
        backend = Backend::Scalar;
      } else if (v == "avx2") {
        if (!avx2_supported()) {
          throw std::runtime_error("CDPG_KERNELS=avx2 but AVX2+FMA not available");
        }
        backend = Backend::Avx2;
      }  // anything else: auto
    }
    table = table_for(backend);
  }
};

Dispatch& dispatch() {
  static Dispatch d;
  return d;
}

}  // namespace

Backend active_backend() { return dispatch().backend; }

bool backend_supported(Backend b) {
  return b == Backend::Scalar || (b == Backend::Avx2 && avx2_supported());
}

void set_backend(Backend b) {
  if (!backend_supported(b)) {
    throw std::runtime_error(std::string("kernel backend unsupported: ") + backend_name(b));
  }
  dispatch().backend = b;
  dispatch().table = table_for(b);
}

const char* backend_name(Backend b) {
  switch (b) {
    case Backend::Scalar: return "scalar";
    case Backend::Avx2: return "avx2";
  }
  return "?";
}

double reduce_sum(std::span<const double> x) {
  return dispatch().table->reduce_sum(x.data(), x.size());
}

double reduce_max(std::span<const double> x) {
  return dispatch().table->reduce_max(x.data(), x.size());
}

double dot(std::span<const double> a, std::span<const double> b) {
  return dispatch().table->dot(a.data(), b.data(), a.size());
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  dispatch().table->axpy(a, x.data(), y.data(), x.size());
}

void scale(std::span<double> x, double a) {
  dispatch().table->scale(x.data(), a, x.size());
}

double sum_sq_dev(std::span<const double> x, double mean) {
  return dispatch().table->sum_sq_dev(x.data(), x.size(), mean);
}

double logsumexp(std::span<const double> x) {
  double m = reduce_max(x);
  if (!std::isfinite(m)) return m;  // empty or all -inf
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s);
}

void softmax(std::span<const double> logits, std::span<double> probs) {
  double m = reduce_max(logits);
  for (std::size_t i = 0; i < logits.size(); ++i) probs[i] = std::exp(logits[i] - m);
  double s = reduce_sum(probs.first(logits.size()));
  scale(probs.first(logits.size()), 1.0 / s);
}

double log_softmax_at(std::span<const double> logits, std::size_t idx) {
  return logits[idx] - logsumexp(logits);
}

}  // namespace cdpg::kern
