#include "defi/kernels.hpp"

#include <atomic>
#include <stdexcept>

namespace defi::kernels {

#ifdef DEFI_HAVE_AVX2
namespace detail {
const KernelTable& avx2_table();  // defined in kernels_avx2.cpp
}
#endif

namespace {

double dot_scalar(const double* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

double dot3_scalar(const double* x, const double* y, const double* w, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i] * w[i];
  return acc;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double nrm2_sq_scalar(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * x[i];
  return acc;
}

void scal_scalar(double a, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

constexpr detail::KernelTable scalar_table{dot_scalar, dot3_scalar, axpy_scalar,
                                           nrm2_sq_scalar, scal_scalar};

bool avx2_supported() {
#if defined(DEFI_HAVE_AVX2) && defined(__GNUC__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

std::atomic<const detail::KernelTable*> current{nullptr};
std::atomic<Backend> current_backend{Backend::scalar};

void select(Backend b) {
#ifdef DEFI_HAVE_AVX2
  if (b == Backend::avx2) {
    current.store(&detail::avx2_table(), std::memory_order_relaxed);
    current_backend.store(Backend::avx2, std::memory_order_relaxed);
    return;
  }
#endif
  current.store(&scalar_table, std::memory_order_relaxed);
  current_backend.store(Backend::scalar, std::memory_order_relaxed);
}

void init_once() {
  if (current.load(std::memory_order_relaxed) == nullptr)
    select(avx2_supported() ? Backend::avx2 : Backend::scalar);
}

}  // namespace

const char* backend_name(Backend b) {
  return b == Backend::avx2 ? "avx2" : "scalar";
}

bool backend_available(Backend b) {
  if (b == Backend::scalar) return true;
  return avx2_supported();
}

Backend active_backend() {
  init_once();
  return current_backend.load(std::memory_order_relaxed);
}

void force_backend(Backend b) {
  if (!backend_available(b))
    throw std::invalid_argument(std::string("kernel backend not available: ") +
                                backend_name(b));
  select(b);
}

void reset_backend() {
  select(avx2_supported() ? Backend::avx2 : Backend::scalar);
}

namespace detail {
const KernelTable& table() {
  init_once();
  return *current.load(std::memory_order_relaxed);
}
}  // namespace detail

}  // namespace defi::kernels
