#pragma once
// Low-level dense vector kernels used by the coordinate-descent solvers.
// A scalar reference implementation always exists; on x86-64 an AVX2+FMA
// variant is compiled into its own translation unit and selected at runtime.
#include <cstddef>

namespace defi::kernels {

enum class Backend { scalar, avx2 };

const char* backend_name(Backend b);

// Backend chosen at startup (CPU detection), unless overridden.
Backend active_backend();
bool backend_available(Backend b);

// Override dispatch, e.g. to compare backends in tests.  Throws
// std::invalid_argument if the requested backend is not available.
void force_backend(Backend b);
void reset_backend();

namespace detail {
struct KernelTable {
  double (*dot)(const double*, const double*, std::size_t);
  double (*dot3)(const double*, const double*, const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  double (*nrm2_sq)(const double*, std::size_t);
  void (*scal)(double, double*, std::size_t);
};
const KernelTable& table();
}  // namespace detail

// sum_i x_i * y_i
inline double dot(const double* x, const double* y, std::size_t n) {
  return detail::table().dot(x, y, n);
}

// sum_i x_i * y_i * w_i (weighted inner product)
inline double dot3(const double* x, const double* y, const double* w, std::size_t n) {
  return detail::table().dot3(x, y, w, n);
}

// y += a * x
inline void axpy(double a, const double* x, double* y, std::size_t n) {
  detail::table().axpy(a, x, y, n);
}

// sum_i x_i^2
inline double nrm2_sq(const double* x, std::size_t n) {
  return detail::table().nrm2_sq(x, n);
}

// x *= a
inline void scal(double a, double* x, std::size_t n) {
  detail::table().scal(a, x, n);
}

}  // namespace defi::kernels
