#pragma once

#include <cstddef>
#include <string>

namespace audioshield::kernels {

/// Arithmetic inner loops used by the hot paths (classifier matvecs, MDCT
/// basis projections, L1 reductions, per-sample clamps). Every operation has
/// a scalar reference implementation and, on x86-64, an AVX2+FMA variant.
/// The backend is picked once at startup from CPUID; AUDIOSHIELD_SIMD=scalar
/// or =avx2 overrides it. Elementwise operations are bit-identical across
/// backends; reductions agree to roundoff (the accumulation order differs).

enum class Backend { scalar, avx2 };

Backend active_backend();
bool avx2_supported();
const char* backend_name(Backend b);

/// Force a backend (testing hook). Throws audioshield::Error if unsupported.
void force_backend(Backend b);

// reductions
double dot(const double* a, const double* b, std::size_t n);
double dot_wf(const float* w, const double* x, std::size_t n);
double sum(const double* x, std::size_t n);
double sum_abs_diff(const double* a, const double* b, std::size_t n);
double max_abs(const double* x, std::size_t n);

// elementwise (bit-identical across backends)
void axpy(double a, const double* x, double* y, std::size_t n);        // y += a*x
void axpy_wf(double a, const float* w, double* y, std::size_t n);      // y += a*w
void madd(const double* a, const double* b, double* y, std::size_t n); // y += a.*b
void scale(double a, double* x, std::size_t n);                        // x *= a
void clamp(double* x, std::size_t n, double lo, double hi);
void clamp_ball(double* x, const double* center, double radius, std::size_t n);
void quantize_lattice(double* x, std::size_t n, double q);  // round(x*32768/q)*q/32768
void relu(double* x, std::size_t n);

namespace detail {
struct Ops {
  double (*dot)(const double*, const double*, std::size_t);
  double (*dot_wf)(const float*, const double*, std::size_t);
  double (*sum)(const double*, std::size_t);
  double (*sum_abs_diff)(const double*, const double*, std::size_t);
  double (*max_abs)(const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  void (*axpy_wf)(double, const float*, double*, std::size_t);
  void (*madd)(const double*, const double*, double*, std::size_t);
  void (*scale)(double, double*, std::size_t);
  void (*clamp)(double*, std::size_t, double, double);
  void (*clamp_ball)(double*, const double*, double, std::size_t);
  void (*quantize_lattice)(double*, std::size_t, double);
  void (*relu)(double*, std::size_t);
};
const Ops& scalar_ops();
#if defined(AUDIOSHIELD_HAVE_AVX2)
const Ops& avx2_ops();
#endif
}  // namespace detail

}  // namespace audioshield::kernels
