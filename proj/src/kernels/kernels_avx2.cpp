#if defined(AUDIOSHIELD_HAVE_AVX2)

#include <immintrin.h>

#include <cmath>

#include "audioshield/kernels.hpp"

// AVX2+FMA backend, compiled with -mavx2 -mfma. Elementwise operations mirror
// the scalar formulas exactly (same fused ops, same rounding mode) so the two
// backends are interchangeable bit-for-bit; reductions use four lanes and a
// scalar tail.

namespace audioshield::kernels {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d swapped = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

double v_dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc = std::fma(a[i], b[i], acc);
  return acc;
}

double v_dot_wf(const float* w, const double* x, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 wf = _mm256_loadu_ps(w + i);
    __m256d wlo = _mm256_cvtps_pd(_mm256_castps256_ps128(wf));
    __m256d whi = _mm256_cvtps_pd(_mm256_extractf128_ps(wf, 1));
    acc0 = _mm256_fmadd_pd(wlo, _mm256_loadu_pd(x + i), acc0);
    acc1 = _mm256_fmadd_pd(whi, _mm256_loadu_pd(x + i + 4), acc1);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc = std::fma(static_cast<double>(w[i]), x[i], acc);
  return acc;
}

double v_sum(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  double s = hsum(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

const __m256d kAbsMask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7fffffffffffffffLL));

double v_sum_abs_diff(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_add_pd(acc, _mm256_and_pd(d, kAbsMask));
  }
  double s = hsum(acc);
  for (; i < n; ++i) s += std::fabs(a[i] - b[i]);
  return s;
}

double v_max_abs(const double* x, std::size_t n) {
  __m256d m = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) m = _mm256_max_pd(m, _mm256_and_pd(_mm256_loadu_pd(x + i), kAbsMask));
  __m128d lo = _mm_max_pd(_mm256_castpd256_pd128(m), _mm256_extractf128_pd(m, 1));
  double r = _mm_cvtsd_f64(_mm_max_sd(lo, _mm_unpackhi_pd(lo, lo)));
  for (; i < n; ++i) r = std::fmax(r, std::fabs(x[i]));
  return r;
}

void v_axpy(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] = std::fma(a, x[i], y[i]);
}

void v_axpy_wf(double a, const float* w, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d wd = _mm256_cvtps_pd(_mm_loadu_ps(w + i));
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, wd, _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] = std::fma(a, static_cast<double>(w[i]), y[i]);
}

void v_madd(const double* a, const double* b, double* y, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(
        y + i, _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] = std::fma(a[i], b[i], y[i]);
}

void v_scale(double a, double* x, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(x + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), va));
  for (; i < n; ++i) x[i] *= a;
}

void v_clamp(double* x, std::size_t n, double lo, double hi) {
  const __m256d vlo = _mm256_set1_pd(lo);
  const __m256d vhi = _mm256_set1_pd(hi);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(x + i, _mm256_min_pd(_mm256_max_pd(_mm256_loadu_pd(x + i), vlo), vhi));
  for (; i < n; ++i) x[i] = std::fmin(std::fmax(x[i], lo), hi);
}

void v_clamp_ball(double* x, const double* c, double r, std::size_t n) {
  const __m256d vr = _mm256_set1_pd(r);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vc = _mm256_loadu_pd(c + i);
    __m256d lo = _mm256_sub_pd(vc, vr);
    __m256d hi = _mm256_add_pd(vc, vr);
    _mm256_storeu_pd(x + i, _mm256_min_pd(_mm256_max_pd(_mm256_loadu_pd(x + i), lo), hi));
  }
  for (; i < n; ++i) x[i] = std::fmin(std::fmax(x[i], c[i] - r), c[i] + r);
}

void v_quantize_lattice(double* x, std::size_t n, double q) {
  const double up = 32768.0 / q;
  const double down = q / 32768.0;
  const __m256d vup = _mm256_set1_pd(up);
  const __m256d vdown = _mm256_set1_pd(down);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d t = _mm256_mul_pd(_mm256_loadu_pd(x + i), vup);
    t = _mm256_round_pd(t, _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    _mm256_storeu_pd(x + i, _mm256_mul_pd(t, vdown));
  }
  for (; i < n; ++i) x[i] = std::nearbyint(x[i] * up) * down;
}

void v_relu(double* x, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(x + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
  for (; i < n; ++i) x[i] = std::fmax(x[i], 0.0);
}

}  // namespace

const detail::Ops& detail::avx2_ops() {
  static const Ops ops = {v_dot,  v_dot_wf, v_sum,   v_sum_abs_diff,     v_max_abs, v_axpy, v_axpy_wf,
                          v_madd, v_scale,  v_clamp, v_clamp_ball, v_quantize_lattice, v_relu};
  return ops;
}

}  // namespace audioshield::kernels

#endif  // AUDIOSHIELD_HAVE_AVX2
