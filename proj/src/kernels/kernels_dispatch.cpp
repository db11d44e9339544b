#include <atomic>
#include <cstdlib>
#include <string>

#include "audioshield/errors.hpp"
#include "audioshield/kernels.hpp"

namespace audioshield::kernels {
namespace {

const detail::Ops* g_ops = nullptr;
Backend g_backend = Backend::scalar;

bool cpu_has_avx2() {
#if defined(AUDIOSHIELD_HAVE_AVX2)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

void select(Backend b) {
#if defined(AUDIOSHIELD_HAVE_AVX2)
  if (b == Backend::avx2) {
    g_ops = &detail::avx2_ops();
    g_backend = Backend::avx2;
    return;
  }
#endif
  if (b == Backend::avx2) throw Error("AVX2 kernel backend not available on this build/CPU");
  g_ops = &detail::scalar_ops();
  g_backend = Backend::scalar;
}

void init_once() {
  if (g_ops) return;
  Backend b = cpu_has_avx2() ? Backend::avx2 : Backend::scalar;
  if (const char* env = std::getenv("AUDIOSHIELD_SIMD")) {
    const std::string v(env);
    if (v == "scalar") b = Backend::scalar;
    else if (v == "avx2") b = Backend::avx2;
    else if (!v.empty() && v != "auto") throw ConfigError("AUDIOSHIELD_SIMD must be scalar, avx2 or auto");
  }
  select(b);
}

inline const detail::Ops& ops() {
  if (!g_ops) init_once();
  return *g_ops;
}

}  // namespace

Backend active_backend() {
  if (!g_ops) init_once();
  return g_backend;
}

bool avx2_supported() { return cpu_has_avx2(); }

const char* backend_name(Backend b) { return b == Backend::avx2 ? "avx2" : "scalar"; }

void force_backend(Backend b) { select(b); }

double dot(const double* a, const double* b, std::size_t n) { return ops().dot(a, b, n); }
double dot_wf(const float* w, const double* x, std::size_t n) { return ops().dot_wf(w, x, n); }
double sum(const double* x, std::size_t n) { return ops().sum(x, n); }
double sum_abs_diff(const double* a, const double* b, std::size_t n) { return ops().sum_abs_diff(a, b, n); }
double max_abs(const double* x, std::size_t n) { return ops().max_abs(x, n); }
void axpy(double a, const double* x, double* y, std::size_t n) { ops().axpy(a, x, y, n); }
void axpy_wf(double a, const float* w, double* y, std::size_t n) { ops().axpy_wf(a, w, y, n); }
void madd(const double* a, const double* b, double* y, std::size_t n) { ops().madd(a, b, y, n); }
void scale(double a, double* x, std::size_t n) { ops().scale(a, x, n); }
void clamp(double* x, std::size_t n, double lo, double hi) { ops().clamp(x, n, lo, hi); }
void clamp_ball(double* x, const double* c, double r, std::size_t n) { ops().clamp_ball(x, c, r, n); }
void quantize_lattice(double* x, std::size_t n, double q) { ops().quantize_lattice(x, n, q); }
void relu(double* x, std::size_t n) { ops().relu(x, n); }

}  // namespace audioshield::kernels
