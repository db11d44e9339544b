#include <cmath>

#include "audioshield/kernels.hpp"

// Reference backend. Fused operations use std::fma so that results match the
// AVX2 backend bit-for-bit (both are single correctly-rounded operations).

namespace audioshield::kernels {
namespace {

double s_dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc = std::fma(a[i], b[i], acc);
  return acc;
}

double s_dot_wf(const float* w, const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc = std::fma(static_cast<double>(w[i]), x[i], acc);
  return acc;
}

double s_sum(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

double s_sum_abs_diff(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += std::fabs(a[i] - b[i]);
  return acc;
}

double s_max_abs(const double* x, std::size_t n) {
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i) m = std::fmax(m, std::fabs(x[i]));
  return m;
}

void s_axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = std::fma(a, x[i], y[i]);
}

void s_axpy_wf(double a, const float* w, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = std::fma(a, static_cast<double>(w[i]), y[i]);
}

void s_madd(const double* a, const double* b, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = std::fma(a[i], b[i], y[i]);
}

void s_scale(double a, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

void s_clamp(double* x, std::size_t n, double lo, double hi) {
  for (std::size_t i = 0; i < n; ++i) x[i] = std::fmin(std::fmax(x[i], lo), hi);
}

void s_clamp_ball(double* x, const double* c, double r, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] = std::fmin(std::fmax(x[i], c[i] - r), c[i] + r);
}

void s_quantize_lattice(double* x, std::size_t n, double q) {
  const double up = 32768.0 / q;
  const double down = q / 32768.0;
  for (std::size_t i = 0; i < n; ++i) x[i] = std::nearbyint(x[i] * up) * down;
}

void s_relu(double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] = std::fmax(x[i], 0.0);
}

}  // namespace

const detail::Ops& detail::scalar_ops() {
  static const Ops ops = {s_dot,  s_dot_wf, s_sum,   s_sum_abs_diff,     s_max_abs, s_axpy, s_axpy_wf,
                          s_madd, s_scale,  s_clamp, s_clamp_ball, s_quantize_lattice, s_relu};
  return ops;
}

}  // namespace audioshield::kernels
