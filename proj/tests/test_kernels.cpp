#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "audioshield/kernels.hpp"
#include "audioshield/rng.hpp"
#include "helpers.hpp"

using namespace audioshield;

namespace {

const std::vector<std::size_t> kSizes = {0, 1, 3, 4, 7, 8, 9, 15, 16, 33, 100, 1000};

}  // namespace

TEST_CASE("kernels: semantic spot checks") {
  const std::vector<double> a = {1.0, 2.0, 3.0};
  const std::vector<double> b = {4.0, -5.0, 6.0};
  CHECK(kernels::dot(a.data(), b.data(), 3) == doctest::Approx(1.0 * 4 - 2 * 5 + 3 * 6));
  CHECK(kernels::sum(a.data(), 3) == doctest::Approx(6.0));
  CHECK(kernels::sum_abs_diff(a.data(), b.data(), 3) == doctest::Approx(3 + 7 + 3));
  CHECK(kernels::max_abs(b.data(), 3) == doctest::Approx(6.0));

  std::vector<double> y = {1.0, 1.0, 1.0};
  kernels::axpy(2.0, a.data(), y.data(), 3);
  CHECK(y[2] == doctest::Approx(7.0));

  std::vector<double> c = {-2.0, 0.5, 2.0};
  kernels::clamp(c.data(), 3, -1.0, 1.0);
  CHECK(c[0] == -1.0);
  CHECK(c[1] == 0.5);
  CHECK(c[2] == 1.0);

  std::vector<double> r = {-1.5, 0.0, 2.5};
  kernels::relu(r.data(), 3);
  CHECK(r[0] == 0.0);
  CHECK(r[2] == 2.5);
}

TEST_CASE("kernels: quantize_lattice puts values on the q-lattice") {
  // integer-domain sample 1000 with q = 256 rounds to 1024
  std::vector<double> x = {1000.0 / 32768.0};
  kernels::quantize_lattice(x.data(), 1, 256.0);
  CHECK(x[0] == 1024.0 / 32768.0);

  // q = 1 is the identity on PCM-originated amplitudes
  std::vector<double> pcm = {-32768.0 / 32768.0, 123.0 / 32768.0, 32767.0 / 32768.0};
  const auto before = pcm;
  kernels::quantize_lattice(pcm.data(), pcm.size(), 1.0);
  CHECK(pcm == before);
}

TEST_CASE("kernels: backend equivalence on random buffers") {
  if (!kernels::avx2_supported()) {
    WARN_MESSAGE(false, "AVX2 unavailable; equivalence not exercised");
    return;
  }
  SplitMix64 rng(20240809);
  for (std::size_t n : kSizes) {
    auto a = testutil::random_vector(n, rng, -2.0, 2.0);
    auto b = testutil::random_vector(n, rng, -2.0, 2.0);
    auto y0 = testutil::random_vector(n, rng, -2.0, 2.0);

    struct Red {
      double dot, sum, sad, maxabs, dotwf;
    };
    std::vector<float> wf(n);
    for (std::size_t i = 0; i < n; ++i) wf[i] = static_cast<float>(a[i]);

    auto run_elementwise = [&](std::vector<double> y) {
      kernels::axpy(1.7, a.data(), y.data(), n);
      kernels::axpy_wf(-0.3, wf.data(), y.data(), n);
      kernels::madd(a.data(), b.data(), y.data(), n);
      kernels::scale(0.9, y.data(), n);
      kernels::clamp(y.data(), n, -1.5, 1.5);
      kernels::clamp_ball(y.data(), a.data(), 0.25, n);
      kernels::quantize_lattice(y.data(), n, 256.0);
      kernels::relu(y.data(), n);
      return y;
    };
    auto run_reductions = [&] {
      return Red{kernels::dot(a.data(), b.data(), n), kernels::sum(a.data(), n),
                 kernels::sum_abs_diff(a.data(), b.data(), n), kernels::max_abs(b.data(), n),
                 kernels::dot_wf(wf.data(), b.data(), n)};
    };

    kernels::force_backend(kernels::Backend::scalar);
    const auto y_scalar = run_elementwise(y0);
    const auto red_scalar = run_reductions();
    kernels::force_backend(kernels::Backend::avx2);
    const auto y_avx2 = run_elementwise(y0);
    const auto red_avx2 = run_reductions();

    // elementwise paths are bit-identical
    CHECK(y_scalar == y_avx2);
    // reductions agree to accumulation roundoff
    CHECK(red_scalar.dot == doctest::Approx(red_avx2.dot).epsilon(1e-12));
    CHECK(red_scalar.sum == doctest::Approx(red_avx2.sum).epsilon(1e-12));
    CHECK(red_scalar.sad == doctest::Approx(red_avx2.sad).epsilon(1e-12));
    CHECK(red_scalar.dotwf == doctest::Approx(red_avx2.dotwf).epsilon(1e-12));
    // max is exact
    CHECK(red_scalar.maxabs == red_avx2.maxabs);
  }
}
