#include <gtest/gtest.h>

#include <complex>
#include <cstdlib>
#include <string>

#include "convkernel/simd/kernels.hpp"
#include "test_support.hpp"

using namespace convkernel;
using cplx = std::complex<double>;

namespace {

// Reductions differ only in summation order; the bound is relative to sum |a_i b_i|.
constexpr double kTol = 1e-13;

std::vector<std::size_t> lengths() {
  std::vector<std::size_t> n;
  for (std::size_t i = 0; i <= 40; ++i) n.push_back(i);
  for (std::size_t i : {63, 64, 65, 127, 255, 1000, 4097}) n.push_back(i);
  return n;
}

std::vector<cplx> random_complex(Rng& rng, std::size_t n) {
  std::vector<cplx> v(n);
  for (auto& z : v) z = {rng.normal(), rng.normal()};
  return v;
}

class SimdEquivalence : public ::testing::Test {
 protected:
  void SetUp() override {
    if (!simd::avx2_available()) GTEST_SKIP() << "AVX2 variant not available on this machine";
  }
  const simd::KernelTable& ref = simd::scalar_kernels();
  const simd::KernelTable& vec = simd::kernels_for(simd::Isa::avx2);
};

}  // namespace

TEST_F(SimdEquivalence, DotAndSumSquares) {
  Rng rng(1);
  for (std::size_t n : lengths()) {
    // Unaligned starting offsets exercise the masked tails.
    for (std::size_t off : {0, 1, 3}) {
      const auto a = ck_test::random_vector(rng, n + off);
      const auto b = ck_test::random_vector(rng, n + off);
      double mag = 0.0;
      for (std::size_t i = off; i < n + off; ++i) mag += std::abs(a[i] * b[i]);
      EXPECT_NEAR(vec.dot(a.data() + off, b.data() + off, n), ref.dot(a.data() + off, b.data() + off, n),
                  kTol * (mag + 1e-300))
          << "n=" << n;
      const double ss = ref.sum_squares(a.data() + off, n);
      EXPECT_NEAR(vec.sum_squares(a.data() + off, n), ss, kTol * (ss + 1e-300)) << "n=" << n;
    }
  }
}

TEST_F(SimdEquivalence, ElementwiseKernelsAreExact) {
  Rng rng(2);
  for (std::size_t n : lengths()) {
    const auto a = ck_test::random_vector(rng, n);
    const auto b = ck_test::random_vector(rng, n);
    std::vector<double> y1 = b, y2 = b;
    ref.axpy(0.37, a.data(), y1.data(), n);
    vec.axpy(0.37, a.data(), y2.data(), n);
    // FMA contracts the multiply-add; one rounding of difference per element.
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(y1[i], y2[i], 1e-15 * (std::abs(y1[i]) + 1.0));
    std::vector<double> h1(n), h2(n);
    ref.hadamard(a.data(), b.data(), h1.data(), n);
    vec.hadamard(a.data(), b.data(), h2.data(), n);
    EXPECT_EQ(h1, h2);
  }
}

TEST_F(SimdEquivalence, ComplexKernels) {
  Rng rng(3);
  for (std::size_t n : lengths()) {
    const auto a = random_complex(rng, n);
    const auto b = random_complex(rng, n);
    auto acc1 = random_complex(rng, n);
    auto acc2 = acc1;
    ref.mul_conj_acc(a.data(), b.data(), acc1.data(), n);
    vec.mul_conj_acc(a.data(), b.data(), acc2.data(), n);
    for (std::size_t i = 0; i < n; ++i) EXPECT_LT(std::abs(acc1[i] - acc2[i]), 1e-14 * (std::abs(acc1[i]) + 1.0));
    auto p1 = a, p2 = a;
    ref.cmul_inplace(p1.data(), b.data(), n);
    vec.cmul_inplace(p2.data(), b.data(), n);
    for (std::size_t i = 0; i < n; ++i) EXPECT_LT(std::abs(p1[i] - p2[i]), 1e-14 * (std::abs(p1[i]) + 1.0));
  }
}

TEST(SimdDispatch, EnvironmentOverrideSelectsScalar) {
  const char* env = std::getenv("CONVKERNEL_SIMD");
  if (env && std::string(env) == "scalar") {
    EXPECT_EQ(simd::active_isa(), simd::Isa::scalar);
  } else if (simd::avx2_available()) {
    EXPECT_EQ(simd::active_isa(), simd::Isa::avx2);
  } else {
    EXPECT_EQ(simd::active_isa(), simd::Isa::scalar);
  }
  EXPECT_FALSE(simd::isa_name(simd::active_isa()).empty());
}
