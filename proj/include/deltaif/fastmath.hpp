#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>

#ifdef __AVX2__
#include <immintrin.h>
#endif

namespace deltaif {

// Vectorized exp over a contiguous block, Cephes 2/3 rational form with
// Cody-Waite argument reduction. Accurate to ~1 ulp on the clamped range,
// deterministic, and identical run to run. The scalar tail mirrors the
// vector lanes through explicit fma so results do not depend on where an
// element falls in the block.

namespace fastmath_detail {

constexpr double kLog2E = 1.4426950408889634073599;
constexpr double kC1 = 6.93145751953125e-1;
constexpr double kC2 = 1.42860682030941723212e-6;
constexpr double kP0 = 1.26177193074810590878e-4;
constexpr double kP1 = 3.02994407707441961300e-2;
constexpr double kP2 = 9.99999999999999999910e-1;
constexpr double kQ0 = 3.00198505138664455042e-6;
constexpr double kQ1 = 2.52448340349684104192e-3;
constexpr double kQ2 = 2.27265548208155028766e-1;
constexpr double kQ3 = 2.00000000000000000005e0;
constexpr double kClamp = 700.0;

inline double exp_one(double x) {
    x = x > kClamp ? kClamp : (x < -kClamp ? -kClamp : x);
    const double nd = std::nearbyint(kLog2E * x);
    x = std::fma(-nd, kC1, x);
    x = std::fma(-nd, kC2, x);
    const double xx = x * x;
    const double px = x * std::fma(xx, std::fma(xx, kP0, kP1), kP2);
    const double qx = std::fma(xx, std::fma(xx, std::fma(xx, kQ0, kQ1), kQ2), kQ3);
    const double e = std::fma(2.0, px / (qx - px), 1.0);
    const std::int64_t bits = (static_cast<std::int64_t>(static_cast<int>(nd)) + 1023) << 52;
    double scale;
    std::memcpy(&scale, &bits, sizeof(scale));
    return e * scale;
}

} // namespace fastmath_detail

inline void vexp(double* a, std::size_t n) {
    using namespace fastmath_detail;
    std::size_t i = 0;
#ifdef __AVX2__
    const __m256d log2e = _mm256_set1_pd(kLog2E);
    const __m256d c1 = _mm256_set1_pd(kC1);
    const __m256d c2 = _mm256_set1_pd(kC2);
    const __m256d p0 = _mm256_set1_pd(kP0);
    const __m256d p1 = _mm256_set1_pd(kP1);
    const __m256d p2 = _mm256_set1_pd(kP2);
    const __m256d q0 = _mm256_set1_pd(kQ0);
    const __m256d q1 = _mm256_set1_pd(kQ1);
    const __m256d q2 = _mm256_set1_pd(kQ2);
    const __m256d q3 = _mm256_set1_pd(kQ3);
    const __m256d hi = _mm256_set1_pd(kClamp);
    const __m256d lo = _mm256_set1_pd(-kClamp);
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d two = _mm256_set1_pd(2.0);
    const __m128i bias = _mm_set1_epi32(1023);
    for (; i + 4 <= n; i += 4) {
        __m256d x = _mm256_loadu_pd(a + i);
        x = _mm256_min_pd(hi, _mm256_max_pd(lo, x));
        const __m256d nd =
            _mm256_round_pd(_mm256_mul_pd(log2e, x), _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
        x = _mm256_fnmadd_pd(nd, c1, x);
        x = _mm256_fnmadd_pd(nd, c2, x);
        const __m256d xx = _mm256_mul_pd(x, x);
        const __m256d px =
            _mm256_mul_pd(x, _mm256_fmadd_pd(xx, _mm256_fmadd_pd(xx, p0, p1), p2));
        const __m256d qx = _mm256_fmadd_pd(
            xx, _mm256_fmadd_pd(xx, _mm256_fmadd_pd(xx, q0, q1), q2), q3);
        const __m256d e =
            _mm256_fmadd_pd(two, _mm256_div_pd(px, _mm256_sub_pd(qx, px)), one);
        const __m128i n32 = _mm_add_epi32(_mm256_cvtpd_epi32(nd), bias);
        const __m256i n64 = _mm256_slli_epi64(_mm256_cvtepi32_epi64(n32), 52);
        _mm256_storeu_pd(a + i, _mm256_mul_pd(e, _mm256_castsi256_pd(n64)));
    }
#endif
    for (; i < n; ++i) a[i] = exp_one(a[i]);
}

// In-place logistic over a block: a <- 1 / (1 + exp(-a)).
inline void sigmoid_block(double* a, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) a[i] = -a[i];
    vexp(a, n);
    for (std::size_t i = 0; i < n; ++i) a[i] = 1.0 / (1.0 + a[i]);
}

// In-place tanh over a block via a <- 1 - 2 / (exp(2a) + 1).
inline void tanh_block(double* a, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) a[i] = 2.0 * a[i];
    vexp(a, n);
    for (std::size_t i = 0; i < n; ++i) a[i] = 1.0 - 2.0 / (a[i] + 1.0);
}

} // namespace deltaif
