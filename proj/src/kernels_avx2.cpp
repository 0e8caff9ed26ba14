// AVX2 + FMA kernel variants. This translation unit is compiled with
// -mavx2 -mfma; callers must gate on avx2_available() before dispatching here.

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include "vidinfer/kernels.hpp"

namespace vidinfer::kernels {
namespace {

float dot_avx2(const float* a, const float* b, std::size_t n) {
    __m256 acc0 = _mm256_setzero_ps();
    __m256 acc1 = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 16 <= n; i += 16) {
        acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
        acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i + 8), _mm256_loadu_ps(b + i + 8), acc1);
    }
    for (; i + 8 <= n; i += 8)
        acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
    acc0 = _mm256_add_ps(acc0, acc1);
    __m128 lo = _mm_add_ps(_mm256_castps256_ps128(acc0), _mm256_extractf128_ps(acc0, 1));
    lo = _mm_hadd_ps(lo, lo);
    lo = _mm_hadd_ps(lo, lo);
    float sum = _mm_cvtss_f32(lo);
    for (; i < n; ++i) sum += a[i] * b[i];
    return sum;
}

void add_avx2(float* dst, const float* src, std::size_t n) {
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(dst + i, _mm256_add_ps(_mm256_loadu_ps(dst + i), _mm256_loadu_ps(src + i)));
    for (; i < n; ++i) dst[i] += src[i];
}

void scale_avx2(float* v, float s, std::size_t n) {
    const __m256 vs = _mm256_set1_ps(s);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(v + i, _mm256_mul_ps(_mm256_loadu_ps(v + i), vs));
    for (; i < n; ++i) v[i] *= s;
}

std::size_t argmax_avx2(const float* v, std::size_t n) {
    if (n == 0) return 0;
    float best = v[0];
    std::size_t best_idx = 0;
    std::size_t i = 0;
    if (n >= 8) {
        __m256 vmax = _mm256_loadu_ps(v);
        __m256i vidx = _mm256_setr_epi32(0, 1, 2, 3, 4, 5, 6, 7);
        __m256i cur = vidx;
        const __m256i step = _mm256_set1_epi32(8);
        for (i = 8; i + 8 <= n; i += 8) {
            cur = _mm256_add_epi32(cur, step);
            const __m256 x = _mm256_loadu_ps(v + i);
            // Strict greater-than keeps the earliest index per lane.
            const __m256 gt = _mm256_cmp_ps(x, vmax, _CMP_GT_OQ);
            vmax = _mm256_blendv_ps(vmax, x, gt);
            vidx = _mm256_blendv_epi8(vidx, cur, _mm256_castps_si256(gt));
        }
        alignas(32) float lane_val[8];
        alignas(32) int lane_idx[8];
        _mm256_store_ps(lane_val, vmax);
        _mm256_store_si256(reinterpret_cast<__m256i*>(lane_idx), vidx);
        best = lane_val[0];
        best_idx = static_cast<std::size_t>(lane_idx[0]);
        for (int l = 1; l < 8; ++l) {
            const auto idx = static_cast<std::size_t>(lane_idx[l]);
            if (lane_val[l] > best || (lane_val[l] == best && idx < best_idx)) {
                best = lane_val[l];
                best_idx = idx;
            }
        }
    }
    // Tail indices are all above the vector part, so strict > suffices.
    for (; i < n; ++i) {
        if (v[i] > best) {
            best = v[i];
            best_idx = i;
        }
    }
    return best_idx;
}

}  // namespace

const Ops& avx2_ops() {
    static const Ops ops{"avx2", dot_avx2, add_avx2, scale_avx2, argmax_avx2};
    return ops;
}

bool avx2_available() {
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

}  // namespace vidinfer::kernels

#endif  // x86_64
