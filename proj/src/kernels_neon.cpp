// NEON kernel variants for aarch64 builds. Mirrors the AVX2 file with 4-wide
// lanes; equivalence-tested against the scalar reference on ARM hosts.

#if defined(__aarch64__) || defined(_M_ARM64)

#include <arm_neon.h>

#include "vidinfer/kernels.hpp"

namespace vidinfer::kernels {
namespace {

float dot_neon(const float* a, const float* b, std::size_t n) {
    float32x4_t acc0 = vdupq_n_f32(0.0f);
    float32x4_t acc1 = vdupq_n_f32(0.0f);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = vfmaq_f32(acc0, vld1q_f32(a + i), vld1q_f32(b + i));
        acc1 = vfmaq_f32(acc1, vld1q_f32(a + i + 4), vld1q_f32(b + i + 4));
    }
    for (; i + 4 <= n; i += 4)
        acc0 = vfmaq_f32(acc0, vld1q_f32(a + i), vld1q_f32(b + i));
    float sum = vaddvq_f32(vaddq_f32(acc0, acc1));
    for (; i < n; ++i) sum += a[i] * b[i];
    return sum;
}

void add_neon(float* dst, const float* src, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        vst1q_f32(dst + i, vaddq_f32(vld1q_f32(dst + i), vld1q_f32(src + i)));
    for (; i < n; ++i) dst[i] += src[i];
}

void scale_neon(float* v, float s, std::size_t n) {
    const float32x4_t vs = vdupq_n_f32(s);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        vst1q_f32(v + i, vmulq_f32(vld1q_f32(v + i), vs));
    for (; i < n; ++i) v[i] *= s;
}

std::size_t argmax_neon(const float* v, std::size_t n) {
    if (n == 0) return 0;
    float best = v[0];
    std::size_t best_idx = 0;
    std::size_t i = 0;
    if (n >= 4) {
        float32x4_t vmax = vld1q_f32(v);
        const uint32x4_t base = {0u, 1u, 2u, 3u};
        uint32x4_t vidx = base;
        uint32x4_t cur = base;
        const uint32x4_t step = vdupq_n_u32(4u);
        for (i = 4; i + 4 <= n; i += 4) {
            cur = vaddq_u32(cur, step);
            const float32x4_t x = vld1q_f32(v + i);
            // Strict greater-than keeps the earliest index per lane.
            const uint32x4_t gt = vcgtq_f32(x, vmax);
            vmax = vbslq_f32(gt, x, vmax);
            vidx = vbslq_u32(gt, cur, vidx);
        }
        float lane_val[4];
        uint32_t lane_idx[4];
        vst1q_f32(lane_val, vmax);
        vst1q_u32(lane_idx, vidx);
        best = lane_val[0];
        best_idx = lane_idx[0];
        for (int l = 1; l < 4; ++l) {
            const std::size_t idx = lane_idx[l];
            if (lane_val[l] > best || (lane_val[l] == best && idx < best_idx)) {
                best = lane_val[l];
                best_idx = idx;
            }
        }
    }
    for (; i < n; ++i) {
        if (v[i] > best) {
            best = v[i];
            best_idx = i;
        }
    }
    return best_idx;
}

}  // namespace

const Ops& neon_ops() {
    static const Ops ops{"neon", dot_neon, add_neon, scale_neon, argmax_neon};
    return ops;
}

}  // namespace vidinfer::kernels

#endif  // aarch64
