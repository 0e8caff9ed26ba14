// Scalar reference kernels. These are the ground truth for the SIMD variants;
// keep them boring.

#include "vidinfer/kernels.hpp"

namespace vidinfer::kernels {
namespace {

float dot_scalar(const float* a, const float* b, std::size_t n) {
    float acc = 0.0f;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void add_scalar(float* dst, const float* src, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] += src[i];
}

void scale_scalar(float* v, float s, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) v[i] *= s;
}

std::size_t argmax_scalar(const float* v, std::size_t n) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

}  // namespace

const Ops& scalar_ops() {
    static const Ops ops{"scalar", dot_scalar, add_scalar, scale_scalar, argmax_scalar};
    return ops;
}

}  // namespace vidinfer::kernels
