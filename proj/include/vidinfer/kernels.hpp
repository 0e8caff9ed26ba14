#pragma once

#include <cstddef>
#include <span>
#include <string_view>

namespace vidinfer::kernels {

// Dispatched primitives behind the similarity math. One table per
// instruction-set variant; the scalar table is the reference every SIMD
// variant is equivalence-tested against.
struct Ops {
    const char* name;
    float (*dot)(const float* a, const float* b, std::size_t n);
    void (*add_inplace)(float* dst, const float* src, std::size_t n);
    void (*scale_inplace)(float* v, float s, std::size_t n);
    // Index of the largest value; ties resolve to the lowest index.
    std::size_t (*argmax)(const float* v, std::size_t n);
};

const Ops& scalar_ops();

#if defined(__x86_64__) || defined(_M_X64)
const Ops& avx2_ops();
bool avx2_available();
#endif
#if defined(__aarch64__) || defined(_M_ARM64)
const Ops& neon_ops();
#endif

// Active table. Picked once (best available for this CPU, overridable with
// the VIDINFER_KERNELS env var); select_backend() switches it explicitly.
const Ops& active_ops();
bool select_backend(std::string_view name);  // "auto" | "scalar" | "avx2" | "neon"
std::string_view backend_name();

float dot(std::span<const float> a, std::span<const float> b);
float l2_norm(std::span<const float> v);
// Scales v to unit norm. Returns false (v untouched) when the norm is ~0.
bool normalize(std::span<float> v);
// out[i] = mean over the `count` rows of column i. vecs is row-major count x dim.
void mean_pool(const float* vecs, std::size_t count, std::size_t dim, float* out);
std::size_t argmax(std::span<const float> v);
// out is row-major q_count x k_count of dot products.
void dot_matrix(const float* queries, std::size_t q_count, const float* keys,
                std::size_t k_count, std::size_t dim, float* out);

}  // namespace vidinfer::kernels
