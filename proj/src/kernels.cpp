#include "vidinfer/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <cstring>

namespace vidinfer::kernels {
namespace {

const Ops* resolve(std::string_view name) {
    if (name == "scalar") return &scalar_ops();
#if defined(__x86_64__) || defined(_M_X64)
    if (name == "avx2" && avx2_available()) return &avx2_ops();
#endif
#if defined(__aarch64__) || defined(_M_ARM64)
    if (name == "neon") return &neon_ops();
#endif
    return nullptr;
}

const Ops* best_available() {
#if defined(__x86_64__) || defined(_M_X64)
    if (avx2_available()) return &avx2_ops();
#endif
#if defined(__aarch64__) || defined(_M_ARM64)
    return &neon_ops();
#endif
    return &scalar_ops();
}

const Ops* initial_pick() {
    if (const char* env = std::getenv("VIDINFER_KERNELS")) {
        if (const Ops* ops = resolve(env)) return ops;
    }
    return best_available();
}

std::atomic<const Ops*> g_active{nullptr};

}  // namespace

const Ops& active_ops() {
    const Ops* ops = g_active.load(std::memory_order_acquire);
    if (!ops) {
        ops = initial_pick();
        g_active.store(ops, std::memory_order_release);
    }
    return *ops;
}

bool select_backend(std::string_view name) {
    const Ops* ops = name == "auto" ? best_available() : resolve(name);
    if (!ops) return false;
    g_active.store(ops, std::memory_order_release);
    return true;
}

std::string_view backend_name() { return active_ops().name; }

float dot(std::span<const float> a, std::span<const float> b) {
    const std::size_t n = std::min(a.size(), b.size());
    return active_ops().dot(a.data(), b.data(), n);
}

float l2_norm(std::span<const float> v) {
    return std::sqrt(active_ops().dot(v.data(), v.data(), v.size()));
}

bool normalize(std::span<float> v) {
    const float norm = l2_norm(v);
    if (!(norm > 1e-12f)) return false;
    active_ops().scale_inplace(v.data(), 1.0f / norm, v.size());
    return true;
}

void mean_pool(const float* vecs, std::size_t count, std::size_t dim, float* out) {
    std::memset(out, 0, dim * sizeof(float));
    if (count == 0) return;
    const Ops& ops = active_ops();
    for (std::size_t r = 0; r < count; ++r) ops.add_inplace(out, vecs + r * dim, dim);
    ops.scale_inplace(out, 1.0f / static_cast<float>(count), dim);
}

std::size_t argmax(std::span<const float> v) {
    return active_ops().argmax(v.data(), v.size());
}

void dot_matrix(const float* queries, std::size_t q_count, const float* keys,
                std::size_t k_count, std::size_t dim, float* out) {
    const Ops& ops = active_ops();
    for (std::size_t q = 0; q < q_count; ++q) {
        const float* qv = queries + q * dim;
        float* row = out + q * k_count;
        for (std::size_t k = 0; k < k_count; ++k)
            row[k] = ops.dot(qv, keys + k * dim, dim);
    }
}

}  // namespace vidinfer::kernels
