// Kernel dispatch: SIMD variants must match the scalar reference (tolerance
// for dot products, exact for argmax including tie handling).

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "vidinfer/kernels.hpp"

using namespace vidinfer;

namespace {

std::vector<float> random_vec(std::mt19937& rng, std::size_t n, float lo = -1.0f,
                              float hi = 1.0f) {
    std::uniform_real_distribution<float> dist(lo, hi);
    std::vector<float> v(n);
    for (auto& x : v) x = dist(rng);
    return v;
}

std::vector<const kernels::Ops*> simd_variants() {
    std::vector<const kernels::Ops*> out;
#if defined(__x86_64__) || defined(_M_X64)
    if (kernels::avx2_available()) out.push_back(&kernels::avx2_ops());
#endif
#if defined(__aarch64__) || defined(_M_ARM64)
    out.push_back(&kernels::neon_ops());
#endif
    return out;
}

}  // namespace

TEST_CASE("dot: SIMD variants match scalar within tolerance") {
    std::mt19937 rng(7);
    const auto& scalar = kernels::scalar_ops();
    for (const auto* ops : simd_variants()) {
        for (const std::size_t n : {0UL, 1UL, 3UL, 7UL, 8UL, 9UL, 15UL, 16UL, 17UL, 64UL, 513UL}) {
            const auto a = random_vec(rng, n);
            const auto b = random_vec(rng, n);
            const float expect = scalar.dot(a.data(), b.data(), n);
            const float got = ops->dot(a.data(), b.data(), n);
            CHECK(std::abs(expect - got) <= 1e-4f * (1.0f + std::abs(expect)));
        }
    }
}

TEST_CASE("argmax: SIMD variants match scalar exactly, ties to lowest index") {
    std::mt19937 rng(11);
    const auto& scalar = kernels::scalar_ops();
    for (const auto* ops : simd_variants()) {
        for (int trial = 0; trial < 500; ++trial) {
            std::uniform_int_distribution<std::size_t> len_dist(1, 100);
            const std::size_t n = len_dist(rng);
            auto v = random_vec(rng, n);
            // Plant duplicate maxima in about half the trials.
            if (trial % 2 == 0 && n >= 2) {
                const std::size_t where = len_dist(rng) % n;
                v[where] = v[scalar.argmax(v.data(), n)];
            }
            CHECK(ops->argmax(v.data(), n) == scalar.argmax(v.data(), n));
        }
        // All-equal vector: index 0 wins.
        const std::vector<float> flat(40, 0.25f);
        CHECK(ops->argmax(flat.data(), flat.size()) == 0);
    }
}

TEST_CASE("add/scale: SIMD variants match scalar") {
    std::mt19937 rng(13);
    const auto& scalar = kernels::scalar_ops();
    for (const auto* ops : simd_variants()) {
        const std::size_t n = 37;
        auto a1 = random_vec(rng, n);
        auto a2 = a1;
        const auto b = random_vec(rng, n);
        scalar.add_inplace(a1.data(), b.data(), n);
        ops->add_inplace(a2.data(), b.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(a1[i] == doctest::Approx(a2[i]).epsilon(1e-6));

        auto s1 = random_vec(rng, n);
        auto s2 = s1;
        scalar.scale_inplace(s1.data(), 0.37f, n);
        ops->scale_inplace(s2.data(), 0.37f, n);
        for (std::size_t i = 0; i < n; ++i) CHECK(s1[i] == doctest::Approx(s2[i]).epsilon(1e-6));
    }
}

TEST_CASE("normalize produces unit vectors and rejects zero input") {
    std::mt19937 rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        auto v = random_vec(rng, 24, -5.0f, 5.0f);
        v[0] += 0.1f;  // avoid the all-zero corner
        REQUIRE(kernels::normalize(v));
        CHECK(kernels::l2_norm(v) == doctest::Approx(1.0).epsilon(1e-5));
    }
    std::vector<float> zero(8, 0.0f);
    CHECK_FALSE(kernels::normalize(zero));
}

TEST_CASE("mean_pool averages rows") {
    const std::size_t dim = 4;
    const std::vector<float> rows{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0};
    std::vector<float> out(dim);
    kernels::mean_pool(rows.data(), 3, dim, out.data());
    CHECK(out[0] == doctest::Approx(1.0 / 3));
    CHECK(out[1] == doctest::Approx(1.0 / 3));
    CHECK(out[2] == doctest::Approx(1.0 / 3));
    CHECK(out[3] == doctest::Approx(0.0));
}

TEST_CASE("dot_matrix matches per-pair dot") {
    std::mt19937 rng(23);
    const std::size_t q = 5, k = 9, dim = 33;
    const auto queries = random_vec(rng, q * dim);
    const auto keys = random_vec(rng, k * dim);
    std::vector<float> out(q * k);
    kernels::dot_matrix(queries.data(), q, keys.data(), k, dim, out.data());
    const auto& scalar = kernels::scalar_ops();
    for (std::size_t i = 0; i < q; ++i)
        for (std::size_t j = 0; j < k; ++j) {
            const float expect = scalar.dot(queries.data() + i * dim, keys.data() + j * dim, dim);
            CHECK(out[i * k + j] == doctest::Approx(expect).epsilon(1e-4));
        }
}

TEST_CASE("backend selection") {
    CHECK(kernels::select_backend("scalar"));
    CHECK(kernels::backend_name() == "scalar");
    CHECK_FALSE(kernels::select_backend("no-such-backend"));
    CHECK(kernels::select_backend("auto"));
#if defined(__x86_64__) || defined(_M_X64)
    if (kernels::avx2_available()) CHECK(kernels::backend_name() == "avx2");
#endif
}
