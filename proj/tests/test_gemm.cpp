#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "wmsr/gemm.hpp"

namespace {

template <typename T>
std::vector<T> random_vec(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<T> v(n);
    for (auto& x : v) x = static_cast<T>(u(rng));
    return v;
}

struct Dims {
    std::size_t m, n, k;
};

const Dims kDims[] = {{1, 1, 1},    {3, 5, 7},     {8, 48, 256},  {9, 49, 257}, {17, 290, 3},
                      {64, 64, 64}, {5, 1000, 19}, {33, 17, 600}, {4, 16, 1},   {12, 300, 513}};

template <typename T>
void check_nn(const Dims& d, bool accumulate, double tol) {
    const auto A = random_vec<T>(d.m * d.k, 1), B = random_vec<T>(d.k * d.n, 2);
    auto C = random_vec<T>(d.m * d.n, 3);
    std::vector<double> want(d.m * d.n);
    for (std::size_t i = 0; i < d.m; ++i)
        for (std::size_t j = 0; j < d.n; ++j) {
            double s = accumulate ? double(C[i * d.n + j]) : 0.0;
            for (std::size_t p = 0; p < d.k; ++p) s += double(A[i * d.k + p]) * double(B[p * d.n + j]);
            want[i * d.n + j] = s;
        }
    wmsr::kernels::gemm_nn(d.m, d.n, d.k, A.data(), d.k, B.data(), d.n, C.data(), d.n, accumulate);
    for (std::size_t i = 0; i < C.size(); ++i)
        ASSERT_NEAR(C[i], want[i], tol * (1 + std::abs(want[i]))) << d.m << "x" << d.n << "x" << d.k << " at " << i;
}

template <typename T>
void check_nt(const Dims& d, bool accumulate, double tol) {
    const auto A = random_vec<T>(d.m * d.k, 4), B = random_vec<T>(d.n * d.k, 5);
    auto C = random_vec<T>(d.m * d.n, 6);
    std::vector<double> want(d.m * d.n);
    for (std::size_t i = 0; i < d.m; ++i)
        for (std::size_t j = 0; j < d.n; ++j) {
            double s = accumulate ? double(C[i * d.n + j]) : 0.0;
            for (std::size_t p = 0; p < d.k; ++p) s += double(A[i * d.k + p]) * double(B[j * d.k + p]);
            want[i * d.n + j] = s;
        }
    wmsr::kernels::gemm_nt(d.m, d.n, d.k, A.data(), d.k, B.data(), d.k, C.data(), d.n, accumulate);
    for (std::size_t i = 0; i < C.size(); ++i)
        ASSERT_NEAR(C[i], want[i], tol * (1 + std::abs(want[i]))) << d.m << "x" << d.n << "x" << d.k << " at " << i;
}

}  // namespace

TEST(Gemm, NnMatchesNaiveDouble) {
    for (const auto& d : kDims) {
        check_nn<double>(d, false, 1e-12);
        check_nn<double>(d, true, 1e-12);
    }
}

TEST(Gemm, NnMatchesNaiveFloat) {
    for (const auto& d : kDims) check_nn<float>(d, true, 1e-4);
}

TEST(Gemm, NtMatchesNaiveDouble) {
    for (const auto& d : kDims) {
        check_nt<double>(d, false, 1e-12);
        check_nt<double>(d, true, 1e-12);
    }
}

TEST(Gemm, NtMatchesNaiveFloat) {
    for (const auto& d : kDims) check_nt<float>(d, false, 1e-4);
}

TEST(Gemm, RespectsLeadingDimensions) {
    // Operate on a 5x6 window of larger row-major buffers.
    const std::size_t M = 5, N = 6, K = 4, lda = 9, ldb = 11, ldc = 13;
    const auto A = random_vec<double>(M * lda, 7), B = random_vec<double>(K * ldb, 8);
    std::vector<double> C(M * ldc, -7.0);
    wmsr::kernels::gemm_nn(M, N, K, A.data(), lda, B.data(), ldb, C.data(), ldc, false);
    for (std::size_t i = 0; i < M; ++i)
        for (std::size_t j = 0; j < ldc; ++j) {
            if (j >= N) {
                EXPECT_EQ(C[i * ldc + j], -7.0);
                continue;
            }
            double s = 0;
            for (std::size_t p = 0; p < K; ++p) s += A[i * lda + p] * B[p * ldb + j];
            EXPECT_NEAR(C[i * ldc + j], s, 1e-14);
        }
}

TEST(Gemm, TransposeRoundTrip) {
    const auto src = random_vec<float>(37 * 21, 9);
    std::vector<float> t(src.size()), back(src.size());
    wmsr::kernels::transpose(37, 21, src.data(), t.data());
    wmsr::kernels::transpose(21, 37, t.data(), back.data());
    EXPECT_EQ(t[5 * 37 + 3], src[3 * 21 + 5]);
    EXPECT_EQ(back, src);
}
