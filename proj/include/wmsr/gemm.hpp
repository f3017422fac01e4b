#pragma once

#include <algorithm>
#include <cstddef>
#include <cstring>
#include <memory>

#include "wmsr/parallel.hpp"

// Row-major GEMM kernels. Each output element is owned by exactly one task
// and its reduction runs in a fixed k order, so results are bit-identical
// for any thread count.

namespace wmsr::kernels {

/// Reusable per-thread buffer; contents are unspecified on return.
template <typename T>
T* scratch(std::size_t slot, std::size_t n) {
    struct Buf {
        std::unique_ptr<T[]> p;
        std::size_t cap = 0;
    };
    thread_local Buf bufs[4];
    Buf& b = bufs[slot];
    if (b.cap < n) {
        b.p.reset(new T[n]);
        b.cap = n;
    }
    return b.p.get();
}

/// dst[cols x rows] = src[rows x cols]^T (src row stride lds, dst row stride ldd).
template <typename T>
void transpose(std::size_t rows, std::size_t cols, const T* src, std::size_t lds, T* dst, std::size_t ldd) {
    constexpr std::size_t B = 16;
    for (std::size_t i0 = 0; i0 < rows; i0 += B)
        for (std::size_t j0 = 0; j0 < cols; j0 += B) {
            const std::size_t i1 = std::min(rows, i0 + B), j1 = std::min(cols, j0 + B);
            for (std::size_t i = i0; i < i1; ++i)
                for (std::size_t j = j0; j < j1; ++j) dst[j * ldd + i] = src[i * lds + j];
        }
}

template <typename T>
void transpose(std::size_t rows, std::size_t cols, const T* src, T* dst) {
    transpose(rows, cols, src, cols, dst, rows);
}

namespace detail {

template <typename T>
struct VecOf {
    typedef T type __attribute__((vector_size(64)));
};
template <typename T>
using vec = typename VecOf<T>::type;
template <typename T>
inline constexpr std::size_t kLanes = 64 / sizeof(T);

template <typename T>
inline vec<T> vload(const T* p) {
    vec<T> v;
    std::memcpy(&v, p, sizeof v);
    return v;
}
template <typename T>
inline void vstore(T* p, vec<T> v) {
    std::memcpy(p, &v, sizeof v);
}

inline constexpr std::size_t kMR = 8;        // register tile rows
inline constexpr std::size_t kNV = 3;        // register tile vectors per row
inline constexpr std::size_t kColBlock = 6;  // register tiles per column block
inline constexpr std::size_t kDepthBlock = 256;

// C[MR x NV*lanes] += A[MR x kc] * B[kc x NV*lanes], accumulators in registers.
template <typename T, std::size_t MR, std::size_t NV>
inline void micro_nn(std::size_t kc, const T* __restrict a, std::size_t lda, const T* __restrict b,
                     std::size_t ldb, T* __restrict c, std::size_t ldc) {
    constexpr std::size_t L = kLanes<T>;
    vec<T> acc[MR][NV];
#pragma GCC unroll 8
    for (std::size_t r = 0; r < MR; ++r)
#pragma GCC unroll 4
        for (std::size_t v = 0; v < NV; ++v) acc[r][v] = vload(c + r * ldc + v * L);
    for (std::size_t p = 0; p < kc; ++p) {
        vec<T> bv[NV];
#pragma GCC unroll 4
        for (std::size_t v = 0; v < NV; ++v) bv[v] = vload(b + p * ldb + v * L);
#pragma GCC unroll 8
        for (std::size_t r = 0; r < MR; ++r) {
            const T s = a[r * lda + p];
#pragma GCC unroll 4
            for (std::size_t v = 0; v < NV; ++v) acc[r][v] += s * bv[v];
        }
    }
#pragma GCC unroll 8
    for (std::size_t r = 0; r < MR; ++r)
#pragma GCC unroll 4
        for (std::size_t v = 0; v < NV; ++v) vstore(c + r * ldc + v * L, acc[r][v]);
}

// Scalar tile with runtime extents, same per-element k order as micro_nn.
template <typename T>
inline void edge_nn(std::size_t rows, std::size_t cols, std::size_t kc, const T* a, std::size_t lda, const T* b,
                    std::size_t ldb, T* c, std::size_t ldc) {
    for (std::size_t r = 0; r < rows; ++r) {
        T* __restrict crow = c + r * ldc;
        const T* arow = a + r * lda;
        for (std::size_t p = 0; p < kc; ++p) {
            const T av = arow[p];
            const T* __restrict brow = b + p * ldb;
            for (std::size_t q = 0; q < cols; ++q) crow[q] += av * brow[q];
        }
    }
}

// rows x nb tile over one depth block, dispatching to the widest kernel that fits.
template <typename T, std::size_t MR>
inline void row_strip(std::size_t nb, std::size_t kc, const T* a, std::size_t lda, const T* b, std::size_t ldb, T* c,
                      std::size_t ldc) {
    constexpr std::size_t L = kLanes<T>;
    std::size_t j = 0;
    for (; j + kNV * L <= nb; j += kNV * L) micro_nn<T, MR, kNV>(kc, a, lda, b + j, ldb, c + j, ldc);
    for (; j + L <= nb; j += L) micro_nn<T, MR, 1>(kc, a, lda, b + j, ldb, c + j, ldc);
    if (j < nb) edge_nn(MR, nb - j, kc, a, lda, b + j, ldb, c + j, ldc);
}

// Rows [i0, i1) of C += A * B.
template <typename T>
void nn_rows(std::size_t i0, std::size_t i1, std::size_t N, std::size_t K, const T* A, std::size_t lda, const T* B,
             std::size_t ldb, T* C, std::size_t ldc) {
    const std::size_t NB = kColBlock * kNV * kLanes<T>;
    for (std::size_t jb = 0; jb < N; jb += NB) {
        const std::size_t nb = std::min(NB, N - jb);
        for (std::size_t kb = 0; kb < K; kb += kDepthBlock) {
            const std::size_t kc = std::min(kDepthBlock, K - kb);
            std::size_t i = i0;
            for (; i + kMR <= i1; i += kMR)
                row_strip<T, kMR>(nb, kc, A + i * lda + kb, lda, B + kb * ldb + jb, ldb, C + i * ldc + jb, ldc);
            for (; i + 4 <= i1; i += 4)
                row_strip<T, 4>(nb, kc, A + i * lda + kb, lda, B + kb * ldb + jb, ldb, C + i * ldc + jb, ldc);
            if (i < i1) edge_nn(i1 - i, nb, kc, A + i * lda + kb, lda, B + kb * ldb + jb, ldb, C + i * ldc + jb, ldc);
        }
    }
}

}  // namespace detail

/// C[M x N] (+)= A[M x K] * B[K x N].
template <typename T>
void gemm_nn(std::size_t M, std::size_t N, std::size_t K, const T* A, std::size_t lda, const T* B, std::size_t ldb,
             T* C, std::size_t ldc, bool accumulate) {
    using namespace detail;
    const std::size_t row_blocks = (M + kMR - 1) / kMR;
    parallel_for(row_blocks, 1, [&](std::size_t rb0, std::size_t rb1) {
        const std::size_t i0 = rb0 * kMR, i1 = std::min(M, rb1 * kMR);
        if (!accumulate)
            for (std::size_t i = i0; i < i1; ++i) std::fill(C + i * ldc, C + i * ldc + N, T(0));
        nn_rows(i0, i1, N, K, A, lda, B, ldb, C, ldc);
    });
}

/// C[M x N] (+)= A[M x K] * B[N x K]^T. Used for weight gradients where K is
/// the long spatial reduction: each depth chunk of B is transposed into a
/// scratch panel and fed to the NN kernel.
template <typename T>
void gemm_nt(std::size_t M, std::size_t N, std::size_t K, const T* A, std::size_t lda, const T* B, std::size_t ldb,
             T* C, std::size_t ldc, bool accumulate) {
    using namespace detail;
    if (!accumulate)
        for (std::size_t i = 0; i < M; ++i) std::fill(C + i * ldc, C + i * ldc + N, T(0));
    const std::size_t NB = kColBlock * kNV * kLanes<T>;
    T* panel = scratch<T>(3, kDepthBlock * NB);
    const std::size_t row_blocks = (M + kMR - 1) / kMR;
    for (std::size_t jb = 0; jb < N; jb += NB) {
        const std::size_t nb = std::min(NB, N - jb);
        for (std::size_t kb = 0; kb < K; kb += kDepthBlock) {
            const std::size_t kc = std::min(kDepthBlock, K - kb);
            transpose(nb, kc, B + jb * ldb + kb, ldb, panel, nb);
            parallel_for(row_blocks, 1, [&](std::size_t rb0, std::size_t rb1) {
                nn_rows(rb0 * kMR, std::min(M, rb1 * kMR), nb, kc, A + kb, lda, panel, nb, C + jb, ldc);
            });
        }
    }
}

}  // namespace wmsr::kernels
