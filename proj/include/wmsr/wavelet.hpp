#pragma once

#include <array>
#include <string>

#include "wmsr/tensor.hpp"

// Single-level orthonormal 2D Haar transform.
//
// For each 2x2 block [[a, b], [c, d]] the four analysis filters give
//   aa = (a + b + c + d) / 2     ad = (a - b + c - d) / 2
//   da = (a + b - c - d) / 2     dd = (a - b - c + d) / 2
// The 4x4 analysis matrix is symmetric and orthogonal, so synthesis uses the
// same matrix. Output channels are band-major: [aa | ad | da | dd], each band
// holding all input channels in order.

namespace wmsr {

struct HaarFilterBank {
    enum Band : std::size_t { aa = 0, ad = 1, da = 2, dd = 3 };

    /// Row b holds filter b flattened as (top-left, top-right, bottom-left, bottom-right).
    static constexpr std::array<std::array<double, 4>, 4> analysis{{
        {{0.5, 0.5, 0.5, 0.5}},
        {{0.5, -0.5, 0.5, -0.5}},
        {{0.5, 0.5, -0.5, -0.5}},
        {{0.5, -0.5, -0.5, 0.5}},
    }};

    static constexpr const char* band_order = "aa,ad,da,dd";
    static constexpr const char* normalization = "orthonormal";
};

namespace detail {

template <typename T>
void haar_forward_kernel(const Shape& s, const T* x, T* y) {
    const std::size_t C = s.c, h2 = s.h / 2, w2 = s.w / 2, band = C * h2 * w2;
    for (std::size_t n = 0; n < s.n; ++n)
        for (std::size_t c = 0; c < C; ++c) {
            const T* src = x + (n * C + c) * s.h * s.w;
            T* base = y + n * 4 * band + c * h2 * w2;
            for (std::size_t i = 0; i < h2; ++i) {
                const T* r0 = src + (2 * i) * s.w;
                const T* r1 = r0 + s.w;
                T* pa = base + i * w2;
                T* pb = pa + band;
                T* pc = pb + band;
                T* pd = pc + band;
                for (std::size_t j = 0; j < w2; ++j) {
                    const T a = r0[2 * j], b = r0[2 * j + 1], c2 = r1[2 * j], d = r1[2 * j + 1];
                    pa[j] = T(0.5) * ((a + b) + (c2 + d));
                    pb[j] = T(0.5) * ((a - b) + (c2 - d));
                    pc[j] = T(0.5) * ((a + b) - (c2 + d));
                    pd[j] = T(0.5) * ((a - b) - (c2 - d));
                }
            }
        }
}

// s is the shape of the *coefficient* tensor (n, 4c, h, w).
template <typename T>
void haar_inverse_kernel(const Shape& s, const T* y, T* x) {
    const std::size_t C = s.c / 4, h = s.h, w = s.w, band = C * h * w, W = 2 * w;
    for (std::size_t n = 0; n < s.n; ++n)
        for (std::size_t c = 0; c < C; ++c) {
            const T* pa = y + n * 4 * band + c * h * w;
            const T* pb = pa + band;
            const T* pc = pb + band;
            const T* pd = pc + band;
            T* dst = x + (n * C + c) * 4 * h * w;
            for (std::size_t i = 0; i < h; ++i) {
                T* r0 = dst + (2 * i) * W;
                T* r1 = r0 + W;
                for (std::size_t j = 0; j < w; ++j) {
                    const std::size_t k = i * w + j;
                    const T A = pa[k], B = pb[k], Cc = pc[k], D = pd[k];
                    r0[2 * j] = T(0.5) * ((A + B) + (Cc + D));
                    r0[2 * j + 1] = T(0.5) * ((A - B) + (Cc - D));
                    r1[2 * j] = T(0.5) * ((A + B) - (Cc + D));
                    r1[2 * j + 1] = T(0.5) * ((A - B) - (Cc - D));
                }
            }
        }
}

}  // namespace detail

/// (n, c, h, w) -> (n, 4c, h/2, w/2). Requires even h and w.
template <typename T>
Tensor<T> haar_dwt2d(const Tensor<T>& x) {
    const Shape s = x.shape();
    if (s.h % 2 != 0 || s.w % 2 != 0 || s.h == 0 || s.w == 0)
        throw ContractError("haar_dwt2d: spatial dims must be even and non-zero, got " + s.str() +
                            " (pad the input to even size first)");
    Tensor<T> out(Shape{s.n, 4 * s.c, s.h / 2, s.w / 2});
    detail::haar_forward_kernel(s, x.data().data(), out.data().data());
    detail::maybe_record<T>("haar_dwt2d", {&x}, out, [x, out] {
        // Orthogonal: the adjoint is the synthesis bank.
        std::vector<T> g(x.numel());
        detail::haar_inverse_kernel(out.shape(), out.storage()->grad.data(), g.data());
        x.storage()->accumulate_grad(g);
    });
    return out;
}

/// (n, 4c, h, w) -> (n, c, 2h, 2w), inverse of haar_dwt2d.
template <typename T>
Tensor<T> haar_idwt2d(const Tensor<T>& y) {
    const Shape s = y.shape();
    if (s.c % 4 != 0 || s.c == 0)
        throw ContractError("haar_idwt2d: channel count must be a positive multiple of 4, got " + s.str());
    Tensor<T> out(Shape{s.n, s.c / 4, 2 * s.h, 2 * s.w});
    detail::haar_inverse_kernel(s, y.data().data(), out.data().data());
    detail::maybe_record<T>("haar_idwt2d", {&y}, out, [y, out] {
        std::vector<T> g(y.numel());
        detail::haar_forward_kernel(out.shape(), out.storage()->grad.data(), g.data());
        y.storage()->accumulate_grad(g);
    });
    return out;
}

}  // namespace wmsr
