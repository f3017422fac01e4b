#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "wmsr/gemm.hpp"
#include "wmsr/tensor.hpp"

// Differentiable tensor operations. Every op computes its forward eagerly
// and, when a tape is active and an input requires grad, records a closure
// that accumulates input gradients from the output gradient.

namespace wmsr {

namespace detail {

inline std::string shapes_msg(const char* op, const Shape& a, const Shape& b) {
    return std::string(op) + ": incompatible shapes " + a.str() + " and " + b.str();
}

/// Patch geometry shared by convolution and transposed convolution.
struct PatchGeometry {
    std::size_t channels, height, width;  // image side
    std::size_t kernel, stride, pad;
    std::size_t out_h, out_w;             // patch-position grid

    std::size_t rows() const { return channels * kernel * kernel; }
    std::size_t cols() const { return out_h * out_w; }
};

template <typename T>
void im2col(const PatchGeometry& g, const T* img, T* col) {
    const std::ptrdiff_t H = g.height, W = g.width, k = g.kernel, s = g.stride, p = g.pad;
    std::size_t row = 0;
    for (std::size_t c = 0; c < g.channels; ++c)
        for (std::ptrdiff_t ky = 0; ky < k; ++ky)
            for (std::ptrdiff_t kx = 0; kx < k; ++kx, ++row) {
                T* dst = col + row * g.cols();
                const T* plane = img + c * H * W;
                for (std::size_t oy = 0; oy < g.out_h; ++oy) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) * s - p + ky;
                    T* d = dst + oy * g.out_w;
                    if (iy < 0 || iy >= H) {
                        std::fill(d, d + g.out_w, T(0));
                        continue;
                    }
                    const T* srow = plane + iy * W;
                    if (s == 1) {
                        // valid ox: 0 <= ox - p + kx < W
                        const std::ptrdiff_t ow = g.out_w, shift = kx - p;
                        const std::ptrdiff_t lo = std::clamp<std::ptrdiff_t>(-shift, 0, ow);
                        const std::ptrdiff_t hi = std::clamp<std::ptrdiff_t>(W - shift, lo, ow);
                        std::fill(d, d + lo, T(0));
                        std::copy(srow + lo + shift, srow + hi + shift, d + lo);
                        std::fill(d + hi, d + ow, T(0));
                    } else {
                        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
                            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox) * s - p + kx;
                            d[ox] = (ix >= 0 && ix < W) ? srow[ix] : T(0);
                        }
                    }
                }
            }
}

/// Scatter-add of patch columns back into an image (adjoint of im2col).
template <typename T>
void col2im(const PatchGeometry& g, const T* col, T* img) {
    const std::ptrdiff_t H = g.height, W = g.width, k = g.kernel, s = g.stride, p = g.pad;
    std::size_t row = 0;
    for (std::size_t c = 0; c < g.channels; ++c)
        for (std::ptrdiff_t ky = 0; ky < k; ++ky)
            for (std::ptrdiff_t kx = 0; kx < k; ++kx, ++row) {
                const T* src = col + row * g.cols();
                T* plane = img + c * H * W;
                for (std::size_t oy = 0; oy < g.out_h; ++oy) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) * s - p + ky;
                    if (iy < 0 || iy >= H) continue;
                    T* drow = plane + iy * W;
                    const T* srow = src + oy * g.out_w;
                    if (s == 1) {
                        const std::ptrdiff_t ow = g.out_w, shift = kx - p;
                        const std::ptrdiff_t lo = std::clamp<std::ptrdiff_t>(-shift, 0, ow);
                        const std::ptrdiff_t hi = std::clamp<std::ptrdiff_t>(W - shift, lo, ow);
                        T* dd = drow + shift;
                        for (std::ptrdiff_t ox = lo; ox < hi; ++ox) dd[ox] += srow[ox];
                        continue;
                    }
                    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
                        const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox) * s - p + kx;
                        if (ix >= 0 && ix < W) drow[ix] += srow[ox];
                    }
                }
            }
}

template <typename T>
void add_bias(T* out, const T* bias, std::size_t channels, std::size_t plane) {
    for (std::size_t c = 0; c < channels; ++c) {
        const T b = bias[c];
        T* o = out + c * plane;
        for (std::size_t i = 0; i < plane; ++i) o[i] += b;
    }
}

template <typename T>
void accumulate_bias_grad(const T* dy, T* db, std::size_t channels, std::size_t plane) {
    for (std::size_t c = 0; c < channels; ++c) {
        T s = T(0);
        const T* d = dy + c * plane;
        for (std::size_t i = 0; i < plane; ++i) s += d[i];
        db[c] += s;
    }
}

inline void check_bias(const char* op, const Shape& bias, std::size_t channels) {
    if (bias.numel() != channels || bias.n != 1 || bias.h != 1 || bias.w != 1)
        throw ContractError(std::string(op) + ": bias shape " + bias.str() + " does not match " +
                            std::to_string(channels) + " output channels");
}

}  // namespace detail

/// Bias and per-channel vectors are stored as (1, c, 1, 1).
inline Shape channel_vector(std::size_t c) { return Shape{1, c, 1, 1}; }

/// 2D cross-correlation, weight [c_out, c_in, k, k], bias (1, c_out, 1, 1).
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, std::size_t stride = 1,
                 std::size_t pad = 0) {
    const Shape xs = x.shape(), ws = weight.shape();
    if (ws.c != xs.c || ws.h != ws.w || ws.h == 0)
        throw ContractError(detail::shapes_msg("conv2d", xs, ws));
    if (!(ws.h == 1 || ws.h % 2 == 1)) throw ContractError("conv2d: kernel size must be odd or 1, weight " + ws.str());
    if (stride == 0) throw ContractError("conv2d: stride must be >= 1");
    detail::check_bias("conv2d", bias.shape(), ws.n);
    const std::size_t k = ws.h;
    if (xs.h + 2 * pad < k || xs.w + 2 * pad < k)
        throw ContractError(detail::shapes_msg("conv2d", xs, ws) + " (input smaller than kernel)");
    const std::size_t oh = (xs.h + 2 * pad - k) / stride + 1, ow = (xs.w + 2 * pad - k) / stride + 1;
    const detail::PatchGeometry g{xs.c, xs.h, xs.w, k, stride, pad, oh, ow};
    const bool pointwise = (k == 1 && stride == 1 && pad == 0);
    const std::size_t co = ws.n, K = g.rows(), P = g.cols();

    Tensor<T> out(Shape{xs.n, co, oh, ow});
    {
        T* col = pointwise ? nullptr : kernels::scratch<T>(0, K * P);
        for (std::size_t n = 0; n < xs.n; ++n) {
            const T* xn = x.data().data() + n * xs.c * xs.plane();
            const T* B = xn;
            if (!pointwise) {
                detail::im2col(g, xn, col);
                B = col;
            }
            T* yn = out.data().data() + n * co * P;
            kernels::gemm_nn<T>(co, P, K, weight.data().data(), K, B, P, yn, P, false);
            detail::add_bias(yn, bias.data().data(), co, P);
        }
    }

    detail::maybe_record<T>("conv2d", {&x, &weight, &bias}, out, [x, weight, bias, out, g, pointwise] {
        const Shape xs = x.shape();
        const std::size_t co = weight.shape().n, K = g.rows(), P = g.cols();
        const T* dy = out.storage()->grad.data();
        auto& xs_store = *x.storage();
        auto& ws_store = *weight.storage();
        auto& bs_store = *bias.storage();
        T* col = pointwise ? nullptr : kernels::scratch<T>(0, K * P);
        T* dcol = nullptr;
        T* wt = nullptr;
        if (xs_store.requires_grad) {
            wt = kernels::scratch<T>(2, K * co);
            kernels::transpose(co, K, weight.data().data(), wt);
            if (!pointwise) dcol = kernels::scratch<T>(1, K * P);
        }
        T* dw = ws_store.requires_grad ? ws_store.grad_buffer().data() : nullptr;
        T* db = bs_store.requires_grad ? bs_store.grad_buffer().data() : nullptr;
        T* dx = xs_store.requires_grad ? xs_store.grad_buffer().data() : nullptr;
        for (std::size_t n = 0; n < xs.n; ++n) {
            const T* dyn = dy + n * co * P;
            const T* xn = x.data().data() + n * xs.c * xs.plane();
            if (db) detail::accumulate_bias_grad(dyn, db, co, P);
            if (dw) {
                const T* B = xn;
                if (!pointwise) {
                    detail::im2col(g, xn, col);
                    B = col;
                }
                kernels::gemm_nt<T>(co, K, P, dyn, P, B, P, dw, K, true);
            }
            if (dx) {
                T* dxn = dx + n * xs.c * xs.plane();
                if (pointwise) {
                    kernels::gemm_nn<T>(K, P, co, wt, co, dyn, P, dxn, P, true);
                } else {
                    kernels::gemm_nn<T>(K, P, co, wt, co, dyn, P, dcol, P, false);
                    detail::col2im(g, dcol, dxn);
                }
            }
        }
    });
    return out;
}

/// Transposed convolution (adjoint of strided conv2d), weight [c_in, c_out, k, k].
/// Output spatial size is (h - 1) * stride - 2 * pad + k.
template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                           std::size_t stride = 1, std::size_t pad = 0) {
    const Shape xs = x.shape(), ws = weight.shape();
    if (ws.n != xs.c || ws.h != ws.w || ws.h == 0)
        throw ContractError(detail::shapes_msg("conv_transpose2d", xs, ws));
    if (stride == 0) throw ContractError("conv_transpose2d: stride must be >= 1");
    detail::check_bias("conv_transpose2d", bias.shape(), ws.c);
    const std::size_t k = ws.h, ci = ws.n, co = ws.c;
    if ((xs.h - 1) * stride + k < 2 * pad + 1 || (xs.w - 1) * stride + k < 2 * pad + 1)
        throw ContractError("conv_transpose2d: padding " + std::to_string(pad) + " too large for input " + xs.str());
    const std::size_t oh = (xs.h - 1) * stride + k - 2 * pad, ow = (xs.w - 1) * stride + k - 2 * pad;
    // Image side is the output; patch positions are input pixels.
    const detail::PatchGeometry g{co, oh, ow, k, stride, pad, xs.h, xs.w};
    const std::size_t R = g.rows(), P = g.cols();

    Tensor<T> out(Shape{xs.n, co, oh, ow});
    {
        T* wt = kernels::scratch<T>(2, R * ci);
        kernels::transpose(ci, R, weight.data().data(), wt);
        T* col = kernels::scratch<T>(0, R * P);
        for (std::size_t n = 0; n < xs.n; ++n) {
            const T* xn = x.data().data() + n * ci * P;
            kernels::gemm_nn<T>(R, P, ci, wt, ci, xn, P, col, P, false);
            T* yn = out.data().data() + n * co * oh * ow;
            detail::col2im(g, col, yn);
            detail::add_bias(yn, bias.data().data(), co, oh * ow);
        }
    }

    detail::maybe_record<T>("conv_transpose2d", {&x, &weight, &bias}, out, [x, weight, bias, out, g] {
        const Shape xs = x.shape();
        const std::size_t ci = weight.shape().n, co = weight.shape().c, R = g.rows(), P = g.cols();
        const std::size_t oplane = g.height * g.width;
        const T* dy = out.storage()->grad.data();
        auto& xs_store = *x.storage();
        auto& ws_store = *weight.storage();
        auto& bs_store = *bias.storage();
        T* dw = ws_store.requires_grad ? ws_store.grad_buffer().data() : nullptr;
        T* db = bs_store.requires_grad ? bs_store.grad_buffer().data() : nullptr;
        T* dx = xs_store.requires_grad ? xs_store.grad_buffer().data() : nullptr;
        T* col = kernels::scratch<T>(0, R * P);
        for (std::size_t n = 0; n < xs.n; ++n) {
            const T* dyn = dy + n * co * oplane;
            if (db) detail::accumulate_bias_grad(dyn, db, co, oplane);
            if (!dw && !dx) continue;
            detail::im2col(g, dyn, col);
            if (dw) kernels::gemm_nt<T>(ci, R, P, x.data().data() + n * ci * P, P, col, P, dw, R, true);
            if (dx) kernels::gemm_nn<T>(ci, P, R, weight.data().data(), R, col, P, dx + n * ci * P, P, true);
        }
    });
    return out;
}

/// Per-channel running statistics for batch normalisation.
template <typename T>
struct RunningStats {
    Tensor<T> mean;
    Tensor<T> var;
    bool initialized = false;
    double momentum = 0.1;
    double eps = 1e-5;

    RunningStats() = default;
    /// Uninitialised: eval-mode use is rejected until a training pass runs.
    explicit RunningStats(std::size_t c)
        : mean(channel_vector(c), T(0)), var(channel_vector(c), T(1)) {}
    /// mean 0, var 1, usable in eval mode immediately.
    static RunningStats standard(std::size_t c) {
        RunningStats s(c);
        s.initialized = true;
        return s;
    }
    std::size_t channels() const { return mean.shape().c; }
};

namespace detail {
template <typename T>
Tensor<T> batch_norm2d_impl(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                            const RunningStats<T>& stats, RunningStats<T>* update, bool training);
}

/// Training mode normalises with batch statistics and updates `state`;
/// eval mode uses the running statistics.
template <typename T>
Tensor<T> batch_norm2d(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, RunningStats<T>& state,
                       bool training) {
    return detail::batch_norm2d_impl(x, gamma, beta, state, training ? &state : nullptr, training);
}

/// Eval-mode batch norm on read-only statistics.
template <typename T>
Tensor<T> batch_norm2d(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                       const RunningStats<T>& state) {
    return detail::batch_norm2d_impl<T>(x, gamma, beta, state, nullptr, false);
}

template <typename T>
Tensor<T> detail::batch_norm2d_impl(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                                    const RunningStats<T>& state, RunningStats<T>* update, bool training) {
    const Shape xs = x.shape();
    const std::size_t C = xs.c, plane = xs.plane(), count = xs.n * plane;
    if (state.channels() != C)
        throw ContractError("batch_norm2d: running stats have " + std::to_string(state.channels()) +
                            " channels, input " + xs.str());
    detail::check_bias("batch_norm2d(gamma)", gamma.shape(), C);
    detail::check_bias("batch_norm2d(beta)", beta.shape(), C);
    if (!training && !state.initialized)
        throw ContractError("batch_norm2d: eval mode requires initialised running statistics");
    if (training && count < 2)
        throw ContractError("batch_norm2d: training mode needs more than one value per channel, input " + xs.str());

    std::vector<T> inv_std(C), mean(C);
    if (training) {
        for (std::size_t c = 0; c < C; ++c) {
            double s = 0, ss = 0;
            for (std::size_t n = 0; n < xs.n; ++n) {
                const T* p = x.data().data() + (n * C + c) * plane;
                for (std::size_t i = 0; i < plane; ++i) s += p[i];
            }
            const double mu = s / count;
            for (std::size_t n = 0; n < xs.n; ++n) {
                const T* p = x.data().data() + (n * C + c) * plane;
                for (std::size_t i = 0; i < plane; ++i) {
                    const double d = p[i] - mu;
                    ss += d * d;
                }
            }
            const double var = ss / count;
            mean[c] = static_cast<T>(mu);
            inv_std[c] = static_cast<T>(1.0 / std::sqrt(var + state.eps));
            // Running variance tracks the unbiased estimate.
            const double m = update->momentum;
            T& rm = update->mean.data()[c];
            T& rv = update->var.data()[c];
            rm = static_cast<T>((1 - m) * rm + m * mu);
            rv = static_cast<T>((1 - m) * rv + m * var * count / (count - 1));
        }
        update->initialized = true;
    } else {
        for (std::size_t c = 0; c < C; ++c) {
            mean[c] = state.mean.data()[c];
            inv_std[c] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(state.var.data()[c]) + state.eps));
        }
    }

    Tensor<T> out(xs);
    Tensor<T> xhat(xs);
    for (std::size_t n = 0; n < xs.n; ++n)
        for (std::size_t c = 0; c < C; ++c) {
            const std::size_t off = (n * C + c) * plane;
            const T* p = x.data().data() + off;
            T* h = xhat.data().data() + off;
            T* o = out.data().data() + off;
            const T g = gamma.data()[c], b = beta.data()[c], mu = mean[c], is = inv_std[c];
            for (std::size_t i = 0; i < plane; ++i) {
                h[i] = (p[i] - mu) * is;
                o[i] = h[i] * g + b;
            }
        }

    detail::maybe_record<T>("batch_norm2d", {&x, &gamma, &beta}, out, [x, gamma, beta, out, xhat, inv_std, training] {
        const Shape xs = x.shape();
        const std::size_t C = xs.c, plane = xs.plane(), count = xs.n * plane;
        const T* dy = out.storage()->grad.data();
        const T* h = xhat.data().data();
        std::vector<double> sum_dy(C, 0.0), sum_dy_h(C, 0.0);
        for (std::size_t n = 0; n < xs.n; ++n)
            for (std::size_t c = 0; c < C; ++c) {
                const std::size_t off = (n * C + c) * plane;
                for (std::size_t i = 0; i < plane; ++i) {
                    sum_dy[c] += dy[off + i];
                    sum_dy_h[c] += dy[off + i] * h[off + i];
                }
            }
        if (gamma.requires_grad()) {
            auto g = gamma.storage()->grad_buffer();
            for (std::size_t c = 0; c < C; ++c) g[c] += static_cast<T>(sum_dy_h[c]);
        }
        if (beta.requires_grad()) {
            auto g = beta.storage()->grad_buffer();
            for (std::size_t c = 0; c < C; ++c) g[c] += static_cast<T>(sum_dy[c]);
        }
        if (!x.requires_grad()) return;
        auto dx = x.storage()->grad_buffer();
        for (std::size_t n = 0; n < xs.n; ++n)
            for (std::size_t c = 0; c < C; ++c) {
                const std::size_t off = (n * C + c) * plane;
                const T scale = gamma.data()[c] * inv_std[c];
                if (training) {
                    const T mdy = static_cast<T>(sum_dy[c] / count);
                    const T mdyh = static_cast<T>(sum_dy_h[c] / count);
                    for (std::size_t i = 0; i < plane; ++i)
                        dx[off + i] += scale * (dy[off + i] - mdy - h[off + i] * mdyh);
                } else {
                    for (std::size_t i = 0; i < plane; ++i) dx[off + i] += scale * dy[off + i];
                }
            }
    });
    return out;
}

/// Exact GELU, x * Phi(x) with the erf-based normal CDF.
template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
    Tensor<T> out(x.shape());
    auto xd = x.data();
    auto od = out.data();
    constexpr double inv_sqrt2 = 0.70710678118654752440;
    for (std::size_t i = 0; i < xd.size(); ++i) {
        const double v = xd[i];
        od[i] = static_cast<T>(v * 0.5 * (1.0 + std::erf(v * inv_sqrt2)));
    }
    detail::maybe_record<T>("gelu", {&x}, out, [x, out] {
        constexpr double inv_sqrt2 = 0.70710678118654752440;
        constexpr double inv_sqrt2pi = 0.39894228040143267794;
        auto dx = x.storage()->grad_buffer();
        const auto& dy = out.storage()->grad;
        auto xd = x.data();
        for (std::size_t i = 0; i < xd.size(); ++i) {
            const double v = xd[i];
            const double cdf = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
            const double pdf = inv_sqrt2pi * std::exp(-0.5 * v * v);
            dx[i] += static_cast<T>(dy[i] * (cdf + v * pdf));
        }
    });
    return out;
}

/// Inverted dropout. Identity (same tensor) when not training or p == 0.
template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p, bool training, std::mt19937_64& rng) {
    if (!(p >= 0.0 && p < 1.0)) throw ContractError("dropout: probability must be in [0, 1), got " + std::to_string(p));
    if (!training || p == 0.0) return x;
    const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
    std::vector<T> mask(x.numel());
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& m : mask) m = u(rng) < p ? T(0) : keep_scale;
    Tensor<T> out(x.shape());
    auto xd = x.data();
    auto od = out.data();
    for (std::size_t i = 0; i < od.size(); ++i) od[i] = xd[i] * mask[i];
    detail::maybe_record<T>("dropout", {&x}, out, [x, out, mask = std::move(mask)] {
        auto dx = x.storage()->grad_buffer();
        const auto& dy = out.storage()->grad;
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i] * mask[i];
    });
    return out;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape()) throw ContractError(detail::shapes_msg("add", a.shape(), b.shape()));
    Tensor<T> out(a.shape());
    auto ad = a.data();
    auto bd = b.data();
    auto od = out.data();
    for (std::size_t i = 0; i < od.size(); ++i) od[i] = ad[i] + bd[i];
    detail::maybe_record<T>("add", {&a, &b}, out, [a, b, out] {
        const auto& dy = out.storage()->grad;
        a.storage()->accumulate_grad(dy);
        b.storage()->accumulate_grad(dy);
    });
    return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape()) throw ContractError(detail::shapes_msg("mul", a.shape(), b.shape()));
    Tensor<T> out(a.shape());
    auto ad = a.data();
    auto bd = b.data();
    auto od = out.data();
    for (std::size_t i = 0; i < od.size(); ++i) od[i] = ad[i] * bd[i];
    detail::maybe_record<T>("mul", {&a, &b}, out, [a, b, out] {
        const auto& dy = out.storage()->grad;
        if (a.requires_grad()) {
            auto g = a.storage()->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += dy[i] * b.data()[i];
        }
        if (b.requires_grad()) {
            auto g = b.storage()->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += dy[i] * a.data()[i];
        }
    });
    return out;
}

/// Sum of all elements as a (1,1,1,1) tensor.
template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
    double s = 0;
    for (T v : x.data()) s += v;
    Tensor<T> out = Tensor<T>::scalar(static_cast<T>(s));
    detail::maybe_record<T>("sum", {&x}, out, [x, out] {
        const T g = out.storage()->grad[0];
        auto dx = x.storage()->grad_buffer();
        for (auto& v : dx) v += g;
    });
    return out;
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
    double s = 0;
    for (T v : x.data()) s += v;
    const double n = static_cast<double>(x.numel());
    Tensor<T> out = Tensor<T>::scalar(static_cast<T>(s / n));
    detail::maybe_record<T>("mean", {&x}, out, [x, out, n] {
        const T g = static_cast<T>(out.storage()->grad[0] / n);
        auto dx = x.storage()->grad_buffer();
        for (auto& v : dx) v += g;
    });
    return out;
}

/// Stacks tensors along the channel axis in argument order.
template <typename T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& xs) {
    if (xs.empty()) throw ContractError("concat_channels: empty input list");
    const Shape s0 = xs.front().shape();
    std::size_t C = 0;
    for (const auto& x : xs) {
        const Shape s = x.shape();
        if (s.n != s0.n || s.h != s0.h || s.w != s0.w)
            throw ContractError(detail::shapes_msg("concat_channels", s0, s));
        C += s.c;
    }
    const std::size_t plane = s0.plane();
    Tensor<T> out(Shape{s0.n, C, s0.h, s0.w});
    for (std::size_t n = 0; n < s0.n; ++n) {
        std::size_t c0 = 0;
        for (const auto& x : xs) {
            const std::size_t len = x.shape().c * plane;
            std::copy_n(x.data().data() + n * len, len, out.data().data() + (n * C + c0) * plane);
            c0 += x.shape().c;
        }
    }
    Tape<T>* tape = Tape<T>::active();
    bool any = false;
    for (const auto& x : xs) any = any || x.requires_grad();
    if (tape && any) {
        std::vector<typename Tape<T>::Storage> ins;
        for (const auto& x : xs) ins.push_back(x.storage());
        tape->record("concat_channels", std::move(ins), out.storage(), [xs, out, C, plane] {
            const auto& dy = out.storage()->grad;
            const std::size_t N = out.shape().n;
            std::size_t c0 = 0;
            for (const auto& x : xs) {
                const std::size_t len = x.shape().c * plane;
                if (x.requires_grad()) {
                    auto g = x.storage()->grad_buffer();
                    for (std::size_t n = 0; n < N; ++n)
                        for (std::size_t i = 0; i < len; ++i) g[n * len + i] += dy[(n * C + c0) * plane + i];
                }
                c0 += x.shape().c;
            }
        });
    }
    return out;
}

/// Extends the bottom/right edges by mirror reflection (edge sample not repeated).
template <typename T>
Tensor<T> pad_reflect(const Tensor<T>& x, std::size_t bottom, std::size_t right) {
    const Shape s = x.shape();
    if (bottom >= s.h || right >= s.w)
        throw ContractError("pad_reflect: padding must be smaller than the input extent, input " + s.str());
    if (bottom == 0 && right == 0) return x;
    const std::size_t H = s.h + bottom, W = s.w + right;
    auto src_index = [](std::size_t i, std::size_t n) { return i < n ? i : 2 * (n - 1) - i; };
    std::vector<std::size_t> rows(H), cols(W);
    for (std::size_t i = 0; i < H; ++i) rows[i] = src_index(i, s.h);
    for (std::size_t j = 0; j < W; ++j) cols[j] = src_index(j, s.w);
    Tensor<T> out(Shape{s.n, s.c, H, W});
    for (std::size_t p = 0; p < s.n * s.c; ++p)
        for (std::size_t i = 0; i < H; ++i)
            for (std::size_t j = 0; j < W; ++j)
                out.data()[(p * H + i) * W + j] = x.data()[(p * s.h + rows[i]) * s.w + cols[j]];
    detail::maybe_record<T>("pad_reflect", {&x}, out, [x, out, rows, cols] {
        const Shape s = x.shape();
        const std::size_t H = rows.size(), W = cols.size();
        const auto& dy = out.storage()->grad;
        auto dx = x.storage()->grad_buffer();
        for (std::size_t p = 0; p < s.n * s.c; ++p)
            for (std::size_t i = 0; i < H; ++i)
                for (std::size_t j = 0; j < W; ++j)
                    dx[(p * s.h + rows[i]) * s.w + cols[j]] += dy[(p * H + i) * W + j];
    });
    return out;
}

/// Keeps the top-left h x w window.
template <typename T>
Tensor<T> crop(const Tensor<T>& x, std::size_t h, std::size_t w) {
    const Shape s = x.shape();
    if (h > s.h || w > s.w || h == 0 || w == 0)
        throw ContractError("crop: target " + std::to_string(h) + "x" + std::to_string(w) + " outside input " + s.str());
    if (h == s.h && w == s.w) return x;
    Tensor<T> out(Shape{s.n, s.c, h, w});
    for (std::size_t p = 0; p < s.n * s.c; ++p)
        for (std::size_t i = 0; i < h; ++i)
            std::copy_n(x.data().data() + (p * s.h + i) * s.w, w, out.data().data() + (p * h + i) * w);
    detail::maybe_record<T>("crop", {&x}, out, [x, out] {
        const Shape s = x.shape(), o = out.shape();
        const auto& dy = out.storage()->grad;
        auto dx = x.storage()->grad_buffer();
        for (std::size_t p = 0; p < s.n * s.c; ++p)
            for (std::size_t i = 0; i < o.h; ++i)
                for (std::size_t j = 0; j < o.w; ++j) dx[(p * s.h + i) * s.w + j] += dy[(p * o.h + i) * o.w + j];
    });
    return out;
}

/// Fixed (non-learnable) affine channel mix: out_i = sum_j m[i][j] x_j + offset_i.
template <typename T>
Tensor<T> channel_affine(const Tensor<T>& x, const std::vector<std::vector<double>>& m,
                         const std::vector<double>& offset) {
    const Shape s = x.shape();
    const std::size_t co = m.size();
    if (offset.size() != co) throw ContractError("channel_affine: offset size does not match matrix rows");
    for (const auto& row : m)
        if (row.size() != s.c)
            throw ContractError("channel_affine: matrix has " + std::to_string(row.size()) + " columns, input " + s.str());
    const std::size_t plane = s.plane();
    Tensor<T> out(Shape{s.n, co, s.h, s.w});
    for (std::size_t n = 0; n < s.n; ++n)
        for (std::size_t i = 0; i < co; ++i) {
            T* o = out.data().data() + (n * co + i) * plane;
            for (std::size_t p = 0; p < plane; ++p) o[p] = static_cast<T>(offset[i]);
            for (std::size_t j = 0; j < s.c; ++j) {
                const T mij = static_cast<T>(m[i][j]);
                const T* xi = x.data().data() + (n * s.c + j) * plane;
                for (std::size_t p = 0; p < plane; ++p) o[p] += mij * xi[p];
            }
        }
    detail::maybe_record<T>("channel_affine", {&x}, out, [x, out, m] {
        const Shape s = x.shape();
        const std::size_t co = m.size(), plane = s.plane();
        const auto& dy = out.storage()->grad;
        auto dx = x.storage()->grad_buffer();
        for (std::size_t n = 0; n < s.n; ++n)
            for (std::size_t j = 0; j < s.c; ++j)
                for (std::size_t i = 0; i < co; ++i) {
                    const T mij = static_cast<T>(m[i][j]);
                    const T* g = dy.data() + (n * co + i) * plane;
                    T* d = dx.data() + (n * s.c + j) * plane;
                    for (std::size_t p = 0; p < plane; ++p) d[p] += mij * g[p];
                }
    });
    return out;
}

template <typename U, typename T>
Tensor<U> cast(const Tensor<T>& x) {
    std::vector<U> v(x.numel());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<U>(x.data()[i]);
    return Tensor<U>(x.shape(), std::move(v));
}

template <typename T, typename Rng>
void fill_uniform(Tensor<T>& t, double lo, double hi, Rng& rng) {
    std::uniform_real_distribution<double> u(lo, hi);
    for (auto& v : t.data()) v = static_cast<T>(u(rng));
}

}  // namespace wmsr
