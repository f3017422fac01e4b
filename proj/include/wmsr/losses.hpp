#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "wmsr/metrics.hpp"
#include "wmsr/tensor.hpp"

namespace wmsr {

enum class LossKind { l1, l2, huber, charbonnier, ssim };

inline const char* to_string(LossKind k) {
    switch (k) {
        case LossKind::l1: return "l1";
        case LossKind::l2: return "l2";
        case LossKind::huber: return "huber";
        case LossKind::charbonnier: return "charbonnier";
        case LossKind::ssim: return "ssim";
    }
    return "?";
}

inline LossKind parse_loss(const std::string& s) {
    for (LossKind k : {LossKind::l1, LossKind::l2, LossKind::huber, LossKind::charbonnier, LossKind::ssim})
        if (s == to_string(k)) return k;
    throw ContractError("unknown loss '" + s + "' (expected l1, l2, huber, charbonnier or ssim)");
}

struct LossParams {
    double huber_delta = 1.0;
    double charbonnier_eps = 1e-3;
};

namespace detail {

/// Value and derivative of the per-element penalty at error e.
inline std::pair<double, double> penalty(LossKind kind, double e, const LossParams& p) {
    switch (kind) {
        case LossKind::l1: return {std::abs(e), e > 0 ? 1.0 : (e < 0 ? -1.0 : 0.0)};
        case LossKind::l2: return {e * e, 2 * e};
        case LossKind::huber: {
            const double d = p.huber_delta;
            if (std::abs(e) <= d) return {0.5 * e * e, e};
            return {d * (std::abs(e) - 0.5 * d), e > 0 ? d : -d};
        }
        case LossKind::charbonnier: {
            const double r = std::sqrt(e * e + p.charbonnier_eps * p.charbonnier_eps);
            return {r, e / r};
        }
        case LossKind::ssim: break;
    }
    throw ContractError("penalty: not an elementwise loss");
}

template <typename T>
Tensor<T> ssim_loss(const Tensor<T>& pred, const Tensor<T>& target) {
    const Shape s = pred.shape();
    const std::size_t planes = s.n * s.c, hw = s.plane();
    std::vector<double> grad(pred.numel());
    double total = 0;
    for (std::size_t k = 0; k < planes; ++k) {
        std::vector<double> x(hw), y(hw), g;
        for (std::size_t i = 0; i < hw; ++i) {
            x[i] = pred.data()[k * hw + i];
            y[i] = target.data()[k * hw + i];
        }
        total += ssim_plane(x, y, s.w, s.h, 1.0, &g);
        for (std::size_t i = 0; i < hw; ++i) grad[k * hw + i] = -g[i] / static_cast<double>(planes);
    }
    Tensor<T> out = Tensor<T>::scalar(static_cast<T>(1.0 - total / static_cast<double>(planes)));
    maybe_record<T>("ssim_loss", {&pred}, out, [pred, out, grad = std::move(grad)] {
        const double gy = out.storage()->grad[0];
        auto dx = pred.storage()->grad_buffer();
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += static_cast<T>(gy * grad[i]);
    });
    return out;
}

}  // namespace detail

/// Mean-reduced loss between a prediction and a fixed target.
template <typename T>
Tensor<T> loss(const Tensor<T>& pred, const Tensor<T>& target, LossKind kind, const LossParams& params = {}) {
    if (pred.shape() != target.shape())
        throw ContractError("loss: prediction " + pred.shape().str() + " vs target " + target.shape().str());
    if (kind == LossKind::ssim) return detail::ssim_loss(pred, target);
    const std::size_t n = pred.numel();
    std::vector<T> deriv(n);
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto [v, d] = detail::penalty(kind, static_cast<double>(pred.data()[i]) - target.data()[i], params);
        total += v;
        deriv[i] = static_cast<T>(d / static_cast<double>(n));
    }
    Tensor<T> out = Tensor<T>::scalar(static_cast<T>(total / static_cast<double>(n)));
    detail::maybe_record<T>(to_string(kind), {&pred}, out, [pred, out, deriv = std::move(deriv)] {
        const T gy = out.storage()->grad[0];
        auto dx = pred.storage()->grad_buffer();
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += gy * deriv[i];
    });
    return out;
}

}  // namespace wmsr
