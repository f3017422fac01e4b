#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "wmsr/image.hpp"
#include "wmsr/ops.hpp"
#include "wmsr/wavelet.hpp"

namespace wmsr {

/// Architecture hyperparameters.
struct ModelConfig {
    std::size_t embedding_dim = 144;
    std::size_t num_blocks = 4;
    std::size_t scale = 2;
    std::size_t mlp_factor = 2;
    std::size_t tconv_kernel = 4;
    std::size_t front_kernel = 3;
    double dropout = 0.3;
    Interpolation upsample = Interpolation::bicubic;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;

    void validate() const {
        if (embedding_dim == 0 || embedding_dim % 4 != 0)
            throw ContractError("model.embedding_dim must be a positive multiple of 4, got " +
                                std::to_string(embedding_dim));
        if (scale < 2) throw ContractError("model.scale must be >= 2, got " + std::to_string(scale));
        if (mlp_factor < 2) throw ContractError("model.mlp_factor must be > 1, got " + std::to_string(mlp_factor));
        if (tconv_kernel < 2 || tconv_kernel % 2 != 0)
            throw ContractError("model.tconv_kernel must be even (stride-2 doubling), got " +
                                std::to_string(tconv_kernel));
        if (front_kernel % 2 == 0) throw ContractError("model.front_kernel must be odd, got " + std::to_string(front_kernel));
        if (!(dropout >= 0.0 && dropout < 1.0)) throw ContractError("model.dropout must be in [0, 1)");
    }

    std::size_t tconv_pad() const { return (tconv_kernel - 2) / 2; }
};

template <typename T>
struct Conv {
    Tensor<T> weight;
    Tensor<T> bias;
};

template <typename T>
struct NamedTensor {
    std::string name;
    Tensor<T> tensor;
};

namespace detail {

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weight and bias.
template <typename T>
Conv<T> make_conv(Shape weight_shape, std::size_t out_channels, std::size_t fan_in, std::mt19937_64& rng) {
    Conv<T> c{Tensor<T>(weight_shape), Tensor<T>(channel_vector(out_channels))};
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    fill_uniform(c.weight, -bound, bound, rng);
    fill_uniform(c.bias, -bound, bound, rng);
    c.weight.set_requires_grad(true);
    c.bias.set_requires_grad(true);
    return c;
}

}  // namespace detail

/// front conv (C -> C/4) -> Haar DWT (C at half size) -> 1x1 MLP with GELU
/// and dropout -> stride-2 transposed conv -> batch norm -> + input.
template <typename T>
struct WaveMixBlock {
    Conv<T> front, mlp1, mlp2, tconv;
    Tensor<T> bn_gamma, bn_beta;
    RunningStats<T> bn_stats;

    WaveMixBlock() = default;
    WaveMixBlock(const ModelConfig& cfg, std::mt19937_64& rng) {
        const std::size_t C = cfg.embedding_dim, q = C / 4, hidden = cfg.mlp_factor * C;
        const std::size_t fk = cfg.front_kernel, tk = cfg.tconv_kernel;
        front = detail::make_conv<T>(Shape{q, C, fk, fk}, q, C * fk * fk, rng);
        mlp1 = detail::make_conv<T>(Shape{hidden, C, 1, 1}, hidden, C, rng);
        mlp2 = detail::make_conv<T>(Shape{C, hidden, 1, 1}, C, hidden, rng);
        tconv = detail::make_conv<T>(Shape{C, C, tk, tk}, C, C * tk * tk, rng);
        bn_gamma = Tensor<T>(channel_vector(C), T(1));
        bn_beta = Tensor<T>(channel_vector(C), T(0));
        bn_gamma.set_requires_grad(true);
        bn_beta.set_requires_grad(true);
        bn_stats = RunningStats<T>::standard(C);
    }

    /// Training mode updates the batch-norm running statistics.
    Tensor<T> forward(const Tensor<T>& x, const ModelConfig& cfg, bool training, std::mt19937_64& rng) {
        check_input(x, cfg);
        Tensor<T> m = mix(x, cfg, training, rng);
        Tensor<T> b = training ? batch_norm2d(m, bn_gamma, bn_beta, bn_stats, true)
                               : batch_norm2d(m, bn_gamma, bn_beta, std::as_const(bn_stats));
        return add(b, x);
    }

    /// Inference path; does not mutate the block.
    Tensor<T> forward_eval(const Tensor<T>& x, const ModelConfig& cfg) const {
        check_input(x, cfg);
        std::mt19937_64 unused;
        Tensor<T> m = mix(x, cfg, false, unused);
        return add(batch_norm2d(m, bn_gamma, bn_beta, bn_stats), x);
    }

    std::vector<NamedTensor<T>> parameters(const std::string& prefix) const {
        return {{prefix + "front.weight", front.weight}, {prefix + "front.bias", front.bias},
                {prefix + "mlp1.weight", mlp1.weight},   {prefix + "mlp1.bias", mlp1.bias},
                {prefix + "mlp2.weight", mlp2.weight},   {prefix + "mlp2.bias", mlp2.bias},
                {prefix + "tconv.weight", tconv.weight}, {prefix + "tconv.bias", tconv.bias},
                {prefix + "bn.gamma", bn_gamma},         {prefix + "bn.beta", bn_beta}};
    }
    std::vector<NamedTensor<T>> buffers(const std::string& prefix) const {
        return {{prefix + "bn.running_mean", bn_stats.mean}, {prefix + "bn.running_var", bn_stats.var}};
    }

private:
    static void check_input(const Tensor<T>& x, const ModelConfig& cfg) {
        const Shape s = x.shape();
        if (s.c != cfg.embedding_dim)
            throw ContractError("WaveMix block expects " + std::to_string(cfg.embedding_dim) + " channels, got " + s.str());
        if (s.h % 2 != 0 || s.w % 2 != 0)
            throw ContractError("WaveMix block needs even spatial dims, got " + s.str() +
                                "; the network reflect-pads to even size before the block stack");
    }

    Tensor<T> mix(const Tensor<T>& x, const ModelConfig& cfg, bool training, std::mt19937_64& rng) const {
        Tensor<T> x0 = conv2d(x, front.weight, front.bias, 1, cfg.front_kernel / 2);
        Tensor<T> bands = haar_dwt2d(x0);
        Tensor<T> h = conv2d(bands, mlp1.weight, mlp1.bias);
        h = gelu(h);
        h = dropout(h, cfg.dropout, training, rng);
        h = conv2d(h, mlp2.weight, mlp2.bias);
        return conv_transpose2d(h, tconv.weight, tconv.bias, 2, cfg.tconv_pad());
    }
};

/// Dual-path super-resolution network: learnable WaveMix path on the
/// upsampled luma, parameter-free interpolation for chroma.
template <typename T>
class WaveMixSR {
public:
    explicit WaveMixSR(ModelConfig cfg, std::uint64_t seed = 0) : cfg_(cfg), dropout_rng_(seed ^ 0x9e3779b97f4a7c15ULL) {
        cfg_.validate();
        std::mt19937_64 rng(seed);
        const std::size_t C = cfg_.embedding_dim;
        head_ = detail::make_conv<T>(Shape{C, 1, 3, 3}, C, 9, rng);
        for (std::size_t i = 0; i < cfg_.num_blocks; ++i) blocks_.emplace_back(cfg_, rng);
        tail_ = detail::make_conv<T>(Shape{1, C, 3, 3}, 1, C * 9, rng);
    }

    const ModelConfig& config() const { return cfg_; }
    std::vector<WaveMixBlock<T>>& blocks() { return blocks_; }
    const std::vector<WaveMixBlock<T>>& blocks() const { return blocks_; }
    Conv<T>& head() { return head_; }
    Conv<T>& tail() { return tail_; }

    void reseed_dropout(std::uint64_t seed) { dropout_rng_.seed(seed); }

    /// Luma path on an already upsampled Y tensor (n, 1, H, W) -> (n, 1, H, W).
    Tensor<T> forward_y(const Tensor<T>& y_up, bool training) {
        if (!training) return forward_y_eval(y_up);
        return luma_path(*this, y_up, [&](WaveMixBlock<T>& b, const Tensor<T>& h) {
            return b.forward(h, cfg_, true, dropout_rng_);
        });
    }

    Tensor<T> forward_y_eval(const Tensor<T>& y_up) const {
        return luma_path(*this, y_up,
                         [&](const WaveMixBlock<T>& b, const Tensor<T>& h) { return b.forward_eval(h, cfg_); });
    }

    /// Upsampled YCbCr planes for an RGB low-resolution input (no learnable parts).
    PlanarImage upsample_input(const PlanarImage& lr) const {
        if (lr.space != ColorSpace::rgb) throw ImageError("network input must be RGB");
        if (lr.width < 8 || lr.height < 8)
            throw ContractError("network input must be at least 8x8, got " + std::to_string(lr.width) + "x" +
                                std::to_string(lr.height));
        return resample(rgb_to_ycbcr(lr), ScaleFactor{cfg_.scale, 1}, cfg_.upsample);
    }

    /// Output before the final RGB conversion: learned Y, interpolated CbCr.
    PlanarImage forward_ycbcr(const PlanarImage& lr, bool training = false) {
        if (!training) return predict_ycbcr(lr);
        PlanarImage up = upsample_input(lr);
        const Tensor<T> out = forward_y(luma_tensor(up), true);
        for (std::size_t i = 0; i < up.size(); ++i) up.planes[0][i] = static_cast<double>(out.data()[i]);
        return up;
    }

    PlanarImage predict_ycbcr(const PlanarImage& lr) const {
        PlanarImage up = upsample_input(lr);
        const Tensor<T> out = forward_y_eval(luma_tensor(up));
        for (std::size_t i = 0; i < up.size(); ++i) up.planes[0][i] = static_cast<double>(out.data()[i]);
        return up;
    }

    PlanarImage forward(const PlanarImage& lr, bool training = false) {
        PlanarImage rgb = ycbcr_to_rgb(forward_ycbcr(lr, training));
        clamp_planes(rgb);
        return rgb;
    }

    /// Eval-mode forward; safe to call concurrently.
    PlanarImage predict(const PlanarImage& lr) const {
        PlanarImage rgb = ycbcr_to_rgb(predict_ycbcr(lr));
        clamp_planes(rgb);
        return rgb;
    }

    /// Like forward() in eval mode, but rejects a scale the network was not built for.
    PlanarImage upscale(const PlanarImage& lr, std::size_t scale) const {
        if (scale != cfg_.scale)
            throw ContractError("network was built for scale " + std::to_string(cfg_.scale) + ", requested " +
                                std::to_string(scale));
        return predict(lr);
    }

    /// Learnable tensors in a stable order.
    std::vector<NamedTensor<T>> parameters() const {
        std::vector<NamedTensor<T>> p{{"y_head.weight", head_.weight}, {"y_head.bias", head_.bias}};
        for (std::size_t i = 0; i < blocks_.size(); ++i) {
            auto bp = blocks_[i].parameters("blocks." + std::to_string(i) + ".");
            p.insert(p.end(), bp.begin(), bp.end());
        }
        p.push_back({"y_tail.weight", tail_.weight});
        p.push_back({"y_tail.bias", tail_.bias});
        return p;
    }

    /// Non-learnable state (batch-norm running statistics).
    std::vector<NamedTensor<T>> buffers() const {
        std::vector<NamedTensor<T>> b;
        for (std::size_t i = 0; i < blocks_.size(); ++i) {
            auto bb = blocks_[i].buffers("blocks." + std::to_string(i) + ".");
            b.insert(b.end(), bb.begin(), bb.end());
        }
        return b;
    }

    /// Parameters followed by buffers: everything a checkpoint stores.
    std::vector<NamedTensor<T>> state() const {
        auto s = parameters();
        auto b = buffers();
        s.insert(s.end(), b.begin(), b.end());
        return s;
    }

    void zero_grad() {
        for (auto& p : parameters()) p.tensor.zero_grad();
    }

private:
    static Tensor<T> luma_tensor(const PlanarImage& up) {
        Tensor<T> y(Shape{1, 1, up.height, up.width});
        for (std::size_t i = 0; i < up.size(); ++i) y.data()[i] = static_cast<T>(up.planes[0][i]);
        return y;
    }

    template <typename Self, typename BlockFn>
    static Tensor<T> luma_path(Self& self, const Tensor<T>& y_up, BlockFn&& block_fn) {
        const Shape s = y_up.shape();
        if (s.c != 1) throw ContractError("luma path expects a single channel, got " + s.str());
        Tensor<T> h = pad_reflect(y_up, s.h % 2, s.w % 2);
        h = conv2d(h, self.head_.weight, self.head_.bias, 1, 1);
        for (auto& b : self.blocks_) h = block_fn(b, h);
        h = conv2d(h, self.tail_.weight, self.tail_.bias, 1, 1);
        return crop(h, s.h, s.w);
    }

    ModelConfig cfg_;
    Conv<T> head_, tail_;
    std::vector<WaveMixBlock<T>> blocks_;
    std::mt19937_64 dropout_rng_;
};

// ---------------------------------------------------------------------------
// Accounting

struct LayerCost {
    std::string name;
    std::size_t params = 0;
    std::size_t multiadds = 0;
};

struct CostReport {
    std::vector<LayerCost> layers;
    std::size_t total_params = 0;
    std::size_t total_multiadds = 0;
};

/// Parameter and multiply-add accounting for an lr_h x lr_w input.
///
/// convolution: c_out * c_in * k^2 * h_out * w_out
/// transposed convolution: c_in * c_out * k^2 * h_in * w_in (one product per
///   input pixel, tap and channel pair)
/// Haar DWT: 4 products per coefficient; batch norm: 1 per element.
/// Interpolation, GELU, dropout and residual additions are not counted.
inline CostReport cost_report(const ModelConfig& cfg, std::size_t lr_h, std::size_t lr_w) {
    cfg.validate();
    const std::size_t C = cfg.embedding_dim, q = C / 4, hidden = cfg.mlp_factor * C;
    const std::size_t H = lr_h * cfg.scale + (lr_h * cfg.scale) % 2, W = lr_w * cfg.scale + (lr_w * cfg.scale) % 2;
    const std::size_t hw = H * W, half = (H / 2) * (W / 2);
    const std::size_t fk2 = cfg.front_kernel * cfg.front_kernel, tk2 = cfg.tconv_kernel * cfg.tconv_kernel;
    CostReport r;
    auto add = [&](std::string name, std::size_t params, std::size_t madds) {
        r.layers.push_back({std::move(name), params, madds});
        r.total_params += params;
        r.total_multiadds += madds;
    };
    add("y_head conv3x3 1->C", 9 * C + C, C * 9 * hw);
    for (std::size_t i = 0; i < cfg.num_blocks; ++i) {
        const std::string p = "blocks." + std::to_string(i) + " ";
        add(p + "front conv", q * C * fk2 + q, q * C * fk2 * hw);
        add(p + "haar dwt", 0, 4 * C * half);
        add(p + "mlp1 1x1", hidden * C + hidden, hidden * C * half);
        add(p + "mlp2 1x1", C * hidden + C, C * hidden * half);
        add(p + "tconv", C * C * tk2 + C, C * C * tk2 * half);
        add(p + "batch norm", 2 * C, C * hw);
    }
    add("y_tail conv3x3 C->1", 9 * C + 1, C * 9 * hw);
    return r;
}

template <typename T>
std::size_t count_params(const WaveMixSR<T>& net) {
    std::size_t n = 0;
    for (const auto& p : net.parameters()) n += p.tensor.numel();
    return n;
}

template <typename T>
std::size_t count_multiadds(const WaveMixSR<T>& net, std::size_t lr_h, std::size_t lr_w) {
    return cost_report(net.config(), lr_h, lr_w).total_multiadds;
}

}  // namespace wmsr
