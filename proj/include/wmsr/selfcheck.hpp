#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "wmsr/gradcheck.hpp"
#include "wmsr/image.hpp"
#include "wmsr/losses.hpp"
#include "wmsr/model.hpp"
#include "wmsr/ops.hpp"
#include "wmsr/wavelet.hpp"

// Fast invariant suite shared by `wmsr selfcheck` and the test binaries.

namespace wmsr::selfcheck {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

template <typename T>
Tensor<T> random_tensor(Shape s, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    Tensor<T> t(s);
    fill_uniform(t, lo, hi, rng);
    return t;
}

/// Random linear functional <x, r>: turns any tensor op into a scalar for gradient checks.
inline std::function<Tensor<double>(const Tensor<double>&)> project(
    std::function<Tensor<double>(const Tensor<double>&)> op, Shape out_shape, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Tensor<double> r = random_tensor<double>(out_shape, rng);
    return [op = std::move(op), r](const Tensor<double>& x) { return sum(mul(op(x), r)); };
}

inline std::string fmt(double v) {
    std::ostringstream o;
    o.precision(3);
    o << std::scientific << v;
    return o.str();
}

inline CheckResult dwt_round_trip(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    double worst = 0, energy = 0;
    for (int i = 0; i < 10; ++i) {
        const auto x = random_tensor<double>(Shape{2, 3, 16, 12}, rng);
        const auto y = haar_dwt2d(x);
        const auto z = haar_idwt2d(y);
        double ex = 0, ey = 0;
        for (std::size_t k = 0; k < x.numel(); ++k) {
            worst = std::max(worst, std::abs(z.data()[k] - x.data()[k]));
            ex += x.data()[k] * x.data()[k];
            ey += y.data()[k] * y.data()[k];
        }
        energy = std::max(energy, std::abs(ey - ex) / ex);
    }
    return {"dwt round trip and energy", worst < 1e-12 && energy < 1e-12,
            "max abs err " + fmt(worst) + ", energy rel err " + fmt(energy)};
}

inline CheckResult color_round_trip(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    PlanarImage img(ColorSpace::rgb, 17, 9);
    for (auto& p : img.planes)
        for (auto& v : p) v = u(rng);
    const PlanarImage back = ycbcr_to_rgb(rgb_to_ycbcr(img));
    double worst = 0;
    for (int c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < img.size(); ++i) worst = std::max(worst, std::abs(back.planes[c][i] - img.planes[c][i]));
    return {"colour round trip", worst < 1e-6, "max abs err " + fmt(worst)};
}

/// <conv(x), y> == <x, conv_transpose(y)> for a shared weight.
inline CheckResult conv_adjoint(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const auto w = random_tensor<double>(Shape{5, 3, 3, 3}, rng);  // conv: 3 -> 5
    const Tensor<double> b0(channel_vector(5)), b1(channel_vector(3));
    const auto x = random_tensor<double>(Shape{2, 3, 11, 9}, rng);
    const auto cx = conv2d(x, w, b0, 2, 1);
    const auto y = random_tensor<double>(cx.shape(), rng);
    const auto ty = conv_transpose2d(y, w, b1, 2, 1);
    double lhs = 0, rhs = 0;
    for (std::size_t i = 0; i < cx.numel(); ++i) lhs += cx.data()[i] * y.data()[i];
    for (std::size_t i = 0; i < x.numel(); ++i) rhs += x.data()[i] * ty.data()[i];
    const double rel = std::abs(lhs - rhs) / std::max(std::abs(lhs), 1e-12);
    return {"conv / transposed conv adjoint", ty.shape() == x.shape() && rel < 1e-6, "rel err " + fmt(rel)};
}

/// Layer-by-layer finite-difference checks at 64-bit; returns one result per layer type.
inline std::vector<CheckResult> layer_grad_checks(std::uint64_t seed, double tol = 1e-5) {
    std::mt19937_64 rng(seed);
    std::vector<CheckResult> out;
    auto check = [&](const std::string& name, const std::function<Tensor<double>(const Tensor<double>&)>& f,
                   const Tensor<double>& x) {
        const double e = grad_check(f, x);
        out.push_back({"grad " + name, e < tol, "max rel err " + fmt(e)});
    };
    {
        const auto w = random_tensor<double>(Shape{3, 2, 3, 3}, rng);
        const auto b = random_tensor<double>(channel_vector(3), rng);
        check("conv2d", project([=](const Tensor<double>& x) { return conv2d(x, w, b, 1, 1); }, Shape{1, 3, 6, 6}, seed),
            random_tensor<double>(Shape{1, 2, 6, 6}, rng));
    }
    {
        const auto w = random_tensor<double>(Shape{2, 3, 4, 4}, rng);
        const auto b = random_tensor<double>(channel_vector(3), rng);
        check("conv_transpose2d",
            project([=](const Tensor<double>& x) { return conv_transpose2d(x, w, b, 2, 1); }, Shape{1, 3, 8, 8}, seed),
            random_tensor<double>(Shape{1, 2, 4, 4}, rng));
    }
    {
        const auto g = random_tensor<double>(channel_vector(3), rng, 0.5, 1.5);
        const auto be = random_tensor<double>(channel_vector(3), rng);
        check("batch_norm2d",
            project(
                [=](const Tensor<double>& x) {
                    RunningStats<double> st(3);
                    return batch_norm2d(x, g, be, st, true);
                },
                Shape{2, 3, 4, 4}, seed),
            random_tensor<double>(Shape{2, 3, 4, 4}, rng));
    }
    check("gelu", project([](const Tensor<double>& x) { return gelu(x); }, Shape{1, 2, 5, 5}, seed),
        random_tensor<double>(Shape{1, 2, 5, 5}, rng, -3, 3));
    check("haar_dwt2d", project([](const Tensor<double>& x) { return haar_dwt2d(x); }, Shape{1, 8, 3, 4}, seed),
        random_tensor<double>(Shape{1, 2, 6, 8}, rng));
    check("haar_idwt2d", project([](const Tensor<double>& x) { return haar_idwt2d(x); }, Shape{1, 1, 6, 8}, seed),
        random_tensor<double>(Shape{1, 4, 3, 4}, rng));
    {
        const auto z = random_tensor<double>(Shape{1, 3, 4, 4}, rng);
        check("concat_channels",
            project([=](const Tensor<double>& x) { return concat_channels<double>({z, x, z}); }, Shape{1, 8, 4, 4}, seed),
            random_tensor<double>(Shape{1, 2, 4, 4}, rng));
    }
    {
        const auto z = random_tensor<double>(Shape{1, 2, 4, 4}, rng);
        check("add", project([=](const Tensor<double>& x) { return add(x, z); }, Shape{1, 2, 4, 4}, seed),
            random_tensor<double>(Shape{1, 2, 4, 4}, rng));
    }
    check("pad_reflect/crop",
        project([](const Tensor<double>& x) { return crop(mul(pad_reflect(x, 1, 1), pad_reflect(x, 1, 1)), 4, 5); },
                Shape{1, 1, 4, 5}, seed),
        random_tensor<double>(Shape{1, 1, 5, 5}, rng));
    {
        std::mt19937_64 drng(seed);
        check("dropout",
            project(
                [=](const Tensor<double>& x) mutable {
                    drng.seed(seed);
                    return dropout(x, 0.3, true, drng);
                },
                Shape{1, 2, 4, 4}, seed),
            random_tensor<double>(Shape{1, 2, 4, 4}, rng));
    }
    return out;
}

/// Gradient check of a complete WaveMix block (C=8) w.r.t. its input.
inline CheckResult block_grad_check(std::uint64_t seed, double tol = 1e-5) {
    ModelConfig cfg;
    cfg.embedding_dim = 8;
    cfg.num_blocks = 1;
    std::mt19937_64 rng(seed);
    auto block = std::make_shared<WaveMixBlock<double>>(cfg, rng);
    const auto x = random_tensor<double>(Shape{1, 8, 8, 8}, rng);
    const auto f = project(
        [=](const Tensor<double>& in) {
            std::mt19937_64 drng(seed + 1);
            return block->forward(in, cfg, true, drng);
        },
        Shape{1, 8, 8, 8}, seed);
    const double e = grad_check(f, x);
    return {"grad WaveMix block", e < tol, "max rel err " + fmt(e)};
}

/// Gradient check through a 2-block mini network (head, blocks, tail, odd-size padding).
inline CheckResult network_grad_check(std::uint64_t seed, double tol = 1e-4) {
    ModelConfig cfg;
    cfg.embedding_dim = 8;
    cfg.num_blocks = 2;
    auto net = std::make_shared<WaveMixSR<double>>(cfg, seed);
    std::mt19937_64 rng(seed);
    const auto x = random_tensor<double>(Shape{1, 1, 10, 9}, rng, 0.0, 1.0);
    const auto target = random_tensor<double>(Shape{1, 1, 10, 9}, rng, 0.0, 1.0);
    const auto f = [=](const Tensor<double>& in) {
        net->reseed_dropout(seed + 7);
        return loss(net->forward_y(in, true), target, LossKind::l2);
    };
    const double e = grad_check(f, x);
    return {"grad 2-block network", e < tol, "max rel err " + fmt(e)};
}

inline std::vector<CheckResult> run_all(std::uint64_t seed = 1) {
    std::vector<CheckResult> r{dwt_round_trip(seed), color_round_trip(seed), conv_adjoint(seed)};
    for (auto& c : layer_grad_checks(seed)) r.push_back(std::move(c));
    r.push_back(block_grad_check(seed));
    r.push_back(network_grad_check(seed));
    return r;
}

}  // namespace wmsr::selfcheck
