#pragma once

#include <cmath>
#include <vector>

#include "wmsr/tensor.hpp"

namespace wmsr {

template <typename T>
double grad_norm(const std::vector<Tensor<T>>& params) {
    double s = 0;
    for (const auto& p : params)
        for (T g : p.grad()) s += static_cast<double>(g) * g;
    return std::sqrt(s);
}

struct AdamWConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

/// AdamW with decoupled weight decay: w <- w(1 - lr*wd), then the
/// bias-corrected Adam step.
template <typename T>
class AdamW {
public:
    AdamW(std::vector<Tensor<T>> params, AdamWConfig cfg) : params_(std::move(params)), cfg_(cfg) {
        for (const auto& p : params_) {
            m_.emplace_back(p.numel(), 0.0);
            v_.emplace_back(p.numel(), 0.0);
        }
    }

    void step() {
        ++t_;
        const double bc1 = 1 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (std::size_t k = 0; k < params_.size(); ++k) {
            auto w = params_[k].data();
            auto g = params_[k].grad();
            auto& m = m_[k];
            auto& v = v_[k];
            for (std::size_t i = 0; i < w.size(); ++i) {
                const double gi = g.empty() ? 0.0 : static_cast<double>(g[i]);
                m[i] = cfg_.beta1 * m[i] + (1 - cfg_.beta1) * gi;
                v[i] = cfg_.beta2 * v[i] + (1 - cfg_.beta2) * gi * gi;
                double wi = static_cast<double>(w[i]) * (1 - cfg_.lr * cfg_.weight_decay);
                wi -= cfg_.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg_.eps);
                w[i] = static_cast<T>(wi);
            }
        }
    }

    std::size_t steps() const { return t_; }
    const AdamWConfig& config() const { return cfg_; }

private:
    std::vector<Tensor<T>> params_;
    AdamWConfig cfg_;
    std::vector<std::vector<double>> m_, v_;
    std::size_t t_ = 0;
};

struct SGDConfig {
    double lr = 1e-3;
    double momentum = 0.9;
};

/// SGD with heavy-ball momentum: v <- mu*v + g; w <- w - lr*v.
template <typename T>
class SGD {
public:
    SGD(std::vector<Tensor<T>> params, SGDConfig cfg) : params_(std::move(params)), cfg_(cfg) {
        for (const auto& p : params_) v_.emplace_back(p.numel(), 0.0);
    }

    void step() {
        for (std::size_t k = 0; k < params_.size(); ++k) {
            auto w = params_[k].data();
            auto g = params_[k].grad();
            auto& v = v_[k];
            for (std::size_t i = 0; i < w.size(); ++i) {
                v[i] = cfg_.momentum * v[i] + (g.empty() ? 0.0 : static_cast<double>(g[i]));
                w[i] = static_cast<T>(static_cast<double>(w[i]) - cfg_.lr * v[i]);
            }
        }
    }

    const SGDConfig& config() const { return cfg_; }

private:
    std::vector<Tensor<T>> params_;
    SGDConfig cfg_;
    std::vector<std::vector<double>> v_;
};

}  // namespace wmsr
