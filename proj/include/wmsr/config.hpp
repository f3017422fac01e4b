#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "wmsr/checkpoint.hpp"
#include "wmsr/kv.hpp"
#include "wmsr/metrics.hpp"
#include "wmsr/model.hpp"
#include "wmsr/train.hpp"

namespace wmsr {

/// Everything a CLI run can be configured with.
struct RunConfig {
    std::uint64_t seed = 0;
    bool deterministic = false;
    ModelConfig model;
    TrainConfig train;
    std::optional<std::size_t> eval_shave;  // empty: shave = scale
    bool eval_y_only = true;
    std::string hr_dir;
    std::string val_dir;

    MetricProtocol protocol(std::size_t scale) const {
        return MetricProtocol{eval_shave.value_or(scale), eval_y_only, 1.0};
    }
};

struct ConfigKey {
    std::string name;
    std::string help;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

class ConfigError : public kv::ParseError {
public:
    using kv::ParseError::ParseError;
};

namespace detail {

inline ConfigKey uint_key(std::string name, std::string help, std::function<std::size_t&(RunConfig&)> ref) {
    return {name, std::move(help),
            [ref](RunConfig c) { return std::to_string(ref(c)); },
            [ref, name](RunConfig& c, const std::string& v) { ref(c) = kv::to_uint(name, v); }};
}

inline ConfigKey real_key(std::string name, std::string help, std::function<double&(RunConfig&)> ref) {
    return {name, std::move(help),
            [ref](RunConfig c) { return kv::from_double(ref(c)); },
            [ref, name](RunConfig& c, const std::string& v) { ref(c) = kv::to_double(name, v); }};
}

}  // namespace detail

/// Registry of every recognised key, in print order.
inline const std::vector<ConfigKey>& config_keys() {
    using detail::real_key;
    using detail::uint_key;
    static const std::vector<ConfigKey> keys = [] {
        std::vector<ConfigKey> k;
        k.push_back({"seed", "single seed for initialisation, sampling and dropout",
                     [](const RunConfig& c) { return std::to_string(c.seed); },
                     [](RunConfig& c, const std::string& v) { c.seed = kv::to_uint("seed", v); }});
        k.push_back({"deterministic", "serial kernels and zeroed timings in logs",
                     [](const RunConfig& c) { return std::string(c.deterministic ? "1" : "0"); },
                     [](RunConfig& c, const std::string& v) { c.deterministic = kv::to_bool("deterministic", v); }});
        k.push_back(uint_key("model.embedding_dim", "channels C (multiple of 4)",
                             [](RunConfig& c) -> std::size_t& { return c.model.embedding_dim; }));
        k.push_back(uint_key("model.num_blocks", "WaveMix blocks in series",
                             [](RunConfig& c) -> std::size_t& { return c.model.num_blocks; }));
        k.push_back(uint_key("model.scale", "upscaling factor (2, 3 or 4)",
                             [](RunConfig& c) -> std::size_t& { return c.model.scale; }));
        k.push_back(uint_key("model.mlp_factor", "MLP expansion factor",
                             [](RunConfig& c) -> std::size_t& { return c.model.mlp_factor; }));
        k.push_back(uint_key("model.tconv_kernel", "transposed conv kernel (even)",
                             [](RunConfig& c) -> std::size_t& { return c.model.tconv_kernel; }));
        k.push_back(uint_key("model.front_kernel", "front conv kernel (odd)",
                             [](RunConfig& c) -> std::size_t& { return c.model.front_kernel; }));
        k.push_back(real_key("model.dropout", "dropout probability inside the MLP",
                             [](RunConfig& c) -> double& { return c.model.dropout; }));
        k.push_back({"model.upsample", "bilinear or bicubic",
                     [](const RunConfig& c) { return std::string(to_string(c.model.upsample)); },
                     [](RunConfig& c, const std::string& v) { c.model.upsample = parse_interpolation(v); }});
        k.push_back({"train.loss", "l1, l2, huber, charbonnier or ssim",
                     [](const RunConfig& c) { return std::string(to_string(c.train.loss)); },
                     [](RunConfig& c, const std::string& v) { c.train.loss = parse_loss(v); }});
        k.push_back(real_key("train.huber_delta", "Huber threshold",
                             [](RunConfig& c) -> double& { return c.train.loss_params.huber_delta; }));
        k.push_back(real_key("train.charbonnier_eps", "Charbonnier epsilon",
                             [](RunConfig& c) -> double& { return c.train.loss_params.charbonnier_eps; }));
        k.push_back(real_key("train.adamw.lr", "phase-1 learning rate",
                             [](RunConfig& c) -> double& { return c.train.adamw.lr; }));
        k.push_back(real_key("train.adamw.beta1", "", [](RunConfig& c) -> double& { return c.train.adamw.beta1; }));
        k.push_back(real_key("train.adamw.beta2", "", [](RunConfig& c) -> double& { return c.train.adamw.beta2; }));
        k.push_back(real_key("train.adamw.eps", "", [](RunConfig& c) -> double& { return c.train.adamw.eps; }));
        k.push_back(real_key("train.adamw.weight_decay", "decoupled weight decay",
                             [](RunConfig& c) -> double& { return c.train.adamw.weight_decay; }));
        k.push_back(real_key("train.sgd.lr", "phase-2 learning rate",
                             [](RunConfig& c) -> double& { return c.train.sgd.lr; }));
        k.push_back(real_key("train.sgd.momentum", "", [](RunConfig& c) -> double& { return c.train.sgd.momentum; }));
        k.push_back(uint_key("train.max_steps", "total optimisation steps",
                             [](RunConfig& c) -> std::size_t& { return c.train.max_steps; }));
        k.push_back(uint_key("train.phase2_start", "first SGD step",
                             [](RunConfig& c) -> std::size_t& { return c.train.phase2_start; }));
        k.push_back(uint_key("train.patch_size", "HR patch side (even, >= 16)",
                             [](RunConfig& c) -> std::size_t& { return c.train.patch_size; }));
        k.push_back(uint_key("train.batch_size", "patches per step",
                             [](RunConfig& c) -> std::size_t& { return c.train.batch_size; }));
        k.push_back({"train.loss_target", "y_channel or rgb",
                     [](const RunConfig& c) { return std::string(to_string(c.train.loss_target)); },
                     [](RunConfig& c, const std::string& v) { c.train.loss_target = parse_loss_target(v); }});
        k.push_back({"train.sample_mode", "random_patch or full_image",
                     [](const RunConfig& c) { return std::string(to_string(c.train.sample_mode)); },
                     [](RunConfig& c, const std::string& v) { c.train.sample_mode = parse_sample_mode(v); }});
        k.push_back(uint_key("train.validate_every", "validation interval in steps (0: end only)",
                             [](RunConfig& c) -> std::size_t& { return c.train.validate_every; }));
        k.push_back({"eval.shave", "border pixels excluded from metrics, or 'auto' (= scale)",
                     [](const RunConfig& c) { return c.eval_shave ? std::to_string(*c.eval_shave) : std::string("auto"); },
                     [](RunConfig& c, const std::string& v) {
                         if (v == "auto") c.eval_shave.reset();
                         else c.eval_shave = kv::to_uint("eval.shave", v);
                     }});
        k.push_back({"eval.y_only", "score the Y plane only",
                     [](const RunConfig& c) { return std::string(c.eval_y_only ? "1" : "0"); },
                     [](RunConfig& c, const std::string& v) { c.eval_y_only = kv::to_bool("eval.y_only", v); }});
        k.push_back({"data.hr_dir", "directory of HR training PNGs", [](const RunConfig& c) { return c.hr_dir; },
                     [](RunConfig& c, const std::string& v) { c.hr_dir = v; }});
        k.push_back({"data.val_dir", "directory of HR validation PNGs", [](const RunConfig& c) { return c.val_dir; },
                     [](RunConfig& c, const std::string& v) { c.val_dir = v; }});
        return k;
    }();
    return keys;
}

inline std::string valid_keys_list() {
    std::string s;
    for (const auto& k : config_keys()) s += (s.empty() ? "" : ", ") + k.name;
    return s;
}

inline void set_key(RunConfig& c, const std::string& key, const std::string& value) {
    for (const auto& k : config_keys())
        if (k.name == key) {
            k.set(c, value);
            return;
        }
    throw ConfigError("unknown config key '" + key + "'; valid keys: " + valid_keys_list());
}

inline void apply_entries(RunConfig& c, const kv::Entries& entries) {
    for (const auto& [k, v] : entries) set_key(c, k, v);
}

/// Fully resolved config as key=value text.
inline std::string format_config(const RunConfig& c) {
    kv::Entries e;
    for (const auto& k : config_keys()) e.push_back({k.name, k.get(c)});
    return kv::format(e);
}

/// Checks cross-field constraints after all sources are applied.
inline void finalize(RunConfig& c) {
    c.train.seed = c.seed;
    c.model.validate();
    c.train.validate();
}

}  // namespace wmsr
