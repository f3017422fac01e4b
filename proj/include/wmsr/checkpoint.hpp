#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "wmsr/kv.hpp"
#include "wmsr/model.hpp"

// Checkpoint container (all integers little-endian):
//
//   "WMSR"                      4 bytes magic
//   u16 version                 currently 1
//   u32 header_len, header      key=value text: model config, batch-norm
//                               constants, wavelet conventions, counters
//   u32 tensor_count
//   tensor_count x entry:
//     u16 name_len, name bytes
//     u8  dtype                 1 = f32, 2 = f64
//     u32 n, c, h, w
//     u64 byte_offset           relative to the start of the payload
//   payload                     raw little-endian tensor data

namespace wmsr {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

class CheckpointError : public std::runtime_error {
public:
    enum class Kind { io, bad_magic, version, config_mismatch, truncated, unknown_tensor, missing_tensor, shape_mismatch };

    CheckpointError(Kind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

inline constexpr std::uint16_t kCheckpointVersion = 1;

struct TrainingCounters {
    std::uint64_t step = 0;
    std::uint64_t phase = 1;
    friend bool operator==(const TrainingCounters&, const TrainingCounters&) = default;
};

inline kv::Entries model_config_entries(const ModelConfig& c) {
    return {{"model.embedding_dim", std::to_string(c.embedding_dim)},
            {"model.num_blocks", std::to_string(c.num_blocks)},
            {"model.scale", std::to_string(c.scale)},
            {"model.mlp_factor", std::to_string(c.mlp_factor)},
            {"model.tconv_kernel", std::to_string(c.tconv_kernel)},
            {"model.front_kernel", std::to_string(c.front_kernel)},
            {"model.dropout", kv::from_double(c.dropout)},
            {"model.upsample", to_string(c.upsample)}};
}

/// Applies one model.* entry; returns false for keys outside the model namespace.
inline bool apply_model_entry(ModelConfig& c, const std::string& key, const std::string& v) {
    if (key == "model.embedding_dim") c.embedding_dim = kv::to_uint(key, v);
    else if (key == "model.num_blocks") c.num_blocks = kv::to_uint(key, v);
    else if (key == "model.scale") c.scale = kv::to_uint(key, v);
    else if (key == "model.mlp_factor") c.mlp_factor = kv::to_uint(key, v);
    else if (key == "model.tconv_kernel") c.tconv_kernel = kv::to_uint(key, v);
    else if (key == "model.front_kernel") c.front_kernel = kv::to_uint(key, v);
    else if (key == "model.dropout") c.dropout = kv::to_double(key, v);
    else if (key == "model.upsample") c.upsample = parse_interpolation(v);
    else return false;
    return true;
}

namespace detail {

template <typename T>
constexpr std::uint8_t dtype_code() {
    static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
    return std::is_same_v<T, float> ? 1 : 2;
}

class Writer {
public:
    template <typename I>
    void put(I v) {
        char b[sizeof(I)];
        std::memcpy(b, &v, sizeof(I));
        buf_.append(b, sizeof(I));
    }
    void bytes(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }
    std::string& str() { return buf_; }

private:
    std::string buf_;
};

class Reader {
public:
    Reader(const std::string& data, std::string path) : d_(data), path_(std::move(path)) {}
    template <typename I>
    I get() {
        need(sizeof(I));
        I v;
        std::memcpy(&v, d_.data() + pos_, sizeof(I));
        pos_ += sizeof(I);
        return v;
    }
    std::string take(std::size_t n) {
        need(n);
        std::string s = d_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    void need(std::size_t n) const {
        if (pos_ + n > d_.size())
            throw CheckpointError(CheckpointError::Kind::truncated,
                                  "checkpoint '" + path_ + "' is truncated at byte " + std::to_string(pos_));
    }
    std::size_t pos() const { return pos_; }
    const std::string& data() const { return d_; }

private:
    const std::string& d_;
    std::string path_;
    std::size_t pos_ = 0;
};

template <typename T>
kv::Entries header_entries(const WaveMixSR<T>& net, const TrainingCounters& counters) {
    kv::Entries h = model_config_entries(net.config());
    const auto& blocks = net.blocks();
    const RunningStats<T> probe = blocks.empty() ? RunningStats<T>::standard(1) : blocks.front().bn_stats;
    bool initialized = true;
    for (const auto& b : blocks) initialized = initialized && b.bn_stats.initialized;
    h.push_back({"bn.momentum", kv::from_double(probe.momentum)});
    h.push_back({"bn.eps", kv::from_double(probe.eps)});
    h.push_back({"bn.stats_initialized", initialized ? "1" : "0"});
    h.push_back({"dwt.wavelet", "haar"});
    h.push_back({"dwt.normalization", HaarFilterBank::normalization});
    h.push_back({"dwt.band_order", HaarFilterBank::band_order});
    h.push_back({"counter.step", std::to_string(counters.step)});
    h.push_back({"counter.phase", std::to_string(counters.phase)});
    return h;
}

}  // namespace detail

template <typename T>
void save_checkpoint(const WaveMixSR<T>& net, const std::string& path, const TrainingCounters& counters = {}) {
    detail::Writer w;
    w.bytes("WMSR", 4);
    w.put<std::uint16_t>(kCheckpointVersion);
    const std::string header = kv::format(detail::header_entries(net, counters));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(header.size()));
    w.bytes(header.data(), header.size());
    const auto tensors = net.state();
    w.put<std::uint32_t>(static_cast<std::uint32_t>(tensors.size()));
    std::uint64_t offset = 0;
    for (const auto& [name, t] : tensors) {
        w.put<std::uint16_t>(static_cast<std::uint16_t>(name.size()));
        w.bytes(name.data(), name.size());
        w.put<std::uint8_t>(detail::dtype_code<T>());
        const Shape s = t.shape();
        for (std::size_t d : {s.n, s.c, s.h, s.w}) w.put<std::uint32_t>(static_cast<std::uint32_t>(d));
        w.put<std::uint64_t>(offset);
        offset += t.numel() * sizeof(T);
    }
    for (const auto& nt : tensors) w.bytes(nt.tensor.data().data(), nt.tensor.numel() * sizeof(T));

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw CheckpointError(CheckpointError::Kind::io, "cannot open '" + path + "' for writing");
    f.write(w.str().data(), static_cast<std::streamsize>(w.str().size()));
    if (!f) throw CheckpointError(CheckpointError::Kind::io, "failed writing checkpoint '" + path + "'");
}

/// Parsed checkpoint file before it is bound to a network.
struct CheckpointFile {
    std::uint16_t version = 0;
    kv::Entries header;
    ModelConfig config;
    TrainingCounters counters;
    bool stats_initialized = true;
    struct Entry {
        std::string name;
        std::uint8_t dtype;
        Shape shape;
        std::uint64_t offset;
    };
    std::vector<Entry> entries;
    std::string payload;

    static CheckpointFile read(const std::string& path) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw CheckpointError(CheckpointError::Kind::io, "cannot open checkpoint '" + path + "'");
        std::stringstream ss;
        ss << f.rdbuf();
        const std::string data = ss.str();
        detail::Reader r(data, path);
        CheckpointFile cf;
        if (data.size() < 4 || data.compare(0, 4, "WMSR") != 0)
            throw CheckpointError(data.size() < 4 ? CheckpointError::Kind::truncated : CheckpointError::Kind::bad_magic,
                                  "'" + path + "' is not a WMSR checkpoint");
        r.take(4);
        cf.version = r.get<std::uint16_t>();
        if (cf.version != kCheckpointVersion)
            throw CheckpointError(CheckpointError::Kind::version, "checkpoint '" + path + "' has format version " +
                                                                      std::to_string(cf.version) + ", expected " +
                                                                      std::to_string(kCheckpointVersion));
        const auto hlen = r.get<std::uint32_t>();
        cf.header = kv::parse(r.take(hlen), path + " header");
        for (const auto& [k, v] : cf.header) {
            if (apply_model_entry(cf.config, k, v)) continue;
            if (k == "counter.step") cf.counters.step = kv::to_uint(k, v);
            else if (k == "counter.phase") cf.counters.phase = kv::to_uint(k, v);
            else if (k == "bn.stats_initialized") cf.stats_initialized = kv::to_bool(k, v);
            else if (k == "dwt.band_order" && v != HaarFilterBank::band_order)
                throw CheckpointError(CheckpointError::Kind::config_mismatch, "checkpoint uses DWT band order " + v);
            else if (k == "dwt.normalization" && v != HaarFilterBank::normalization)
                throw CheckpointError(CheckpointError::Kind::config_mismatch, "checkpoint uses DWT normalisation " + v);
        }
        const auto count = r.get<std::uint32_t>();
        for (std::uint32_t i = 0; i < count; ++i) {
            Entry e;
            const auto nlen = r.get<std::uint16_t>();
            e.name = r.take(nlen);
            e.dtype = r.get<std::uint8_t>();
            e.shape.n = r.get<std::uint32_t>();
            e.shape.c = r.get<std::uint32_t>();
            e.shape.h = r.get<std::uint32_t>();
            e.shape.w = r.get<std::uint32_t>();
            e.offset = r.get<std::uint64_t>();
            if (e.dtype != 1 && e.dtype != 2)
                throw CheckpointError(CheckpointError::Kind::shape_mismatch,
                                      "tensor '" + e.name + "' has unknown dtype " + std::to_string(e.dtype));
            cf.entries.push_back(std::move(e));
        }
        cf.payload = data.substr(r.pos());
        for (const auto& e : cf.entries) {
            const std::size_t bytes = e.shape.numel() * (e.dtype == 1 ? 4 : 8);
            if (e.offset + bytes > cf.payload.size())
                throw CheckpointError(CheckpointError::Kind::truncated,
                                      "checkpoint '" + path + "' is truncated inside tensor '" + e.name + "'");
        }
        return cf;
    }

    template <typename T>
    void bind(WaveMixSR<T>& net) const {
        if (!(net.config() == config))
            throw CheckpointError(CheckpointError::Kind::config_mismatch,
                                  "checkpoint config does not match the network:\n" +
                                      kv::format(model_config_entries(config)) + "vs\n" +
                                      kv::format(model_config_entries(net.config())));
        std::map<std::string, Tensor<T>> slots;
        for (auto& nt : net.state()) slots.emplace(nt.name, nt.tensor);
        std::size_t bound = 0;
        for (const auto& e : entries) {
            auto it = slots.find(e.name);
            if (it == slots.end())
                throw CheckpointError(CheckpointError::Kind::unknown_tensor, "checkpoint has unknown tensor '" + e.name + "'");
            Tensor<T>& dst = it->second;
            if (dst.shape() != e.shape)
                throw CheckpointError(CheckpointError::Kind::shape_mismatch, "tensor '" + e.name + "' has shape " +
                                                                                 e.shape.str() + ", network expects " +
                                                                                 dst.shape().str());
            const char* src = payload.data() + e.offset;
            auto out = dst.data();
            for (std::size_t i = 0; i < out.size(); ++i) {
                if (e.dtype == 1) {
                    float v;
                    std::memcpy(&v, src + 4 * i, 4);
                    out[i] = static_cast<T>(v);
                } else {
                    double v;
                    std::memcpy(&v, src + 8 * i, 8);
                    out[i] = static_cast<T>(v);
                }
            }
            ++bound;
        }
        if (bound != slots.size()) {
            for (const auto& [name, t] : slots) {
                bool found = false;
                for (const auto& e : entries) found = found || e.name == name;
                if (!found)
                    throw CheckpointError(CheckpointError::Kind::missing_tensor, "checkpoint lacks tensor '" + name + "'");
            }
        }
        for (auto& b : net.blocks()) b.bn_stats.initialized = stats_initialized;
    }
};

template <typename T>
struct LoadedCheckpoint {
    WaveMixSR<T> net;
    TrainingCounters counters;
};

/// Builds a network from the stored config and loads every tensor.
template <typename T>
LoadedCheckpoint<T> load_checkpoint(const std::string& path) {
    const auto cf = CheckpointFile::read(path);
    WaveMixSR<T> net(cf.config);
    cf.bind(net);
    return {std::move(net), cf.counters};
}

/// Loads into an existing network; a differing config is an error.
template <typename T>
TrainingCounters load_checkpoint_into(WaveMixSR<T>& net, const std::string& path) {
    const auto cf = CheckpointFile::read(path);
    cf.bind(net);
    return cf.counters;
}

}  // namespace wmsr
