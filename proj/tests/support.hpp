#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <unistd.h>

#include "wmsr/wmsr.hpp"

namespace wmsr::test {

inline std::string data_path(const std::string& rel) { return std::string(WMSR_TEST_DATA) + "/" + rel; }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("wmsr_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string str() const { return path_.string(); }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

template <typename T>
Tensor<T> random_tensor(Shape s, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    std::mt19937_64 rng(seed);
    Tensor<T> t(s);
    fill_uniform(t, lo, hi, rng);
    return t;
}

inline PlanarImage random_rgb(std::size_t w, std::size_t h, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    PlanarImage p(ColorSpace::rgb, w, h);
    for (auto& pl : p.planes)
        for (auto& v : pl) v = u(rng);
    return p;
}

/// Thin C=8 model for fast tests.
inline ModelConfig tiny_config(std::size_t blocks = 2, std::size_t scale = 2) {
    ModelConfig c;
    c.embedding_dim = 8;
    c.num_blocks = blocks;
    c.scale = scale;
    return c;
}

}  // namespace wmsr::test
