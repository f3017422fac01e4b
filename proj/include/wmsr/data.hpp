#pragma once

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "wmsr/image.hpp"
#include "wmsr/png_io.hpp"
#include "wmsr/tensor.hpp"

namespace wmsr {

struct NamedImage {
    std::string name;
    PlanarImage image;
};

struct DirListing {
    std::vector<NamedImage> images;       // sorted by filename
    std::vector<std::string> unreadable;  // "name: reason"
};

/// Loads every *.png in a directory in filename order; unreadable files are
/// listed, not fatal.
inline DirListing load_png_dir(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw ImageError("not a directory: '" + dir + "'");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        auto ext = e.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (e.is_regular_file() && ext == ".png") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    DirListing out;
    for (const auto& f : files) {
        try {
            out.images.push_back({f.filename().string(), to_planar(load_png(f.string()))});
        } catch (const ImageError& e) {
            out.unreadable.push_back(f.filename().string() + ": " + e.what());
        }
    }
    return out;
}

/// Bicubic 1/scale degradation.
inline PlanarImage degrade(const PlanarImage& hr, std::size_t scale) {
    return resample(hr, ScaleFactor{1, scale}, Interpolation::bicubic);
}

/// Largest top-left crop whose sides are multiples of scale.
inline PlanarImage modcrop(const PlanarImage& img, std::size_t scale) {
    return crop(img, 0, 0, img.width - img.width % scale, img.height - img.height % scale);
}

struct TrainingPair {
    PlanarImage lr, hr;
};

enum class SampleMode { full_image, random_patch };

/// Emits (LR, HR) pairs where LR is always the bicubic downsample of the HR crop.
class PairSampler {
public:
    PairSampler(std::vector<PlanarImage> hr, std::size_t scale, SampleMode mode, std::size_t patch_size = 64,
                std::ostream* warn = &std::cerr)
        : scale_(scale), mode_(mode), patch_(patch_size - patch_size % scale) {
        if (scale < 1) throw ContractError("sampler scale must be >= 1");
        if (mode == SampleMode::random_patch && patch_ < scale)
            throw ContractError("patch size " + std::to_string(patch_size) + " is smaller than the scale");
        for (std::size_t i = 0; i < hr.size(); ++i) {
            auto& img = hr[i];
            if (mode == SampleMode::random_patch && (img.width < patch_ || img.height < patch_)) {
                if (warn)
                    *warn << "warning: training image " << i << " (" << img.width << "x" << img.height
                          << ") is smaller than the " << patch_ << "px patch; skipped\n";
                continue;
            }
            if (mode == SampleMode::full_image && (img.width % scale || img.height % scale))
                throw ContractError("full-image sampling needs dims divisible by " + std::to_string(scale) + ", image " +
                                    std::to_string(i) + " is " + std::to_string(img.width) + "x" +
                                    std::to_string(img.height));
            images_.push_back(std::move(img));
        }
        if (images_.empty()) throw ContractError("no usable training images");
    }

    std::size_t size() const { return images_.size(); }
    std::size_t scale() const { return scale_; }
    std::size_t patch_size() const { return patch_; }
    SampleMode mode() const { return mode_; }

    /// Full image, or the top-left patch, of image `index`.
    TrainingPair make_pair(std::size_t index) const {
        const auto& img = images_.at(index);
        PlanarImage hr = mode_ == SampleMode::full_image ? img : crop(img, 0, 0, patch_, patch_);
        return {degrade(hr, scale_), std::move(hr)};
    }

    /// Random image and (in patch mode) random crop position.
    TrainingPair sample(std::mt19937_64& rng) const {
        const std::size_t idx = std::uniform_int_distribution<std::size_t>(0, images_.size() - 1)(rng);
        const auto& img = images_[idx];
        if (mode_ == SampleMode::full_image) return {degrade(img, scale_), img};
        const std::size_t x = std::uniform_int_distribution<std::size_t>(0, img.width - patch_)(rng);
        const std::size_t y = std::uniform_int_distribution<std::size_t>(0, img.height - patch_)(rng);
        PlanarImage hr = crop(img, x, y, patch_, patch_);
        return {degrade(hr, scale_), std::move(hr)};
    }

private:
    std::size_t scale_;
    SampleMode mode_;
    std::size_t patch_;
    std::vector<PlanarImage> images_;
};

/// Stacks planes of equal size into an (n, 1, h, w) tensor.
template <typename T>
Tensor<T> stack_planes(const std::vector<const std::vector<double>*>& planes, std::size_t w, std::size_t h) {
    Tensor<T> t(Shape{planes.size(), 1, h, w});
    auto d = t.data();
    for (std::size_t n = 0; n < planes.size(); ++n) {
        if (planes[n]->size() != w * h) throw ContractError("stack_planes: plane size mismatch");
        for (std::size_t i = 0; i < w * h; ++i) d[n * w * h + i] = static_cast<T>((*planes[n])[i]);
    }
    return t;
}

}  // namespace wmsr
