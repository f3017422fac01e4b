#pragma once

#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "wmsr/data.hpp"
#include "wmsr/metrics.hpp"
#include "wmsr/model.hpp"
#include "wmsr/parallel.hpp"

namespace wmsr {

enum class EvalMethod { identity, bicubic, model };

inline const char* to_string(EvalMethod m) {
    switch (m) {
        case EvalMethod::identity: return "identity";
        case EvalMethod::bicubic: return "bicubic";
        case EvalMethod::model: return "model";
    }
    return "?";
}

inline EvalMethod parse_eval_method(const std::string& s) {
    if (s == "identity") return EvalMethod::identity;
    if (s == "bicubic") return EvalMethod::bicubic;
    if (s == "model") return EvalMethod::model;
    throw ContractError("unknown eval method '" + s + "' (expected identity, bicubic or model)");
}

struct EvalRow {
    std::string filename;
    double psnr_db = 0;
    double ssim = 0;
    std::size_t width = 0, height = 0;
};

struct EvalReport {
    std::vector<EvalRow> rows;
    std::vector<std::string> skipped;
    double mean_psnr = 0;
    double mean_ssim = 0;
    std::size_t scale = 0;
    MetricProtocol protocol;
};

/// The 8-bit LR input a user would get from `make-lr`.
inline PlanarImage make_lr(const PlanarImage& hr, std::size_t scale) {
    return to_planar(from_planar(degrade(modcrop(hr, scale), scale)));
}

/// Scores every PNG in hr_dir: HR is cropped to a multiple of scale, LR is its
/// quantised bicubic downsample, and the reconstruction is compared with HR.
template <typename T>
EvalReport evaluate_images(const std::vector<NamedImage>& images, EvalMethod method, std::size_t scale,
                           const MetricProtocol& protocol, const WaveMixSR<T>* net = nullptr) {
    if (method == EvalMethod::model) {
        if (!net) throw ContractError("eval method 'model' needs a checkpoint");
        if (net->config().scale != scale)
            throw ContractError("checkpoint was trained for scale " + std::to_string(net->config().scale) +
                                ", eval requested scale " + std::to_string(scale));
    }
    struct Slot {
        bool ok = false;
        EvalRow row;
        std::string error;
    };
    std::vector<Slot> slots(images.size());
    parallel_for(images.size(), 1, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            Slot& s = slots[i];
            try {
                const PlanarImage hr = modcrop(images[i].image, scale);
                PlanarImage sr;
                if (method == EvalMethod::identity) {
                    sr = hr;
                } else {
                    const PlanarImage lr = make_lr(hr, scale);
                    sr = method == EvalMethod::bicubic ? resample(lr, ScaleFactor{scale, 1}, Interpolation::bicubic)
                                                       : net->predict(lr);
                }
                s.row = {images[i].name, psnr(sr, hr, protocol), ssim(sr, hr, protocol), hr.width, hr.height};
                s.ok = true;
            } catch (const std::exception& ex) {
                s.error = images[i].name + ": " + ex.what();
            }
        }
    });
    EvalReport r;
    r.scale = scale;
    r.protocol = protocol;
    for (auto& s : slots) {
        if (s.ok) r.rows.push_back(std::move(s.row));
        else r.skipped.push_back(std::move(s.error));
    }
    for (const auto& row : r.rows) {
        r.mean_psnr += row.psnr_db;
        r.mean_ssim += row.ssim;
    }
    if (!r.rows.empty()) {
        r.mean_psnr /= static_cast<double>(r.rows.size());
        r.mean_ssim /= static_cast<double>(r.rows.size());
    }
    return r;
}

template <typename T>
EvalReport evaluate_dir(const std::string& hr_dir, EvalMethod method, std::size_t scale,
                        const MetricProtocol& protocol, const WaveMixSR<T>* net = nullptr) {
    DirListing listing = load_png_dir(hr_dir);
    EvalReport r = evaluate_images(listing.images, method, scale, protocol, net);
    r.skipped.insert(r.skipped.begin(), listing.unreadable.begin(), listing.unreadable.end());
    return r;
}

inline EvalReport evaluate_dir(const std::string& hr_dir, EvalMethod method, std::size_t scale,
                               const MetricProtocol& protocol) {
    return evaluate_dir<float>(hr_dir, method, scale, protocol, nullptr);
}

namespace detail {
inline std::string fmt_metric(double v, int decimals) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}
}  // namespace detail

/// CSV: header, one row per image, a "mean" row and a protocol comment.
inline std::string format_csv(const EvalReport& r) {
    std::ostringstream o;
    o << "filename,psnr_db,ssim,width,height,scale\n";
    for (const auto& row : r.rows)
        o << row.filename << ',' << detail::fmt_metric(row.psnr_db, 4) << ',' << detail::fmt_metric(row.ssim, 6) << ','
          << row.width << ',' << row.height << ',' << r.scale << '\n';
    o << "mean," << detail::fmt_metric(r.mean_psnr, 4) << ',' << detail::fmt_metric(r.mean_ssim, 6) << ",,,"
      << r.scale << '\n';
    o << "# shave=" << r.protocol.shave_border << " y_only=" << (r.protocol.y_only ? 1 : 0)
      << " images=" << r.rows.size() << " skipped=" << r.skipped.size() << '\n';
    for (const auto& s : r.skipped) o << "# skipped " << s << '\n';
    return o.str();
}

}  // namespace wmsr
