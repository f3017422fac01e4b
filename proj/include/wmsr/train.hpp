#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "wmsr/checkpoint.hpp"
#include "wmsr/data.hpp"
#include "wmsr/losses.hpp"
#include "wmsr/metrics.hpp"
#include "wmsr/model.hpp"
#include "wmsr/optim.hpp"

namespace wmsr {

class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class LossTarget { y_channel, rgb };

inline const char* to_string(LossTarget t) { return t == LossTarget::y_channel ? "y_channel" : "rgb"; }
inline LossTarget parse_loss_target(const std::string& s) {
    if (s == "y_channel") return LossTarget::y_channel;
    if (s == "rgb") return LossTarget::rgb;
    throw ContractError("unknown loss target '" + s + "' (expected y_channel or rgb)");
}

inline const char* to_string(SampleMode m) { return m == SampleMode::full_image ? "full_image" : "random_patch"; }
inline SampleMode parse_sample_mode(const std::string& s) {
    if (s == "full_image") return SampleMode::full_image;
    if (s == "random_patch") return SampleMode::random_patch;
    throw ContractError("unknown sample mode '" + s + "' (expected full_image or random_patch)");
}

struct TrainConfig {
    LossKind loss = LossKind::huber;
    LossParams loss_params;
    AdamWConfig adamw;
    SGDConfig sgd;
    std::size_t max_steps = 1000;
    std::size_t phase2_start = 900;  // first SGD step
    std::size_t patch_size = 64;
    std::size_t batch_size = 4;
    std::uint64_t seed = 0;
    LossTarget loss_target = LossTarget::y_channel;
    SampleMode sample_mode = SampleMode::random_patch;
    std::size_t validate_every = 0;  // 0: only after the last step

    void validate() const {
        if (phase2_start > max_steps)
            throw ContractError("train.phase2_start (" + std::to_string(phase2_start) + ") exceeds train.max_steps (" +
                                std::to_string(max_steps) + ")");
        if (patch_size < 16 || patch_size % 2 != 0)
            throw ContractError("train.patch_size must be even and >= 16, got " + std::to_string(patch_size));
        if (batch_size == 0) throw ContractError("train.batch_size must be positive");
        if (!(adamw.lr >= 0) || !(sgd.lr >= 0)) throw ContractError("learning rates must be non-negative");
    }
};

struct StepLog {
    std::size_t step = 0;
    int phase = 1;
    double loss = 0;
    double lr = 0;
    double grad_norm = 0;
    double elapsed_ms = 0;
};

struct ValidationLog {
    std::size_t step = 0;
    double psnr_db = 0;
};

struct TrainReport {
    std::vector<StepLog> steps;
    std::vector<ValidationLog> validation;
    double wall_ms = 0;
    TrainingCounters counters;
};

/// Output sinks for train(). zero_elapsed writes 0 for timings so logs of
/// identical runs are byte-identical.
struct TrainIO {
    std::ostream* csv = nullptr;
    std::ostream* progress = nullptr;
    std::size_t progress_every = 100;
    bool zero_elapsed = false;
};

inline constexpr const char* kTrainLogHeader = "step,phase,loss,lr,grad_norm,elapsed_ms";

struct PairScore {
    double psnr_db = 0;
    double ssim = 0;
};

/// Mean Y-PSNR / SSIM of the network over pairs, shaving `scale` pixels.
template <typename T>
PairScore score_pairs(const WaveMixSR<T>& net, const std::vector<TrainingPair>& pairs) {
    PairScore s;
    if (pairs.empty()) return s;
    const auto proto = MetricProtocol::for_scale(net.config().scale);
    for (const auto& p : pairs) {
        const PlanarImage rgb = net.predict(p.lr);
        s.psnr_db += psnr(rgb, p.hr, proto);
        s.ssim += ssim(rgb, p.hr, proto);
    }
    s.psnr_db /= static_cast<double>(pairs.size());
    s.ssim /= static_cast<double>(pairs.size());
    return s;
}

/// Same score for plain bicubic upsampling.
inline PairScore score_bicubic(const std::vector<TrainingPair>& pairs, std::size_t scale) {
    PairScore s;
    if (pairs.empty()) return s;
    const auto proto = MetricProtocol::for_scale(scale);
    for (const auto& p : pairs) {
        const PlanarImage up = resample(p.lr, ScaleFactor{scale, 1}, Interpolation::bicubic);
        s.psnr_db += psnr(up, p.hr, proto);
        s.ssim += ssim(up, p.hr, proto);
    }
    s.psnr_db /= static_cast<double>(pairs.size());
    s.ssim /= static_cast<double>(pairs.size());
    return s;
}

namespace detail {

template <typename T>
struct Batch {
    Tensor<T> y_up;       // (n,1,H,W) upsampled luma, network input
    Tensor<T> cb, cr;     // (n,1,H,W) upsampled chroma
    Tensor<T> target_y;   // (n,1,H,W)
    Tensor<T> target_rgb; // (n,3,H,W)
};

template <typename T>
Batch<T> make_batch(const WaveMixSR<T>& net, const std::vector<TrainingPair>& pairs, bool need_rgb) {
    std::vector<PlanarImage> ups, hrs;
    for (const auto& p : pairs) {
        ups.push_back(net.upsample_input(p.lr));
        hrs.push_back(rgb_to_ycbcr(p.hr));
    }
    const std::size_t w = ups.front().width, h = ups.front().height;
    auto planes_of = [](const std::vector<PlanarImage>& v, int c) {
        std::vector<const std::vector<double>*> r;
        for (const auto& img : v) r.push_back(&img.planes[c]);
        return r;
    };
    Batch<T> b;
    b.y_up = stack_planes<T>(planes_of(ups, 0), w, h);
    b.target_y = stack_planes<T>(planes_of(hrs, 0), w, h);
    if (need_rgb) {
        b.cb = stack_planes<T>(planes_of(ups, 1), w, h);
        b.cr = stack_planes<T>(planes_of(ups, 2), w, h);
        b.target_rgb = Tensor<T>(Shape{pairs.size(), 3, h, w});
        for (std::size_t n = 0; n < pairs.size(); ++n)
            for (int c = 0; c < 3; ++c)
                for (std::size_t i = 0; i < w * h; ++i)
                    b.target_rgb.data()[(n * 3 + c) * w * h + i] = static_cast<T>(pairs[n].hr.planes[c][i]);
    }
    return b;
}

/// Differentiable YCbCr -> RGB on an (n,3,H,W) tensor.
template <typename T>
Tensor<T> ycbcr_tensor_to_rgb(const Tensor<T>& ycc) {
    const auto& inv = color::inverse_matrix();
    std::vector<std::vector<double>> m(3, std::vector<double>(3));
    std::vector<double> off(3);
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) m[i][j] = inv[i][j];
        off[i] = -(inv[i][1] * 0.5 + inv[i][2] * 0.5);
    }
    return channel_affine(ycc, m, off);
}

inline std::string format_step(const StepLog& s) {
    std::ostringstream o;
    o << s.step << ',' << s.phase << ',' << std::setprecision(9) << s.loss << ',' << s.lr << ',' << s.grad_norm << ','
      << std::setprecision(6) << s.elapsed_ms;
    return o.str();
}

}  // namespace detail

/// Two-phase training: AdamW for steps [0, phase2_start), then SGD with
/// momentum. Each step is zero_grad -> forward -> loss -> backward -> update.
template <typename T>
TrainReport train(WaveMixSR<T>& net, const TrainConfig& cfg, const PairSampler& data,
                  const std::vector<TrainingPair>& validation = {}, const TrainIO& io = {}) {
    cfg.validate();
    if (data.scale() != net.config().scale)
        throw ContractError("sampler scale " + std::to_string(data.scale()) + " does not match model scale " +
                            std::to_string(net.config().scale));
    std::vector<Tensor<T>> params;
    for (auto& p : net.parameters()) params.push_back(p.tensor);
    AdamW<T> adamw(params, cfg.adamw);
    std::optional<SGD<T>> sgd;

    std::mt19937_64 rng(cfg.seed);
    net.reseed_dropout(cfg.seed ^ 0xd1b54a32d192ed03ULL);
    const bool need_rgb = cfg.loss_target == LossTarget::rgb;

    TrainReport report;
    if (io.csv) *io.csv << kTrainLogHeader << '\n';
    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&] {
        if (io.zero_elapsed) return 0.0;
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    };
    auto run_validation = [&](std::size_t step) {
        if (validation.empty()) return;
        const double p = score_pairs(net, validation).psnr_db;
        report.validation.push_back({step, p});
        if (io.progress) *io.progress << "  validation step " << step << ": Y-PSNR " << p << " dB\n";
    };

    for (std::size_t step = 0; step < cfg.max_steps; ++step) {
        const int phase = step < cfg.phase2_start ? 1 : 2;
        if (phase == 2 && !sgd) sgd.emplace(params, cfg.sgd);
        const double lr = phase == 1 ? cfg.adamw.lr : cfg.sgd.lr;

        std::vector<TrainingPair> pairs;
        for (std::size_t i = 0; i < cfg.batch_size; ++i) pairs.push_back(data.sample(rng));
        const auto batch = detail::make_batch(net, pairs, need_rgb);

        net.zero_grad();
        double loss_value = 0;
        {
            Tape<T> tape;
            auto scope = tape.activate();
            Tensor<T> y = net.forward_y(batch.y_up, true);
            Tensor<T> l;
            if (need_rgb) {
                Tensor<T> rgb = detail::ycbcr_tensor_to_rgb(concat_channels<T>({y, batch.cb, batch.cr}));
                l = loss(rgb, batch.target_rgb, cfg.loss, cfg.loss_params);
            } else {
                l = loss(y, batch.target_y, cfg.loss, cfg.loss_params);
            }
            loss_value = l.item();
            if (std::isfinite(loss_value)) backward(l);
        }
        const double gn = grad_norm(params);
        if (!std::isfinite(loss_value) || !std::isfinite(gn)) {
            std::ostringstream msg;
            msg << "non-finite training loss at step " << step << " (phase " << phase << ", lr " << lr
                << "): loss=" << loss_value << ", grad_norm=" << gn;
            throw TrainingError(msg.str());
        }
        if (phase == 1) adamw.step();
        else sgd->step();

        StepLog s{step, phase, loss_value, lr, gn, elapsed()};
        report.steps.push_back(s);
        if (io.csv) *io.csv << detail::format_step(s) << '\n';
        if (io.progress && (step % io.progress_every == 0 || step + 1 == cfg.max_steps))
            *io.progress << "step " << step << " phase " << phase << " loss " << loss_value << " grad_norm " << gn
                         << '\n';
        if (cfg.validate_every && (step + 1) % cfg.validate_every == 0 && step + 1 != cfg.max_steps)
            run_validation(step + 1);
    }
    run_validation(cfg.max_steps);
    report.counters = {cfg.max_steps, cfg.max_steps > cfg.phase2_start ? 2u : 1u};
    report.wall_ms = elapsed();
    return report;
}

struct AblationRow {
    LossKind kind;
    double psnr_db = 0;
    double ssim = 0;
    double final_loss = 0;
};

/// Row order of the loss comparison table.
inline const std::vector<LossKind>& ablation_order() {
    static const std::vector<LossKind> order{LossKind::l1, LossKind::l2, LossKind::ssim, LossKind::charbonnier,
                                             LossKind::huber};
    return order;
}

inline const char* display_name(LossKind k) {
    switch (k) {
        case LossKind::l1: return "L1";
        case LossKind::l2: return "L2";
        case LossKind::ssim: return "SSIM";
        case LossKind::charbonnier: return "Charbonnier";
        case LossKind::huber: return "Huber";
    }
    return "?";
}

/// Trains one fresh network per loss kind and scores each on `eval`.
template <typename T>
std::vector<AblationRow> ablate_losses(const std::function<WaveMixSR<T>()>& factory, TrainConfig cfg,
                                       const PairSampler& data, const std::vector<TrainingPair>& eval,
                                       const TrainIO& io = {}) {
    std::vector<AblationRow> rows;
    for (LossKind k : ablation_order()) {
        WaveMixSR<T> net = factory();
        cfg.loss = k;
        if (io.progress) *io.progress << "ablation: training with " << display_name(k) << " loss\n";
        TrainIO quiet = io;
        quiet.csv = nullptr;
        const auto rep = train(net, cfg, data, {}, quiet);
        const auto score = score_pairs(net, eval);
        rows.push_back({k, score.psnr_db, score.ssim, rep.steps.empty() ? 0.0 : rep.steps.back().loss});
    }
    return rows;
}

inline std::string format_ablation(const std::vector<AblationRow>& rows) {
    std::ostringstream o;
    o << std::left << std::setw(14) << "Loss" << std::right << std::setw(10) << "PSNR" << std::setw(10) << "SSIM"
      << '\n';
    o << std::fixed;
    for (const auto& r : rows)
        o << std::left << std::setw(14) << display_name(r.kind) << std::right << std::setw(10) << std::setprecision(2)
          << r.psnr_db << std::setw(10) << std::setprecision(4) << r.ssim << '\n';
    return o.str();
}

}  // namespace wmsr
