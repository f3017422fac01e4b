// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "support.hpp"
#include "wmsr/cli.hpp"
#include "wmsr/gradcheck.hpp"
#include "wmsr/selfcheck.hpp"

using namespace wmsr;

namespace {

struct Outcome {
    bool passed = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        passed = passed && ok;
        if (!detail.empty()) detail += "; ";
        detail += (ok ? "" : "[x] ") + what;
    }
};

std::string num(double v, int prec = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    return buf;
}

bool run_criterion(const std::string& name, double budget_s, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o.passed = false;
        o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < budget_s;
    const bool ok = o.passed && in_time;
    std::cout << (ok ? "PASS " : "FAIL ") << name << " (" << o.detail << "; " << num(secs, 3) << " s of "
              << num(budget_s, 4) << " s" << (in_time ? "" : " [x] over budget") << ")" << std::endl;
    return ok;
}

template <typename T>
void round_trip(const Tensor<T>& x, double& worst_abs, double& worst_energy) {
    const auto y = haar_dwt2d(x);
    const auto z = haar_idwt2d(y);
    double ex = 0, ey = 0;
    for (std::size_t i = 0; i < x.numel(); ++i) {
        worst_abs = std::max(worst_abs, std::abs(double(z.data()[i]) - double(x.data()[i])));
        ex += double(x.data()[i]) * double(x.data()[i]);
        ey += double(y.data()[i]) * double(y.data()[i]);
    }
    worst_energy = std::max(worst_energy, std::abs(ey - ex) / ex);
}

// ---------------------------------------------------------------------------

Outcome wavelet_losslessness() {
    Outcome o;
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<std::size_t> dim(1, 48), ch(1, 8), batch(1, 3);
    double f_abs = 0, f_energy = 0, d_abs = 0, d_energy = 0;
    for (int i = 0; i < 100; ++i) {
        const Shape s{batch(rng), ch(rng), 2 * dim(rng), 2 * dim(rng)};
        round_trip(test::random_tensor<float>(s, 1000 + i), f_abs, f_energy);
        round_trip(test::random_tensor<double>(s, 5000 + i, -4.0, 4.0), d_abs, d_energy);
    }
    const PlanarImage photo = to_planar(load_png(test::data_path("astronaut_128.png")));
    Tensor<float> pf(Shape{1, 3, photo.height, photo.width});
    Tensor<double> pd(pf.shape());
    for (int c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < photo.size(); ++i) {
            pf.data()[c * photo.size() + i] = static_cast<float>(photo.planes[c][i]);
            pd.data()[c * photo.size() + i] = photo.planes[c][i];
        }
    double p_abs32 = 0, p_en32 = 0, p_abs64 = 0, p_en64 = 0;
    round_trip(pf, p_abs32, p_en32);
    round_trip(pd, p_abs64, p_en64);
    o.require(f_abs < 1e-6, "float32 max abs err " + num(f_abs) + " < 1e-6");
    o.require(d_abs < 1e-12, "float64 max abs err " + num(d_abs) + " < 1e-12");
    o.require(p_abs32 < 1e-6 && p_abs64 < 1e-12, "photo err " + num(p_abs32) + " / " + num(p_abs64));
    const double energy = std::max({f_energy, d_energy, p_en32, p_en64});
    o.require(energy < 1e-6, "energy rel err " + num(energy) + " < 1e-6");
    return o;
}

Outcome gradient_correctness() {
    Outcome o;
    double worst = 0;
    std::string worst_name;
    bool layers_ok = true;
    for (const auto& c : selfcheck::layer_grad_checks(11, 1e-5)) {
        layers_ok = layers_ok && c.passed;
        if (!c.passed) worst_name += " " + c.name;
    }
    // Weight-side checks for the parameterised layers.
    {
        const auto x = test::random_tensor<double>(Shape{2, 3, 6, 6}, 1);
        const auto b = test::random_tensor<double>(channel_vector(4), 2);
        const auto f = selfcheck::project([=](const Tensor<double>& w) { return conv2d(x, w, b, 1, 1); }, Shape{2, 4, 6, 6}, 3);
        worst = std::max(worst, grad_check(f, test::random_tensor<double>(Shape{4, 3, 3, 3}, 4)));
        const auto xt = test::random_tensor<double>(Shape{1, 3, 3, 3}, 5);
        const auto ft = selfcheck::project(
            [=](const Tensor<double>& w) { return conv_transpose2d(xt, w, Tensor<double>(channel_vector(2)), 2, 1); },
            Shape{1, 2, 6, 6}, 6);
        worst = std::max(worst, grad_check(ft, test::random_tensor<double>(Shape{3, 2, 4, 4}, 7)));
        const auto xb = test::random_tensor<double>(Shape{2, 3, 3, 3}, 8);
        const auto fb = selfcheck::project(
            [=](const Tensor<double>& g) {
                RunningStats<double> st(3);
                return batch_norm2d(xb, g, Tensor<double>(channel_vector(3)), st, true);
            },
            Shape{2, 3, 3, 3}, 9);
        worst = std::max(worst, grad_check(fb, test::random_tensor<double>(channel_vector(3), 10, 0.5, 1.5)));
    }
    o.require(layers_ok, "every layer type < 1e-5" + worst_name);
    o.require(worst < 1e-5, "conv, tconv and bn weight grads max rel err " + num(worst));
    const auto block = selfcheck::block_grad_check(11, 1e-5);
    o.require(block.passed, "WaveMix block " + block.detail);
    const auto net = selfcheck::network_grad_check(11, 1e-4);
    o.require(net.passed, "2-block network " + net.detail + " (< 1e-4)");
    return o;
}

Outcome shape_contracts() {
    Outcome o;
    const ModelConfig cfg;  // C = 144
    std::mt19937_64 rng(3);
    WaveMixBlock<float> block(cfg, rng);
    std::size_t checked = 0, bad = 0;
    for (std::size_t h = 8; h <= 64; h += 2)
        for (std::size_t w = 8; w <= 64; w += 2) {
            const auto x = test::random_tensor<float>(Shape{1, cfg.embedding_dim, h, w}, h * 131 + w);
            bad += block.forward_eval(x, cfg).shape() != x.shape();
            ++checked;
        }
    o.require(bad == 0, std::to_string(checked) + " even block sizes preserved");

    WaveMixBlock<float> zeroed = block;
    zeroed.tconv.weight = Tensor<float>(block.tconv.weight.shape());
    zeroed.tconv.bias = Tensor<float>(block.tconv.bias.shape());
    zeroed.bn_stats = RunningStats<float>::standard(cfg.embedding_dim);
    const auto x = test::random_tensor<float>(Shape{2, cfg.embedding_dim, 18, 12}, 4);
    const auto ye = zeroed.forward_eval(x, cfg), yt = zeroed.forward(x, cfg, true, rng);
    const bool ident = std::equal(ye.data().begin(), ye.data().end(), x.data().begin()) &&
                       std::equal(yt.data().begin(), yt.data().end(), x.data().begin());
    o.require(ident, "zeroed-branch block is exact identity");

    std::vector<std::string> inv2;
    bool scales_ok = true, inv_ok = true;
    for (std::size_t s : {2, 3, 4}) {
        ModelConfig c;
        c.scale = s;
        const WaveMixSR<float> net(c, 1);
        for (auto [w, h] : {std::pair<std::size_t, std::size_t>{16, 16}, {13, 10}}) {
            const auto out = net.predict(test::random_rgb(w, h, s));
            scales_ok = scales_ok && out.width == s * w && out.height == s * h;
        }
        std::vector<std::string> inv;
        for (const auto& p : net.state()) inv.push_back(p.name + p.tensor.shape().str());
        if (s == 2) inv2 = inv;
        else inv_ok = inv_ok && inv == inv2;
    }
    o.require(scales_ok, "HxW -> sHxsW for s in {2,3,4}");
    o.require(inv_ok, std::to_string(inv2.size()) + " learnable/buffer tensors identical across scales");
    return o;
}

Outcome accounting() {
    Outcome o;
    const WaveMixSR<float> net{ModelConfig{}};
    const std::size_t params = count_params(net);
    o.require(params >= 1'200'000 && params <= 2'200'000, "params " + std::to_string(params) + " in [1.2M, 2.2M]");
    ModelConfig c4;
    c4.scale = 4;
    const double madds = double(cost_report(c4, 64, 64).total_multiadds);
    o.require(madds >= 25.8e9 / 2 && madds <= 25.8e9 * 2, "multi-adds(4x, 64x64) " + num(madds / 1e9) + " G within 2x of 25.8 G");
    return o;
}

Outcome overfit() {
    Outcome o;
    const PlanarImage hr = to_planar(load_png(test::data_path("text_page_64.png")));
    ModelConfig mc;
    mc.embedding_dim = 64;
    mc.dropout = 0.0;
    TrainConfig tc;
    tc.max_steps = 1000;
    tc.phase2_start = 900;
    tc.sample_mode = SampleMode::full_image;
    tc.batch_size = 1;
    tc.seed = 0;
    PairSampler sampler({hr}, 2, SampleMode::full_image, 64, nullptr);
    WaveMixSR<float> net(mc, 0);
    const auto rep = train(net, tc, sampler);
    const double l0 = rep.steps.front().loss, lf = rep.steps.back().loss;
    std::size_t first_below = 0;
    while (first_below < rep.steps.size() && rep.steps[first_below].loss >= 0.1 * l0) ++first_below;
    o.require(lf < 0.1 * l0 && rep.steps.size() <= 2000,
              "Huber " + num(l0) + " -> " + num(lf) + " (" + num(100 * lf / l0, 3) + "% of step 0, below 10% from step " +
                  std::to_string(first_below) + ")");

    // 50-step window means, reported only.
    std::size_t increases = 0, windows = 0;
    double prev = 0;
    for (std::size_t s = 0; s + 50 <= rep.steps.size(); s += 50, ++windows) {
        double m = 0;
        for (std::size_t k = s; k < s + 50; ++k) m += rep.steps[k].loss;
        m /= 50;
        if (windows && m > prev) ++increases;
        prev = m;
    }
    std::cout << "  info: 50-step window mean loss rose in " << increases << " of " << windows - 1 << " transitions"
              << std::endl;

    const std::vector<NamedImage> img{{"text_page_64.png", hr}};
    const auto proto = MetricProtocol::for_scale(2);
    const auto model = evaluate_images(img, EvalMethod::model, 2, proto, &net);
    const auto bic = evaluate_images<float>(img, EvalMethod::bicubic, 2, proto);
    const double gain = model.mean_psnr - bic.mean_psnr;
    o.require(gain >= 1.0, "Y-PSNR " + num(model.mean_psnr, 6) + " vs bicubic " + num(bic.mean_psnr, 6) + " (+" +
                               num(gain, 3) + " dB, need >= 1.0)");
    return o;
}

Outcome metric_oracles() {
    Outcome o;
    PlanarImage a(ColorSpace::rgb, 32, 32, 0.5), b = a, c = a;
    for (auto& p : b.planes)
        for (auto& v : p) v += 16.0 / 255;
    for (auto& p : c.planes)
        for (auto& v : p) v -= 1.0 / 255;
    const double p16 = psnr(b, a), p1 = psnr(c, a);
    const double want16 = 20 * std::log10(255.0 / 16);
    o.require(std::abs(p16 - want16) < 1e-3, "uniform 16/255 error " + num(p16, 7) + " dB vs 20log10(255/16) = " + num(want16, 7));
    o.require(std::abs(p1 - 48.1308) < 1e-3, "MSE 1 on 0-255 scale " + num(p1, 7) + " dB vs 48.1308");
    o.require(std::isinf(psnr(a, a)), "identical PSNR is inf");

    // Single 11x11 window, weights and moments written out directly.
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0, 1);
    double worst = 0;
    for (int t = 0; t < 20; ++t) {
        std::vector<double> x(121), y(121);
        for (int k = 0; k < 121; ++k) {
            x[k] = u(rng);
            y[k] = t % 2 ? 0.6 * x[k] + 0.3 * u(rng) : u(rng);
        }
        double w[121], ws = 0;
        for (int i = 0; i < 11; ++i)
            for (int j = 0; j < 11; ++j) ws += w[i * 11 + j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / 4.5);
        double mx = 0, my = 0, vx = 0, vy = 0, cxy = 0;
        for (int k = 0; k < 121; ++k) mx += w[k] * x[k] / ws, my += w[k] * y[k] / ws;
        for (int k = 0; k < 121; ++k) {
            vx += w[k] * (x[k] - mx) * (x[k] - mx) / ws;
            vy += w[k] * (y[k] - my) * (y[k] - my) / ws;
            cxy += w[k] * (x[k] - mx) * (y[k] - my) / ws;
        }
        const double c1 = 1e-4, c2 = 9e-4;
        const double oracle = (2 * mx * my + c1) * (2 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
        worst = std::max(worst, std::abs(ssim_plane(x, y, 11, 11) - oracle));
    }
    o.require(worst < 1e-8, "SSIM vs single-window oracle max err " + num(worst));
    const auto photo = to_planar(load_png(test::data_path("astronaut_128.png")));
    o.require(ssim(photo, photo) == 1.0, "SSIM identical = 1");
    return o;
}

Outcome degradation_fidelity() {
    Outcome o;
    const auto w = cubic_weights(0.5);
    const bool exact = w[0] == -0.09375 && w[1] == 0.59375 && w[2] == 0.59375 && w[3] == -0.09375;
    o.require(exact, "bicubic phase-0.5 weights [" + num(w[0], 6) + ", " + num(w[1], 6) + ", " + num(w[2], 6) + ", " +
                         num(w[3], 6) + "]");
    double worst = 0;
    std::size_t paths = 0;
    for (double v : {0.0, 0.25, 0.7, 1.0}) {
        const PlanarImage img(ColorSpace::rgb, 30, 24, v);
        auto check = [&](const PlanarImage& out) {
            ++paths;
            for (const auto& p : out.planes)
                for (double x : p) worst = std::max(worst, std::abs(x - v));
        };
        for (auto kind : {Interpolation::bilinear, Interpolation::bicubic})
            for (ScaleFactor s : {ScaleFactor{2, 1}, ScaleFactor{3, 1}, ScaleFactor{4, 1}, ScaleFactor{1, 2},
                                  ScaleFactor{1, 3}, ScaleFactor{1, 4}})
                check(resample(img, s, kind));
        for (std::size_t s : {2, 3, 4}) {
            check(degrade(img, s));
            check(make_lr(img, s));  // 8-bit path: v*255 need not be an integer
            PairSampler ps({img}, s, SampleMode::random_patch, 24, nullptr);
            std::mt19937_64 rng(s);
            check(ps.sample(rng).lr);
        }
    }
    // make_lr quantises, so compare against the quantised constant for that path.
    o.require(worst <= 0.5 / 255 + 1e-12, std::to_string(paths) + " resampling paths, max deviation " + num(worst));
    double worst_real = 0;
    for (double v : {0.0, 0.25, 0.7, 1.0}) {
        const PlanarImage img(ColorSpace::rgb, 30, 24, v);
        for (auto kind : {Interpolation::bilinear, Interpolation::bicubic})
            for (std::size_t s : {2, 3, 4})
                for (const auto& p : resample(img, ScaleFactor{1, s}, kind).planes)
                    for (double x : p) worst_real = std::max(worst_real, std::abs(x - v));
    }
    o.require(worst_real < 1e-12, "real-valued paths exact to " + num(worst_real));
    return o;
}

Outcome determinism() {
    Outcome o;
    test::TempDir dir("accept_det");
    std::filesystem::create_directories(dir.file("hr"));
    std::filesystem::copy_file(test::data_path("astronaut_128.png"), dir.file("hr/astronaut_128.png"));
    const std::vector<std::string> common{"--set", "train.max_steps=20", "--set", "train.phase2_start=15", "--set",
                                          "train.batch_size=2", "--set", "train.patch_size=32", "--seed", "7",
                                          "--deterministic"};
    auto train_once = [&](const std::string& ckpt) {
        std::vector<std::string> args{"train", "--data", dir.file("hr"), "--out", dir.file(ckpt)};
        args.insert(args.end(), common.begin(), common.end());
        std::ostringstream out, err;
        const int code = cli::run(args, out, err);
        if (code != 0) throw std::runtime_error("train exited " + std::to_string(code) + ": " + err.str());
    };
    train_once("a.ckpt");
    train_once("b.ckpt");
    const bool ck_same = test::slurp(dir.file("a.ckpt")) == test::slurp(dir.file("b.ckpt"));
    const bool log_same = test::slurp(dir.file("a.ckpt.log.csv")) == test::slurp(dir.file("b.ckpt.log.csv"));
    o.require(ck_same, "two seeded train runs: checkpoints bit-identical (" +
                           std::to_string(test::slurp(dir.file("a.ckpt")).size()) + " bytes)");
    o.require(log_same, "training logs identical");

    auto eval_once = [&](const std::string& csv) {
        std::ostringstream out, err;
        const int code = cli::run({"eval", "--hr", test::data_path("eval"), "--checkpoint", dir.file("a.ckpt"), "--out",
                                   dir.file(csv)},
                                  out, err);
        if (code != 0) throw std::runtime_error("eval exited " + std::to_string(code) + ": " + err.str());
    };
    eval_once("e1.csv");
    eval_once("e2.csv");
    o.require(test::slurp(dir.file("e1.csv")) == test::slurp(dir.file("e2.csv")), "two eval runs: CSVs identical");
    set_deterministic(false);
    return o;
}

Outcome ablation() {
    Outcome o;
    test::TempDir dir("accept_abl");
    std::filesystem::create_directories(dir.file("hr"));
    std::filesystem::copy_file(test::data_path("patch_64.png"), dir.file("hr/patch_64.png"));
    std::ostringstream out, err;
    const int code = cli::run({"ablate", "--data", dir.file("hr"), "--out", dir.file("ablation.csv"), "--set",
                               "model.embedding_dim=16", "--set", "model.num_blocks=2", "--set", "train.max_steps=40",
                               "--set", "train.phase2_start=30", "--set", "train.batch_size=2", "--set",
                               "train.patch_size=32", "--seed", "1"},
                              out, err);
    o.require(code == 0, "ablate exit code " + std::to_string(code));
    std::istringstream csv(test::slurp(dir.file("ablation.csv")));
    std::string line;
    std::vector<std::string> names;
    std::getline(csv, line);
    while (std::getline(csv, line)) names.push_back(line.substr(0, line.find(',')));
    const std::vector<std::string> want{"L1", "L2", "SSIM", "Charbonnier", "Huber"};
    o.require(names == want, std::to_string(names.size()) + " rows in order L1, L2, SSIM, Charbonnier, Huber");
    const std::string text = out.str();
    const auto table = text.find("\nLoss");
    if (table != std::string::npos) {
        std::cout << "  info: ablation table" << '\n';
        std::istringstream t(text.substr(table + 1));
        while (std::getline(t, line)) std::cout << "    " << line << '\n';
    }
    return o;
}

}  // namespace

int main() {
    bool ok = true;
    ok &= run_criterion("wavelet losslessness", 10, wavelet_losslessness);
    ok &= run_criterion("gradient correctness", 120, gradient_correctness);
    ok &= run_criterion("shape and residual contracts", 60, shape_contracts);
    ok &= run_criterion("parameter and multi-add accounting", 1, accounting);
    ok &= run_criterion("overfit convergence", 900, overfit);
    ok &= run_criterion("metric oracles", 10, metric_oracles);
    ok &= run_criterion("degradation fidelity", 5, degradation_fidelity);
    ok &= run_criterion("determinism", 1200, determinism);
    ok &= run_criterion("ablation harness", 3600, ablation);
    std::cout << (ok ? "acceptance: all criteria passed" : "acceptance: FAILED") << std::endl;
    return ok ? 0 : 1;
}
