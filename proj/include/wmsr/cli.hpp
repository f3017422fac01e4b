#pragma once

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "wmsr/checkpoint.hpp"
#include "wmsr/config.hpp"
#include "wmsr/data.hpp"
#include "wmsr/evaluate.hpp"
#include "wmsr/parallel.hpp"
#include "wmsr/png_io.hpp"
#include "wmsr/selfcheck.hpp"
#include "wmsr/train.hpp"

namespace wmsr::cli {

/// Exit codes by error category.
enum ExitCode : int {
    kOk = 0,
    kCheckFailed = 1,
    kUsage = 2,
    kConfig = 3,
    kContract = 4,
    kImage = 5,
    kCheckpoint = 6,
    kTraining = 7,
    kInternal = 70,
};

struct CommonOptions {
    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    bool deterministic = false;
};

namespace detail {

inline void add_common(CLI::App* app, CommonOptions& o) {
    app->add_option("--config", o.config_path, "key=value config file")->check(CLI::ExistingFile);
    app->add_option("--set", o.overrides, "override one key (repeatable), e.g. --set model.scale=4");
    app->add_option("--seed", o.seed, "seed for all randomness (overrides the 'seed' key)");
    app->add_flag("--deterministic", o.deterministic, "serial kernels; zeroed timings in logs");
}

/// Defaults, then the config file, then --set overrides, then --seed / --deterministic.
inline RunConfig resolve(const CommonOptions& o) {
    RunConfig rc;
    if (!o.config_path.empty()) apply_entries(rc, kv::parse_file(o.config_path));
    for (const auto& s : o.overrides) {
        const auto [k, v] = kv::split_assignment(s, "--set");
        set_key(rc, k, v);
    }
    if (o.seed) rc.seed = *o.seed;
    if (o.deterministic) rc.deterministic = true;
    finalize(rc);
    set_deterministic(rc.deterministic);
    return rc;
}

inline void print_config(std::ostream& out, const RunConfig& rc, const std::string& command) {
    out << "# wmsr " << command << ": resolved config\n" << format_config(rc) << "# end config\n";
}

inline void print_checkpoint_config(std::ostream& out, const ModelConfig& m, const std::string& path) {
    out << "# checkpoint " << path << "\n" << kv::format(model_config_entries(m));
}

inline std::vector<PlanarImage> images_of(DirListing&& l, std::ostream& err) {
    for (const auto& s : l.unreadable) err << "warning: skipped " << s << '\n';
    std::vector<PlanarImage> v;
    for (auto& n : l.images) v.push_back(std::move(n.image));
    return v;
}

/// Full-image validation pairs from a directory of HR images.
inline std::vector<TrainingPair> full_pairs(const std::vector<PlanarImage>& images, std::size_t scale) {
    std::vector<TrainingPair> pairs;
    for (const auto& img : images) {
        PlanarImage hr = modcrop(img, scale);
        if (hr.width / scale < 8 || hr.height / scale < 8) continue;
        pairs.push_back({degrade(hr, scale), std::move(hr)});
    }
    return pairs;
}

inline std::string human(double v, const char* unit) {
    char buf[64];
    if (v >= 1e9) std::snprintf(buf, sizeof buf, "%.2f G%s", v / 1e9, unit);
    else if (v >= 1e6) std::snprintf(buf, sizeof buf, "%.2f M%s", v / 1e6, unit);
    else if (v >= 1e3) std::snprintf(buf, sizeof buf, "%.2f K%s", v / 1e3, unit);
    else std::snprintf(buf, sizeof buf, "%.0f %s", v, unit);
    return buf;
}

inline void write_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw ImageError("cannot write '" + path + "'");
    f << text;
}

// ---------------------------------------------------------------------------
// Subcommands

struct TrainArgs {
    std::string data, val, out, log;
};

inline int cmd_train(const CommonOptions& co, const TrainArgs& a, std::ostream& out, std::ostream& err) {
    RunConfig rc = resolve(co);
    if (!a.data.empty()) rc.hr_dir = a.data;
    if (!a.val.empty()) rc.val_dir = a.val;
    print_config(out, rc, "train");
    if (rc.hr_dir.empty()) throw ConfigError("train needs --data DIR or data.hr_dir");
    const std::string& ckpt = a.out;
    if (ckpt.empty()) throw ConfigError("train needs --out CHECKPOINT");
    const std::string log_path = a.log.empty() ? ckpt + ".log.csv" : a.log;

    PairSampler sampler(images_of(load_png_dir(rc.hr_dir), err), rc.model.scale, rc.train.sample_mode,
                        rc.train.patch_size, &err);
    std::vector<TrainingPair> val;
    if (!rc.val_dir.empty()) val = full_pairs(images_of(load_png_dir(rc.val_dir), err), rc.model.scale);

    WaveMixSR<float> net(rc.model, rc.seed);
    std::ofstream log(log_path, std::ios::trunc);
    if (!log) throw ImageError("cannot write training log '" + log_path + "'");
    TrainIO io{&log, &out, 100, rc.deterministic};
    const TrainReport rep = train(net, rc.train, sampler, val, io);
    save_checkpoint(net, ckpt, rep.counters);
    out << "trained " << rep.steps.size() << " steps";
    if (!rep.steps.empty())
        out << ": loss " << rep.steps.front().loss << " -> " << rep.steps.back().loss;
    out << "\ncheckpoint: " << ckpt << "\nlog: " << log_path << '\n';
    return kOk;
}

struct SrArgs {
    std::string checkpoint, input, out;
    std::size_t scale = 0;
};

inline int cmd_sr(const CommonOptions& co, const SrArgs& a, std::ostream& out, std::ostream& err) {
    RunConfig rc = resolve(co);
    print_config(out, rc, "sr");
    const std::string& dst = a.out;
    if (dst.empty()) throw ConfigError("sr needs --out PATH");
    auto loaded = load_checkpoint<float>(a.checkpoint);
    print_checkpoint_config(out, loaded.net.config(), a.checkpoint);
    const std::size_t scale = a.scale ? a.scale : loaded.net.config().scale;
    namespace fs = std::filesystem;
    if (fs::is_directory(a.input)) {
        fs::create_directories(dst);
        DirListing l = load_png_dir(a.input);
        for (const auto& s : l.unreadable) err << "warning: skipped " << s << '\n';
        for (const auto& img : l.images) {
            const PlanarImage sr = loaded.net.upscale(img.image, scale);
            const std::string path = (fs::path(dst) / img.name).string();
            save_png(from_planar(sr), path);
            out << img.name << ": " << img.image.width << "x" << img.image.height << " -> " << sr.width << "x"
                << sr.height << '\n';
        }
    } else {
        const PlanarImage lr = to_planar(load_png(a.input));
        const PlanarImage sr = loaded.net.upscale(lr, scale);
        save_png(from_planar(sr), dst);
        out << a.input << ": " << lr.width << "x" << lr.height << " -> " << sr.width << "x" << sr.height << '\n';
    }
    return kOk;
}

struct EvalArgs {
    std::string hr, method, checkpoint, out;
    std::size_t scale = 0;
};

inline int cmd_eval(const CommonOptions& co, const EvalArgs& a, std::ostream& out, std::ostream&) {
    RunConfig rc = resolve(co);
    const std::string hr = a.hr.empty() ? rc.hr_dir : a.hr;
    print_config(out, rc, "eval");
    if (hr.empty()) throw ConfigError("eval needs --hr DIR");
    const EvalMethod method = parse_eval_method(a.method.empty() ? (a.checkpoint.empty() ? "bicubic" : "model") : a.method);
    std::optional<LoadedCheckpoint<float>> loaded;
    std::size_t scale = a.scale ? a.scale : rc.model.scale;
    if (method == EvalMethod::model) {
        if (a.checkpoint.empty()) throw ConfigError("eval --method model needs --checkpoint");
        loaded.emplace(load_checkpoint<float>(a.checkpoint));
        print_checkpoint_config(out, loaded->net.config(), a.checkpoint);
        if (!a.scale) scale = loaded->net.config().scale;
    }
    const EvalReport r = evaluate_dir<float>(hr, method, scale, rc.protocol(scale), loaded ? &loaded->net : nullptr);
    const std::string csv = format_csv(r);
    out << "# method=" << to_string(method) << '\n' << csv;
    const std::string& dst = a.out;
    if (!dst.empty()) write_file(dst, csv);
    return kOk;
}

struct MakeLrArgs {
    std::string hr, out;
    std::size_t scale = 0;
};

inline int cmd_make_lr(const CommonOptions& co, const MakeLrArgs& a, std::ostream& out, std::ostream& err) {
    RunConfig rc = resolve(co);
    print_config(out, rc, "make-lr");
    const std::string hr = a.hr.empty() ? rc.hr_dir : a.hr;
    const std::string& dst = a.out;
    if (hr.empty() || dst.empty()) throw ConfigError("make-lr needs --hr DIR and --out DIR");
    const std::size_t scale = a.scale ? a.scale : rc.model.scale;
    std::filesystem::create_directories(dst);
    DirListing l = load_png_dir(hr);
    for (const auto& s : l.unreadable) err << "warning: skipped " << s << '\n';
    for (const auto& img : l.images) {
        const PlanarImage lr = make_lr(img.image, scale);
        save_png(from_planar(lr), (std::filesystem::path(dst) / img.name).string());
        out << img.name << ": " << img.image.width << "x" << img.image.height << " -> " << lr.width << "x"
            << lr.height << '\n';
    }
    out << "wrote " << l.images.size() << " LR images (bicubic 1/" << scale << ") to " << dst << '\n';
    return kOk;
}

inline int cmd_params(const CommonOptions& co, std::size_t lr_size, std::ostream& out) {
    RunConfig rc = resolve(co);
    print_config(out, rc, "params");
    const CostReport r = cost_report(rc.model, lr_size, lr_size);
    const WaveMixSR<float> net(rc.model, rc.seed);
    if (count_params(net) != r.total_params) throw std::logic_error("parameter accounting disagrees with the network");
    out << std::left << std::setw(28) << "layer" << std::right << std::setw(12) << "params" << std::setw(16)
        << "multi-adds" << '\n';
    for (const auto& l : r.layers)
        out << std::left << std::setw(28) << l.name << std::right << std::setw(12) << l.params << std::setw(16)
            << l.multiadds << '\n';
    out << std::left << std::setw(28) << "total" << std::right << std::setw(12) << r.total_params << std::setw(16)
        << r.total_multiadds << "\n\n";
    std::ostringstream hdr;
    hdr << "Multi-Adds (" << rc.model.scale << "x, " << lr_size << "x" << lr_size << " input)";
    out << std::left << std::setw(12) << "Model" << std::setw(12) << "Params" << hdr.str() << '\n';
    out << std::left << std::setw(12) << "WaveMixSR" << std::setw(12) << human(double(r.total_params), "")
        << human(double(r.total_multiadds), "") << '\n';
    return kOk;
}

inline int cmd_selfcheck(const CommonOptions& co, std::ostream& out) {
    RunConfig rc = resolve(co);
    print_config(out, rc, "selfcheck");
    bool ok = true;
    for (const auto& c : selfcheck::run_all(rc.seed + 1)) {
        out << (c.passed ? "PASS " : "FAIL ") << c.name << " (" << c.detail << ")\n";
        ok = ok && c.passed;
    }
    out << (ok ? "selfcheck: all checks passed\n" : "selfcheck: FAILED\n");
    return ok ? kOk : kCheckFailed;
}

struct AblateArgs {
    std::string data, eval, out;
};

inline int cmd_ablate(const CommonOptions& co, const AblateArgs& a, std::ostream& out, std::ostream& err) {
    RunConfig rc = resolve(co);
    if (!a.data.empty()) rc.hr_dir = a.data;
    print_config(out, rc, "ablate");
    if (rc.hr_dir.empty()) throw ConfigError("ablate needs --data DIR or data.hr_dir");
    PairSampler sampler(images_of(load_png_dir(rc.hr_dir), err), rc.model.scale, rc.train.sample_mode,
                        rc.train.patch_size, &err);
    const std::string eval_dir = a.eval.empty() ? rc.hr_dir : a.eval;
    const auto eval_pairs = full_pairs(images_of(load_png_dir(eval_dir), err), rc.model.scale);
    if (eval_pairs.empty()) throw ConfigError("ablate: no usable evaluation images in '" + eval_dir + "'");
    const ModelConfig mc = rc.model;
    const std::uint64_t seed = rc.seed;
    TrainIO io{nullptr, &out, std::max<std::size_t>(1, rc.train.max_steps / 4), rc.deterministic};
    const auto rows = ablate_losses<float>([&] { return WaveMixSR<float>(mc, seed); }, rc.train, sampler, eval_pairs, io);
    const auto bic = score_bicubic(eval_pairs, rc.model.scale);
    out << '\n' << format_ablation(rows);
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-14s%10.2f%10.4f\n", "(bicubic)", bic.psnr_db, bic.ssim);
    out << buf;
    const auto best =
        std::max_element(rows.begin(), rows.end(), [](const auto& x, const auto& y) { return x.psnr_db < y.psnr_db; });
    out << "best PSNR: " << display_name(best->kind) << (best->kind == LossKind::huber ? "" : " (Huber is not best here)")
        << " [informational]\n";
    const std::string& dst = a.out;
    if (!dst.empty()) {
        std::ostringstream csv;
        csv << "loss,psnr_db,ssim,final_loss\n" << std::setprecision(9);
        for (const auto& r : rows) csv << display_name(r.kind) << ',' << r.psnr_db << ',' << r.ssim << ',' << r.final_loss << '\n';
        write_file(dst, csv.str());
    }
    return kOk;
}

}  // namespace detail

/// Parses argv-style arguments (without the program name) and runs one subcommand.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"WaveMixSR super-resolution toolkit", "wmsr"};
    app.require_subcommand(1);
    CommonOptions co;

    auto* train = app.add_subcommand("train", "train a network on HR images; writes a checkpoint and a CSV log");
    detail::TrainArgs ta;
    detail::add_common(train, co);
    train->add_option("--data", ta.data, "directory of HR training PNGs")->check(CLI::ExistingDirectory);
    train->add_option("--val", ta.val, "directory of HR validation PNGs")->check(CLI::ExistingDirectory);
    train->add_option("--out", ta.out, "checkpoint path")->required();
    train->add_option("--log", ta.log, "CSV log path (default: <out>.log.csv)");

    auto* sr = app.add_subcommand("sr", "upscale a PNG (or a directory of PNGs) with a checkpoint");
    detail::SrArgs sa;
    detail::add_common(sr, co);
    sr->add_option("--checkpoint", sa.checkpoint, "trained checkpoint")->required()->check(CLI::ExistingFile);
    sr->add_option("--input", sa.input, "LR PNG file or directory")->required()->check(CLI::ExistingPath);
    sr->add_option("--out", sa.out, "output PNG file or directory")->required();
    sr->add_option("--scale", sa.scale, "must match the checkpoint's scale");

    auto* ev = app.add_subcommand("eval", "PSNR/SSIM report for a directory of HR images");
    detail::EvalArgs ea;
    detail::add_common(ev, co);
    ev->add_option("--hr", ea.hr, "directory of HR PNGs")->check(CLI::ExistingDirectory);
    ev->add_option("--method", ea.method, "identity, bicubic or model (default: model with --checkpoint, else bicubic)");
    ev->add_option("--checkpoint", ea.checkpoint, "checkpoint for --method model")->check(CLI::ExistingFile);
    ev->add_option("--scale", ea.scale, "scale factor (default: checkpoint or model.scale)");
    ev->add_option("--out", ea.out, "also write the CSV report here");

    auto* mk = app.add_subcommand("make-lr", "write bicubic-downsampled LR copies of HR PNGs");
    detail::MakeLrArgs ma;
    detail::add_common(mk, co);
    mk->add_option("--hr", ma.hr, "directory of HR PNGs")->check(CLI::ExistingDirectory);
    mk->add_option("--out", ma.out, "output directory")->required();
    mk->add_option("--scale", ma.scale, "downscale factor (default: model.scale)");

    auto* pa = app.add_subcommand("params", "parameter and multiply-add table for the configured model");
    std::size_t lr_size = 64;
    detail::add_common(pa, co);
    pa->add_option("--lr-size", lr_size, "side of the square LR input for multiply-add counting")
        ->check(CLI::PositiveNumber);

    auto* sc = app.add_subcommand("selfcheck", "run the invariant suite (DWT, colour, adjoint, gradient checks)");
    detail::add_common(sc, co);

    auto* ab = app.add_subcommand("ablate", "train one fresh network per loss and compare PSNR/SSIM");
    detail::AblateArgs aa;
    detail::add_common(ab, co);
    ab->add_option("--data", aa.data, "directory of HR training PNGs")->check(CLI::ExistingDirectory);
    ab->add_option("--eval", aa.eval, "directory of HR evaluation PNGs (default: the training set)")
        ->check(CLI::ExistingDirectory);
    ab->add_option("--out", aa.out, "also write the table as CSV");

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    auto fail = [&](const char* category, const std::exception& e, int code) {
        err << "error [" << category << "]: " << e.what() << '\n';
        return code;
    };
    try {
        if (*train) return detail::cmd_train(co, ta, out, err);
        if (*sr) return detail::cmd_sr(co, sa, out, err);
        if (*ev) return detail::cmd_eval(co, ea, out, err);
        if (*mk) return detail::cmd_make_lr(co, ma, out, err);
        if (*pa) return detail::cmd_params(co, lr_size, out);
        if (*sc) return detail::cmd_selfcheck(co, out);
        if (*ab) return detail::cmd_ablate(co, aa, out, err);
    } catch (const kv::ParseError& e) {
        return fail("config", e, kConfig);
    } catch (const CheckpointError& e) {
        return fail("checkpoint", e, kCheckpoint);
    } catch (const ImageError& e) {
        return fail("image", e, kImage);
    } catch (const TrainingError& e) {
        return fail("training", e, kTraining);
    } catch (const ContractError& e) {
        return fail("contract", e, kContract);
    } catch (const MetricError& e) {
        return fail("metric", e, kContract);
    } catch (const std::filesystem::filesystem_error& e) {
        return fail("io", e, kImage);
    } catch (const std::exception& e) {
        return fail("internal", e, kInternal);
    }
    return kUsage;
}

}  // namespace wmsr::cli
