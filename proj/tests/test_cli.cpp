#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "support.hpp"
#include "wmsr/cli.hpp"

using namespace wmsr;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    set_deterministic(false);
    return {code, out.str(), err.str()};
}

const std::vector<std::string> kTinyModel = {"--set", "model.embedding_dim=8", "--set", "model.num_blocks=1"};

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& extra) {
    a.insert(a.end(), extra.begin(), extra.end());
    return a;
}

}  // namespace

TEST(Cli, ParamsReportsDefaultBudget) {
    const auto r = run({"params"});
    ASSERT_EQ(r.code, cli::kOk) << r.err;
    EXPECT_NE(r.out.find("1851841"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("1.85 M"), std::string::npos);
    EXPECT_NE(r.out.find("model.embedding_dim=144"), std::string::npos);
}

TEST(Cli, ParamsHonoursOverrides) {
    const auto r = run({"params", "--set", "model.num_blocks=0"});
    ASSERT_EQ(r.code, cli::kOk) << r.err;
    EXPECT_NE(r.out.find("2737"), std::string::npos);
}

TEST(Cli, SelfcheckPasses) {
    const auto r = run({"selfcheck"});
    EXPECT_EQ(r.code, cli::kOk) << r.out;
    EXPECT_EQ(r.out.find("FAIL"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("all checks passed"), std::string::npos);
}

TEST(Cli, UnknownKeyIsConfigError) {
    const auto r = run({"params", "--set", "model.depth=3"});
    EXPECT_EQ(r.code, cli::kConfig);
    EXPECT_NE(r.err.find("unknown config key 'model.depth'"), std::string::npos) << r.err;
    EXPECT_NE(r.err.find("model.embedding_dim"), std::string::npos);
}

TEST(Cli, BadValuesAndUsage) {
    EXPECT_EQ(run({"params", "--set", "model.scale=abc"}).code, cli::kConfig);
    EXPECT_EQ(run({"params", "--set", "model.embedding_dim=10"}).code, cli::kContract);
    EXPECT_EQ(run({"frobnicate"}).code, cli::kUsage);
    EXPECT_EQ(run({"sr"}).code, cli::kUsage);
    EXPECT_EQ(run({"--help"}).code, cli::kOk);
}

TEST(Cli, ConfigFileThenOverrides) {
    test::TempDir dir("cfg");
    std::ofstream(dir.file("a.cfg")) << "# comment\nmodel.num_blocks = 0\nmodel.embedding_dim=8\n";
    const auto r = run({"params", "--config", dir.file("a.cfg"), "--set", "model.embedding_dim=16"});
    ASSERT_EQ(r.code, cli::kOk) << r.err;
    EXPECT_NE(r.out.find("model.embedding_dim=16"), std::string::npos);
    EXPECT_NE(r.out.find("model.num_blocks=0"), std::string::npos);
    // 9*16+16 + 9*16+1
    EXPECT_NE(r.out.find(" 305 "), std::string::npos) << r.out;
}

TEST(Cli, MakeLrWritesQuantisedBicubic) {
    test::TempDir dir("mklr");
    const auto r = run({"make-lr", "--hr", test::data_path("eval"), "--out", dir.str(), "--scale", "3"});
    ASSERT_EQ(r.code, cli::kOk) << r.err;
    const auto lr = load_png(dir.file("chelsea_120x90.png"));
    EXPECT_EQ(lr.width, 40u);
    EXPECT_EQ(lr.height, 30u);
    const auto hr = to_planar(load_png(test::data_path("eval/chelsea_120x90.png")));
    EXPECT_EQ(lr, from_planar(resample(hr, ScaleFactor{1, 3}, Interpolation::bicubic)));
    const auto odd = load_png(dir.file("astronaut_80.png"));
    EXPECT_EQ(odd.width, 26u);  // modcrop 80 -> 78
}

TEST(Cli, TrainSrEvalRoundTrip) {
    test::TempDir dir("pipe");
    fs::create_directories(dir.file("hr"));
    fs::copy_file(test::data_path("patch_64.png"), dir.file("hr/patch.png"));
    const std::string ckpt = dir.file("net.ckpt");

    auto r = run(with(kTinyModel, {"--set", "train.max_steps=3", "--set", "train.phase2_start=2", "--set",
                                   "train.batch_size=1", "--set", "train.patch_size=32", "--deterministic", "--seed",
                                   "4"}));
    ASSERT_EQ(r.code, cli::kUsage);  // no subcommand

    std::vector<std::string> train_args{"train", "--data", dir.file("hr"), "--out", ckpt};
    r = run(with(train_args, with(kTinyModel, {"--set", "train.max_steps=3", "--set", "train.phase2_start=2", "--set",
                                               "train.batch_size=1", "--set", "train.patch_size=32",
                                               "--deterministic", "--seed", "4"})));
    ASSERT_EQ(r.code, cli::kOk) << r.err;
    ASSERT_TRUE(fs::exists(ckpt));
    const std::string log = test::slurp(ckpt + ".log.csv");
    EXPECT_EQ(log.substr(0, log.find('\n')), "step,phase,loss,lr,grad_norm,elapsed_ms");
    EXPECT_NE(r.out.find("trained 3 steps"), std::string::npos);

    r = run({"sr", "--checkpoint", ckpt, "--input", test::data_path("patch_64.png"), "--out", dir.file("sr.png")});
    ASSERT_EQ(r.code, cli::kOk) << r.err;
    const auto sr = load_png(dir.file("sr.png"));
    EXPECT_EQ(sr.width, 128u);
    EXPECT_EQ(sr.height, 128u);

    r = run({"sr", "--checkpoint", ckpt, "--input", test::data_path("patch_64.png"), "--out", dir.file("x.png"),
             "--scale", "3"});
    EXPECT_EQ(r.code, cli::kContract);

    const auto e1 = run({"eval", "--hr", test::data_path("eval"), "--checkpoint", ckpt, "--out", dir.file("e1.csv")});
    const auto e2 = run({"eval", "--hr", test::data_path("eval"), "--checkpoint", ckpt, "--out", dir.file("e2.csv")});
    ASSERT_EQ(e1.code, cli::kOk) << e1.err;
    EXPECT_EQ(test::slurp(dir.file("e1.csv")), test::slurp(dir.file("e2.csv")));
    EXPECT_NE(e1.out.find("# method=model"), std::string::npos);
}

TEST(Cli, CheckpointErrorsHaveTheirOwnCode) {
    test::TempDir dir("badck");
    std::ofstream(dir.file("bad.ckpt")) << "nope";
    const auto r = run({"sr", "--checkpoint", dir.file("bad.ckpt"), "--input", test::data_path("patch_64.png"), "--out",
                        dir.file("o.png")});
    EXPECT_EQ(r.code, cli::kCheckpoint);
    EXPECT_NE(r.err.find("error [checkpoint]"), std::string::npos);
}

TEST(Cli, EvalBicubicIsDefaultWithoutCheckpoint) {
    const auto r = run({"eval", "--hr", test::data_path("eval"), "--scale", "2"});
    ASSERT_EQ(r.code, cli::kOk) << r.err;
    EXPECT_NE(r.out.find("# method=bicubic"), std::string::npos);
    EXPECT_NE(r.out.find("# shave=2 y_only=1 images=3 skipped=0"), std::string::npos) << r.out;
}

TEST(Cli, AblateEmitsFiveRows) {
    test::TempDir dir("abl");
    fs::create_directories(dir.file("hr"));
    fs::copy_file(test::data_path("patch_64.png"), dir.file("hr/patch.png"));
    const auto r = run(with({"ablate", "--data", dir.file("hr"), "--out", dir.file("abl.csv")},
                            with(kTinyModel, {"--set", "train.max_steps=2", "--set", "train.phase2_start=2", "--set",
                                              "train.batch_size=1", "--set", "train.patch_size=32"})));
    ASSERT_EQ(r.code, cli::kOk) << r.err;
    const std::string csv = test::slurp(dir.file("abl.csv"));
    std::istringstream in(csv);
    std::string line;
    std::vector<std::string> rows;
    while (std::getline(in, line)) rows.push_back(line.substr(0, line.find(',')));
    EXPECT_EQ(rows, (std::vector<std::string>{"loss", "L1", "L2", "SSIM", "Charbonnier", "Huber"}));
    EXPECT_NE(r.out.find("(bicubic)"), std::string::npos);
}
