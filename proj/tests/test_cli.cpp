// Copyright (c) 2026 The csdn authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>

#include "csdn/geometry.hpp"
#include "csdn/io.hpp"
#include "csdn/text.hpp"

#ifndef CSDN_BIN
#error "CSDN_BIN must name the csdn executable"
#endif

namespace fs = std::filesystem;
using namespace csdn;

namespace {

fs::path scratch() {
  static const fs::path dir = [] {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    const auto d = fs::path(::testing::TempDir()) / ("csdn_cli_" + std::string(info ? info->name() : "all"));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

// Exit status of `csdn <args>`; output goes to `log` under scratch().
int run(const std::string& args, const std::string& log = "last.log") {
  const std::string cmd = std::string(CSDN_BIN) + " " + args + " > " + (scratch() / log).string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string log_text(const std::string& log = "last.log") { return read_file(scratch() / log); }

// Shared micro dataset.
fs::path micro_data() {
  static const fs::path d = [] {
    const auto p = scratch() / "data";
    EXPECT_EQ(run("gen-data --out " + p.string() + " --categories table,lamp --per-category 1 "
                  "--test-per-category 1 --seed 7 --preset micro --views 2"),
              0)
        << log_text();
    return p;
  }();
  return d;
}

std::string train_args(const fs::path& out, const std::string& extra = "") {
  return "train --data " + micro_data().string() + " --out " + out.string() +
         " --preset micro --epochs 3 --deterministic --quiet --seed 3 " + extra;
}

// metrics.csv without the repro header line.
std::string metrics_body(const fs::path& run_dir) {
  const std::string text = read_file(run_dir / "metrics.csv");
  return text.substr(text.find('\n') + 1);
}

}  // namespace

TEST(Cli, GenDataCountsAndReproducibility) {
  const auto a = scratch() / "gen_a", b = scratch() / "gen_b";
  const std::string args = " --categories table,lamp --per-category 2 --seed 7 --preset micro";
  ASSERT_EQ(run("gen-data --out " + a.string() + args), 0) << log_text();
  ASSERT_EQ(run("gen-data --out " + b.string() + args), 0) << log_text();
  std::size_t files = 0, views = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), a);
    EXPECT_EQ(read_file(e.path()), read_file(b / rel)) << rel;
    views += e.path().extension() == ".img";
    ++files;
  }
  EXPECT_EQ(views, 4u * 24u);
  EXPECT_EQ(files, 1 + 4 * (1 + 3 * 24));
  // A second run into a non-empty directory needs --force.
  EXPECT_EQ(run("gen-data --out " + a.string() + args), 1);
  EXPECT_EQ(run("gen-data --out " + a.string() + args + " --force"), 0);
}

TEST(Cli, ValidationErrorsExitWithOne) {
  EXPECT_EQ(run("gen-data --out " + (scratch() / "zero").string() + " --per-category 0"), 1);
  EXPECT_NE(log_text().find("per_category"), std::string::npos) << log_text();
  EXPECT_EQ(run("gen-data --out " + (scratch() / "bad").string() + " --categories table,sofa"), 1);
  EXPECT_NE(log_text().find("sofa"), std::string::npos);
  EXPECT_EQ(run("train --data " + (scratch() / "nowhere").string() + " --out x"), 1);
  EXPECT_EQ(run("frobnicate"), 1);
  EXPECT_EQ(run("--help"), 0);
}

TEST(Cli, DefaultConfigEchoesPaperValues) {
  // The full preset echoes the published values before rejecting the micro data.
  EXPECT_EQ(run("train --data " + micro_data().string() + " --out " + (scratch() / "full").string()), 1);
  EXPECT_NE(log_text().find("lr=5e-5 epochs=50 k=16 C=1024"), std::string::npos) << log_text();
  EXPECT_NE(log_text().find("input_points: config 2048, dataset 16"), std::string::npos) << log_text();
  const auto out = scratch() / "echo";
  ASSERT_EQ(run(train_args(out, "--max-iters 1")), 0) << log_text();
  const auto kv = KeyValueText::parse(read_file(out / "config.txt"), "config.txt");
  EXPECT_EQ(kv.get("train.seed"), "3");
  EXPECT_EQ(kv.get("train.alpha_start"), "0.01");
}

TEST(Cli, DeterministicTrainingIsRepeatable) {
  const auto a = scratch() / "det_a", b = scratch() / "det_b";
  ASSERT_EQ(run(train_args(a)), 0) << log_text();
  ASSERT_EQ(run(train_args(b)), 0) << log_text();
  EXPECT_EQ(read_file(a / "metrics.csv"), read_file(b / "metrics.csv"));
  EXPECT_EQ(read_file(a / "final.ckpt"), read_file(b / "final.ckpt"));
  const std::string header = read_file(a / "metrics.csv").substr(0, read_file(a / "metrics.csv").find('\n'));
  EXPECT_NE(header.find("config="), std::string::npos);
  EXPECT_NE(header.find("seed=3"), std::string::npos);
}

TEST(Cli, CoarseOnlyVariantHasEqualClouds) {
  const auto out = scratch() / "coarse";
  ASSERT_EQ(run(train_args(out, "--variant coarse-only")), 0) << log_text();
  std::size_t rows = 0;
  for (const auto& line : split(metrics_body(out), '\n')) {
    const auto f = split(line, ',');
    if (f.size() < 6 || f[0] == "epoch") continue;
    EXPECT_EQ(f[4], f[5]) << line;
    ++rows;
  }
  EXPECT_EQ(rows, 3u);
}

TEST(Cli, EvalOracleAndTrainedCheckpoint) {
  const auto out = scratch() / "eval_oracle";
  ASSERT_EQ(run("eval --data " + micro_data().string() + " --oracle --per-view-std --out " + out.string()), 0)
      << log_text();
  const std::string summary = read_file(out / "summary.csv");
  EXPECT_NE(summary.find("\naverage,4,0,1,0\n"), std::string::npos) << summary;
  EXPECT_TRUE(fs::exists(out / "view_std.csv"));
  EXPECT_EQ(run("eval --data " + micro_data().string()), 1);  // neither --checkpoint nor --oracle

  const auto run_dir = scratch() / "eval_run";
  ASSERT_EQ(run(train_args(run_dir)), 0) << log_text();
  ASSERT_EQ(run("eval --data " + micro_data().string() + " --split test --checkpoint " +
                (run_dir / "final.ckpt").string() + " --out " + (scratch() / "eval_ck").string()),
            0)
      << log_text();
  EXPECT_TRUE(fs::exists(scratch() / "eval_ck" / "samples.csv"));
}

TEST(Cli, CompleteWritesBoundedCoarseAndRefined) {
  const auto run_dir = scratch() / "complete_run";
  ASSERT_EQ(run(train_args(run_dir)), 0) << log_text();
  const auto obj = micro_data() / "train" / "table" / "table_0000";
  const std::string inputs = " --checkpoint " + (run_dir / "final.ckpt").string() + " --partial " +
                             (obj / "partial_1.xyz").string() + " --image " + (obj / "view_1.img").string() +
                             " --camera " + (obj / "cam_1.txt").string();
  const auto out1 = scratch() / "out1.xyz", out2 = scratch() / "out2.xyz", coarse = scratch() / "coarse.xyz";
  ASSERT_EQ(run("complete" + inputs + " --out " + out1.string() + " --emit-coarse " + coarse.string()), 0)
      << log_text();
  ASSERT_EQ(run("complete" + inputs + " --out " + out2.string()), 0) << log_text();
  EXPECT_EQ(read_file(out1), read_file(out2));
  const PointCloud p_out = read_xyz(out1), p_0 = read_xyz(coarse);
  ASSERT_EQ(p_out.size(), 2u * 4u);  // micro: M * N_r'
  ASSERT_EQ(p_0.size(), p_out.size());
  for (std::size_t i = 0; i < p_out.xyz().size(); ++i) {
    const float d = p_out.xyz()[i] - p_0.xyz()[i];
    EXPECT_GT(d, -1.0f);
    EXPECT_LT(d, 1.0f);
  }
}

TEST(Cli, MalformedInputIsLocated) {
  const auto run_dir = scratch() / "complete_run";
  if (!fs::exists(run_dir / "final.ckpt")) ASSERT_EQ(run(train_args(run_dir)), 0);
  const auto obj = micro_data() / "train" / "table" / "table_0000";
  const auto bad = scratch() / "bad.xyz";
  write_file(bad, "0 0 0\n0 0 q\n");
  EXPECT_EQ(run("complete --checkpoint " + (run_dir / "final.ckpt").string() + " --partial " + bad.string() +
                " --image " + (obj / "view_1.img").string() + " --camera " + (obj / "cam_1.txt").string() +
                " --out " + (scratch() / "never.xyz").string()),
            1);
  EXPECT_NE(log_text().find("bad.xyz:2:"), std::string::npos) << log_text();
}

TEST(Cli, VerifyNegativeControlNamesPrimitive) {
  EXPECT_EQ(run("verify --suite gradient --perturb-vjp matmul"), 2);
  EXPECT_NE(log_text().find("matmul"), std::string::npos);
  EXPECT_NE(log_text().find("FAIL"), std::string::npos);
}
