/* Copyright 2026 The rareseg Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include "json.hpp"
#include "rareseg/dataset.hpp"
#include "support/temp_dir.hpp"

namespace rareseg {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code = -1;
  std::string out;
};

Result RunCli(const std::string& args) {
  const std::string cmd = std::string(RARESEG_CLI_PATH) + " " + args + " 2>&1";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  while (std::fgets(buf, sizeof(buf), pipe)) r.out += buf;
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string ReadBytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

std::string Value(const std::string& out, const std::string& key) {
  const auto pos = out.find(key + "=");
  if (pos == std::string::npos) return "";
  const auto end = out.find('\n', pos);
  return out.substr(pos + key.size() + 1, end - pos - key.size() - 1);
}

class Cli : public ::testing::Test {
 protected:
  std::string Dir(const char* name) const { return (tmp_.path() / name).string(); }
  testing::TempDir tmp_;
};

TEST_F(Cli, SynthIsReproducible) {
  for (const char* d : {"a", "b"}) {
    const Result r = RunCli("synth --count 2 --height 64 --width 64 --seed 3 --out " + Dir(d));
    ASSERT_EQ(r.code, 0) << r.out;
  }
  for (const char* sub : {"images", "masks"}) {
    const auto a = tmp_.path() / "a" / sub / "scene_00001.png";
    ASSERT_TRUE(fs::exists(a));
    EXPECT_EQ(ReadBytes(a), ReadBytes(tmp_.path() / "b" / sub / "scene_00001.png"));
  }
}

TEST_F(Cli, ConfigErrorsExitWithTwo) {
  const fs::path cfg = tmp_.path() / "bad.json";
  std::ofstream(cfg) << R"({"train": {"epoch": 3}})";
  const Result r = RunCli("stats -c " + cfg.string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("train.epoch"), std::string::npos) << r.out;
  EXPECT_EQ(RunCli("synth --count 0").code, 2);
  EXPECT_EQ(RunCli("no-such-command").code, 2);
}

TEST_F(Cli, MissingInputIsRuntimeError) {
  EXPECT_EQ(RunCli("infer --plan-only --input " + Dir("absent.png")).code, 1);
}

TEST_F(Cli, PlanOnlyCountsLargeSceneWindows) {
  const fs::path img = tmp_.path() / "big.png";
  WriteImagePng(img, Image(3000, 4000, 3, 0.5f));
  const Result r = RunCli("infer --plan-only --input " + img.string() + " --out " + Dir("plan"));
  ASSERT_EQ(r.code, 0) << r.out;
  const auto manifest = nlohmann::json::parse(ReadBytes(Value(r.out, "manifest")));
  const auto& entry = manifest.at("images").at(0);
  EXPECT_EQ(entry.at("tile_count"), 20);
  EXPECT_EQ(entry.at("grid_rows"), 4);
  EXPECT_EQ(entry.at("grid_cols"), 5);
  EXPECT_EQ(entry.at("row_origins"), nlohmann::json({0, 768, 1536, 1976}));
}

TEST_F(Cli, EndToEndPipeline) {
  const std::string data = Dir("data");
  ASSERT_EQ(RunCli("synth --count 3 --height 64 --width 64 --out " + data + "/train").code, 0);

  const Result st = RunCli("stats --data " + data + " --split train --csv " + Dir("stats.csv"));
  ASSERT_EQ(st.code, 0) << st.out;
  EXPECT_NE(st.out.find("images=3"), std::string::npos) << st.out;
  EXPECT_TRUE(fs::exists(Dir("stats.csv")));

  const Result tr = RunCli("train --data " + data + " --epochs 1 --steps-per-epoch 2 --crop-size 64"
                        " --run-dir " + Dir("run"));
  ASSERT_EQ(tr.code, 0) << tr.out;
  const std::string ckpt = Value(tr.out, "checkpoint");
  ASSERT_TRUE(fs::exists(ckpt)) << tr.out;
  std::ifstream log(tmp_.path() / "run" / "logs" / "train_log.csv");
  std::string header;
  std::getline(log, header);
  EXPECT_EQ(header, "step,lr,loss_total,loss_ohem,loss_dice,kept_pixels");

  const Result in = RunCli("infer --checkpoint " + ckpt + " --input " + data +
                        "/train/images --tile-size 64 --stride 32 --out " + Dir("preds"));
  ASSERT_EQ(in.code, 0) << in.out;
  EXPECT_TRUE(fs::exists(tmp_.path() / "preds" / "scene_00000.png"));

  const Result ev = RunCli("eval --pred " + Dir("preds") + " --truth " + data +
                        "/train/masks --out " + Dir("metrics.csv"));
  ASSERT_EQ(ev.code, 0) << ev.out;
  EXPECT_EQ(Value(ev.out, "pairs"), "3");
  const double miou = std::stod(Value(ev.out, "mIoU"));
  EXPECT_GE(miou, 0.0);
  EXPECT_LE(miou, 1.0);
  EXPECT_TRUE(fs::exists(Dir("metrics.csv")));
}

TEST_F(Cli, QuickSelftestPasses) {
  const Result r = RunCli("selftest --quick");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("PASS"), std::string::npos);
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
}

}  // namespace
}  // namespace rareseg
