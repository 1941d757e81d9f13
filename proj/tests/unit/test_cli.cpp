// Copyright 2026 The kmunet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "kmunet/cli/cli.hpp"
#include "kmunet/model/checkpoint.hpp"

using namespace kmunet;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "kmunet");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(int(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

const char* kTinyConfig =
    "conv_channels=4,8,8\n"
    "token_dims=16,16\n"
    "n_state=2\n"
    "train.epochs=2\n"
    "train.batch_size=2\n"
    "train.seed=1\n";

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("gen-data is byte-for-byte reproducible") {
    const auto dir = testing::temp_dir("cli_gen");
    REQUIRE(run({"gen-data", "--out", dir + "/a", "--n", "3", "--size", "32x32", "--seed", "4"}).code == 0);
    REQUIRE(run({"gen-data", "--out", dir + "/b", "--n", "3", "--size", "32x32", "--seed", "4"}).code == 0);
    for (const char* f : {"index.txt", "images/syn00000.ppm", "masks/syn00002.pgm"}) {
      CHECK(slurp(dir + "/a/" + f) == slurp(dir + "/b/" + f));
      CHECK_FALSE(slurp(dir + "/a/" + f).empty());
    }
  }

  TEST_CASE("validation failures exit 1") {
    const auto dir = testing::temp_dir("cli_val");
    CHECK(run({"gen-data", "--out", dir, "--n", "2", "--size", "60x60"}).code == cli::kValidation);
    CHECK(run({"gen-data", "--out", dir, "--n", "2"}).code == cli::kValidation);
    CHECK(run({"no-such-command"}).code == cli::kValidation);
    std::ofstream(dir + "/bad.cfg") << "not_a_key=3\n";
    const auto r = run({"train", "--config", dir + "/bad.cfg"});
    CHECK(r.code == cli::kValidation);
    CHECK(r.err.find("not_a_key") != std::string::npos);
    CHECK(run({"--help"}).code == cli::kOk);
  }

  TEST_CASE("gradcheck suites pass and the corrupted control fails") {
    const auto ok = run({"gradcheck", "--module", "s6"});
    CHECK(ok.code == cli::kOk);
    CHECK(ok.out.find("gradcheck passed") != std::string::npos);
    const auto bad = run({"gradcheck", "--module", "s6", "--corrupt-backward"});
    CHECK(bad.code == cli::kVerification);
    CHECK(bad.out.find("FAIL") != std::string::npos);
    CHECK(run({"gradcheck", "--module", "nope"}).code == cli::kValidation);
  }

  TEST_CASE("unreadable inputs exit 3") {
    const auto dir = testing::temp_dir("cli_io");
    std::ofstream(dir + "/bad.ckpt") << "garbage bytes";
    CHECK(run({"eval", "--ckpt", dir + "/bad.ckpt", "--data", dir}).code == cli::kIo);
    CHECK(run({"infer", "--ckpt", dir + "/missing.ckpt", "--image", dir + "/x.ppm", "--out", dir + "/y.pgm"}).code ==
          cli::kIo);
  }

  TEST_CASE("train, eval, infer and explain end to end") {
    const auto dir = testing::temp_dir("cli_e2e");
    REQUIRE(run({"gen-data", "--out", dir + "/data", "--n", "4", "--size", "32x32", "--seed", "2"}).code == 0);
    std::ofstream(dir + "/run.cfg") << kTinyConfig << "data.dir=" << dir << "/data\nout.dir=" << dir << "/run\n";
    const auto tr = run({"train", "--config", dir + "/run.cfg", "--set", "data.val_ratio=0.5"});
    REQUIRE(tr.code == 0);
    CHECK(tr.out.find("n_state = 2") != std::string::npos);
    CHECK(tr.out.find("best val IoU") != std::string::npos);
    CHECK(fs::exists(dir + "/run/best.ckpt"));
    CHECK(fs::exists(dir + "/run/config.txt"));
    CHECK(slurp(dir + "/run/history.csv").rfind("epoch,lr,train_loss,val_iou,val_f1", 0) == 0);

    const auto ev = run({"eval", "--ckpt", dir + "/run/best.ckpt", "--data", dir + "/data"});
    CHECK(ev.code == 0);
    CHECK(ev.out.find("mean iou") != std::string::npos);

    const std::string image = dir + "/data/images/syn00000.ppm";
    REQUIRE(run({"infer", "--ckpt", dir + "/run/best.ckpt", "--image", image, "--out", dir + "/pred.pgm"}).code == 0);
    const auto pred = data::read_pnm(dir + "/pred.pgm");
    CHECK(pred.channels == 1);
    CHECK(pred.width == 32);
    for (auto p : pred.pixels) CHECK((p == 0 || p == 255));

    REQUIRE(run({"explain", "--ckpt", dir + "/run/best.ckpt", "--image", image, "--out", dir + "/maps"}).code == 0);
    for (const char* f : {"stage1.pgm", "stage2.pgm", "stage3.pgm", "stage4.pgm", "stage5.pgm", "bottleneck.pgm"}) {
      INFO(f);
      CHECK(fs::exists(dir + "/maps/" + f));
    }
    CHECK(data::read_pnm(dir + "/maps/stage1.pgm").width == 16);

    data::write_pnm(dir + "/odd.pgm", {40, 40, 1, std::vector<std::uint8_t>(1600, 9)});
    CHECK(run({"infer", "--ckpt", dir + "/run/best.ckpt", "--image", dir + "/odd.pgm", "--out", dir + "/o.pgm"}).code ==
          cli::kValidation);
  }

  TEST_CASE("multiple runs report mean and spread") {
    const auto dir = testing::temp_dir("cli_runs");
    REQUIRE(run({"gen-data", "--out", dir + "/data", "--n", "4", "--size", "32x32", "--seed", "3"}).code == 0);
    std::ofstream(dir + "/run.cfg") << kTinyConfig << "train.epochs=1\ndata.dir=" << dir << "/data\nout.dir=" << dir
                                    << "/run\n";
    const auto tr = run({"train", "--config", dir + "/run.cfg", "--runs", "2"});
    REQUIRE(tr.code == 0);
    CHECK(fs::exists(dir + "/run/run0/best.ckpt"));
    CHECK(fs::exists(dir + "/run/run1/best.ckpt"));
    CHECK(tr.out.find("+-") != std::string::npos);
  }

  TEST_CASE("activation maps are normalized") {
    std::mt19937_64 rng(1);
    const auto m = cli::activation_map(testing::random_tensor<float>({1, 4, 5, 6}, rng));
    REQUIRE(m.size() == 30);
    CHECK(*std::min_element(m.begin(), m.end()) == 0.0f);
    CHECK(*std::max_element(m.begin(), m.end()) == 1.0f);
    for (float v : cli::activation_map(Tensor<float>::full({1, 2, 3, 3}, 0.7f))) CHECK(v == 0.0f);
  }

  TEST_CASE("bench prints timings and model size") {
    const auto r = run({"bench", "--op", "selective_scan", "--sizes", "64,128", "--reps", "1", "--d", "4", "--n", "4"});
    CHECK(r.code == 0);
    CHECK(r.out.find("128") != std::string::npos);
    CHECK(r.out.find("model parameters") != std::string::npos);
    CHECK(r.out.find("estimate") != std::string::npos);
    CHECK(cli::bench_selective_scan(32, 2, 2, 1, 1) > 0.0);
  }

  TEST_CASE("config resolution honours overrides and KM_SEED") {
    const auto dir = testing::temp_dir("cli_cfg");
    std::ofstream(dir + "/a.cfg") << "n_state=4\ndata.dir=" << dir << "\n";
    ::setenv("KM_SEED", "42", 1);
    const auto cfg = cli::load_run_config(dir + "/a.cfg", {"kan_grid=7"});
    ::unsetenv("KM_SEED");
    CHECK(cfg.model.n_state == 4);
    CHECK(cfg.model.kan_grid == 7);
    CHECK(cfg.train.seed == 42);
    CHECK_THROWS_AS(cli::load_run_config(dir + "/a.cfg", {"oops"}), ConfigError);
    CHECK_THROWS_AS(cli::load_run_config(dir + "/missing.cfg", {}), IoError);
  }
}
