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

#include <cmath>
#include <limits>

#include "helpers.hpp"
#include "kmunet/numerics/gradcheck.hpp"
#include "kmunet/train/train.hpp"

using namespace kmunet;

namespace {

std::vector<data::Sample> small_set(std::size_t n, std::uint64_t seed) { return data::gen_synthetic(n, 32, 32, seed); }

ModelConfig tiny() {
  ModelConfig cfg;
  cfg.conv_channels = {4, 8, 8};
  cfg.token_dims = {16, 16};
  cfg.n_state = 2;
  return cfg;
}

}  // namespace

TEST_SUITE("train") {
  TEST_CASE("zero logits give ln 2 cross-entropy") {
    const Tensor<double> logits({1, 1, 2, 2});
    const Tensor<double> target({1, 1, 2, 2}, {1, 0, 0, 0});
    train::LossParts parts;
    const auto loss = train::bce_dice_loss(logits, target, 1.0, 1.0, &parts);
    CHECK(parts.bce == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    // soft dice = 2 * 0.5 / (2 + 1) = 1/3
    CHECK(parts.dice == doctest::Approx(2.0 / 3.0).epsilon(1e-5));
    CHECK(loss.item() == doctest::Approx(std::log(2.0) + 2.0 / 3.0).epsilon(1e-5));
    const auto weighted = train::bce_dice_loss(logits, target, 2.0, 0.0);
    CHECK(weighted.item() == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
  }

  TEST_CASE("confident correct logits give near-zero loss") {
    const Tensor<double> target({1, 1, 2, 2}, {1, 0, 1, 0});
    const Tensor<double> logits({1, 1, 2, 2}, {30, -30, 30, -30});
    CHECK(train::bce_dice_loss(logits, target).item() <= 1e-6);
    const Tensor<double> wrong({1, 1, 2, 2}, {-30, 30, -30, 30});
    CHECK(train::bce_dice_loss(wrong, target).item() >= 30.0);
  }

  TEST_CASE("extreme logits stay finite") {
    const Tensor<float> target({1, 1, 1, 2}, {1, 0});
    const Tensor<float> logits({1, 1, 1, 2}, {-500.0f, 500.0f});
    CHECK(std::isfinite(train::bce_dice_loss(logits, target).item()));
  }

  TEST_CASE("non-binary targets are rejected") {
    CHECK_THROWS_AS(train::bce_dice_loss(Tensor<double>({1, 1, 1, 2}), Tensor<double>({1, 1, 1, 2}, {0.5, 1})),
                    ContractError);
  }

  TEST_CASE("loss gradient check") {
    std::mt19937_64 rng(1);
    Tensor<double> logits = testing::random_tensor<double>({2, 1, 3, 3}, rng, -3.0, 3.0);
    std::vector<double> t(18);
    for (auto& v : t) v = double(rng() % 2);
    const Tensor<double> target({2, 1, 3, 3}, t);
    const auto rep = grad_check([&](const Tensor<double>& x) { return train::bce_dice_loss(x, target, 0.7, 1.3); }, logits);
    CHECK(rep.max_rel_error <= 1e-5);
  }

  TEST_CASE("IoU and F1 examples") {
    const std::vector<float> p{1, 1, 0, 0}, g{1, 0, 1, 0}, z{0, 0, 0, 0};
    CHECK(train::iou(p, g) == doctest::Approx(1.0 / 3.0));
    CHECK(train::f1_dice(p, g) == doctest::Approx(0.5));
    CHECK(train::iou(p, p) == 1.0);
    CHECK(train::f1_dice(p, p) == 1.0);
    CHECK(train::iou(z, z) == 1.0);
    CHECK(train::f1_dice(z, z) == 1.0);
    CHECK(train::iou(z, g) == 0.0);
    CHECK(train::f1_dice(p, std::vector<float>{0, 0, 1, 1}) == 0.0);
  }

  TEST_CASE("F1 = 2 IoU / (1 + IoU) and F1 >= IoU on random masks") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 500; ++trial) {
      std::vector<float> p(64), g(64);
      const unsigned density = 1 + rng() % 7;
      for (std::size_t i = 0; i < 64; ++i) {
        p[i] = float(rng() % 8 < density);
        g[i] = float(rng() % 8 < density);
      }
      double inter = 0, ps = 0, gs = 0;
      for (std::size_t i = 0; i < 64; ++i) {
        inter += p[i] * g[i];
        ps += p[i];
        gs += g[i];
      }
      const double iou = train::iou(p, g), f1 = train::f1_dice(p, g);
      if (ps + gs > 0) {
        CHECK(iou == doctest::Approx(inter / (ps + gs - inter)).epsilon(1e-12));
        CHECK(f1 == doctest::Approx(2 * inter / (ps + gs)).epsilon(1e-12));
      }
      CHECK(f1 == 2 * iou / (1 + iou));
      CHECK(f1 >= iou);
      CHECK(iou >= 0.0);
      CHECK(f1 <= 1.0);
    }
  }

  TEST_CASE("metrics reject non-binary masks and size mismatch") {
    CHECK_THROWS_AS(train::iou(std::vector<float>{0.5f}, std::vector<float>{1.0f}), ContractError);
    CHECK_THROWS_AS(train::iou(std::vector<float>{1.0f}, std::vector<float>{1.0f, 0.0f}), DimensionError);
  }

  TEST_CASE("cosine schedule endpoints, midpoint and monotonicity") {
    train::TrainConfig cfg;
    cfg.epochs = 300;
    cfg.lr_max = 1e-4;
    cfg.lr_min = 1e-5;
    CHECK(train::cosine_lr(0, cfg) == doctest::Approx(1e-4).epsilon(1e-12));
    CHECK(train::cosine_lr(300, cfg) == doctest::Approx(1e-5).epsilon(1e-12));
    CHECK(train::cosine_lr(150, cfg) == doctest::Approx(5.5e-5).epsilon(1e-12));
    for (std::size_t t = 1; t <= 300; ++t) {
      CHECK(train::cosine_lr(t, cfg) <= train::cosine_lr(t - 1, cfg));
      CHECK(train::cosine_lr(t, cfg) >= cfg.lr_min);
    }
    CHECK_THROWS_AS(train::cosine_lr(301, cfg), ContractError);
  }

  TEST_CASE("train config keys and validation") {
    train::TrainConfig cfg;
    CHECK(cfg.set("train.epochs", "12"));
    CHECK(cfg.epochs == 12);
    CHECK(cfg.set("train.augment", "false"));
    CHECK_FALSE(cfg.augment);
    CHECK_FALSE(cfg.set("train.nope", "1"));
    cfg.lr_min = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }

  TEST_CASE("Adam: zero gradient is a no-op, first step is lr * sign") {
    Tensor<float> w({4}, {1, 2, 3, 4});
    w.set_requires_grad(true);
    ParamList<float> params{{"w", w}};
    train::AdamState state;
    train::adam_step(params, state, 0.01);
    CHECK(std::vector<float>(w.values().begin(), w.values().end()) == std::vector<float>{1, 2, 3, 4});
    const std::vector<float> g{0.5f, -2.0f, 1e-3f, -7.0f};
    auto acc = w.grad_accumulator();
    std::copy(g.begin(), g.end(), acc.begin());
    train::AdamState fresh;
    train::adam_step(params, fresh, 0.01);
    const std::vector<float> start{1, 2, 3, 4};
    for (std::size_t i = 0; i < 4; ++i) CHECK(w.values()[i] == doctest::Approx(start[i] - 0.01 * (g[i] > 0 ? 1 : -1)).epsilon(1e-5));
  }

  TEST_CASE("Adam reports the parameter with a non-finite gradient") {
    Tensor<float> a({2}, {1, 2}), b({2}, {3, 4});
    a.set_requires_grad(true);
    b.set_requires_grad(true);
    a.grad_accumulator()[0] = 1.0f;
    b.grad_accumulator()[1] = std::numeric_limits<float>::quiet_NaN();
    ParamList<float> params{{"layer.a", a}, {"layer.b", b}};
    train::AdamState state;
    try {
      train::adam_step(params, state, 0.1);
      FAIL("expected NumericError");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("layer.b") != std::string::npos);
    }
    CHECK(a.values()[0] == 1.0f);
    CHECK(b.values()[0] == 3.0f);
  }

  TEST_CASE("training is deterministic and lowers the loss") {
    const auto samples = small_set(4, 3);
    train::TrainConfig cfg;
    cfg.epochs = 6;
    cfg.batch_size = 2;
    cfg.lr_max = 1e-2;
    cfg.lr_min = 1e-3;
    cfg.seed = 3;
    auto m1 = model::build<float>(tiny(), 3), m2 = model::build<float>(tiny(), 3);
    const double init_iou = train::evaluate(m1, samples).mean_iou;
    std::size_t best_calls = 0;
    train::TrainHooks hooks;
    hooks.on_best = [&](const model::KmUnet<float>&, const train::EpochRecord&) { ++best_calls; };
    const auto r1 = train::train_loop(m1, samples, samples, cfg, hooks);
    const auto r2 = train::train_loop(m2, samples, samples, cfg);
    REQUIRE(r1.history.size() == 6);
    CHECK(best_calls >= 1);
    CHECK(r1.history.back().train_loss < r1.history.front().train_loss);
    for (std::size_t e = 0; e < 6; ++e) {
      CHECK(r1.history[e].train_loss == r2.history[e].train_loss);
      CHECK(r1.history[e].val_iou == r2.history[e].val_iou);
      CHECK(r1.history[e].lr == train::cosine_lr(e, cfg));
    }
    const auto p1 = m1.parameters(), p2 = m2.parameters();
    for (std::size_t i = 0; i < p1.size(); ++i) CHECK(testing::bit_equal(p1[i].second, p2[i].second));
    CHECK(train::evaluate(m1, samples).mean_iou >= init_iou);
    const auto csv = train::history_csv(r1.history);
    CHECK(csv.rfind("epoch,lr,train_loss,val_iou,val_f1\n", 0) == 0);
  }

  TEST_CASE("empty validation set is a config error") {
    auto m = model::build<float>(tiny(), 1);
    train::TrainConfig cfg;
    cfg.epochs = 1;
    CHECK_THROWS_AS(train::train_loop(m, small_set(2, 1), {}, cfg), ConfigError);
  }

  TEST_CASE("evaluation reports one score per image") {
    const auto samples = small_set(3, 4);
    const auto m = model::build<float>(tiny(), 4);
    const auto rep = train::evaluate(m, samples, 2);
    REQUIRE(rep.images.size() == 3);
    double s = 0;
    for (const auto& im : rep.images) {
      CHECK(im.f1 >= im.iou);
      s += im.iou;
    }
    CHECK(rep.mean_iou == doctest::Approx(s / 3));
  }
}
