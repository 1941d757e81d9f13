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
// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit if any
// criterion fails.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "kmunet/cli/cli.hpp"
#include "kmunet/kan/kan.hpp"
#include "kmunet/kernels/kernels.hpp"
#include "kmunet/model/checkpoint.hpp"
#include "kmunet/model/model.hpp"
#include "kmunet/s6/s6.hpp"
#include "kmunet/scan/scan.hpp"
#include "kmunet/train/train.hpp"
#include "oracles/s6_oracle.hpp"

using namespace kmunet;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass;
  std::string detail;
};

int failures = 0;

void report(const char* name, const std::function<Outcome()>& criterion) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = criterion();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::printf("%s %-22s %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), seconds_since(t0));
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), f, a, b, c);
  return buf;
}

int run_cli(std::vector<std::string> args, std::string* out_text = nullptr) {
  args.insert(args.begin(), "kmunet");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  if (out_text != nullptr) *out_text = out.str();
  return code;
}

std::vector<double> uniform(std::size_t n, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

Tensor<double> tensor(Shape s, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  const std::size_t n = shape_numel(s);
  return Tensor<double>(std::move(s), uniform(n, rng, lo, hi));
}

std::vector<double> as_vector(const Tensor<double>& t) { return {t.values().begin(), t.values().end()}; }

Outcome s6_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t b = 1 + rng() % 2, l = 1 + rng() % 32, d = 1 + rng() % 4, n = 1 + rng() % 4;
    s6::S6Params<double> p;
    p.log_a = tensor({d, n}, rng, -1.0, 1.5);
    p.d_skip = tensor({d}, rng);
    p.w_delta = tensor({d, d}, rng);
    p.b_delta = tensor({d}, rng, -3.0, 1.0);
    p.w_b = tensor({n, d}, rng);
    p.b_b = tensor({n}, rng);
    p.w_c = tensor({n, d}, rng);
    p.b_c = tensor({n}, rng);
    const auto x = tensor({b, l, d}, rng, -2.0, 2.0);
    const auto y = s6::selective_scan(x, p);
    const oracle::S6Weights w{d,
                              n,
                              as_vector(p.log_a),
                              as_vector(p.d_skip),
                              as_vector(p.w_delta),
                              as_vector(p.b_delta),
                              as_vector(p.w_b),
                              as_vector(p.b_b),
                              as_vector(p.w_c),
                              as_vector(p.b_c)};
    const auto ref = oracle::s6_naive(as_vector(x), b, l, w);
    for (std::size_t i = 0; i < ref.size(); ++i) worst = std::max(worst, std::abs(ref[i] - y.values()[i]));
  }
  const Tensor<double> one({1, 2, 1}, {1, 1});
  const auto y = s6::selective_scan_core(one, one, Tensor<double>({1, 1}, {-1}), one, one, Tensor<double>({1}, {0}));
  const double e1 = std::abs(y.values()[0] - (1.0 - std::exp(-1.0)));
  const double e2 = std::abs(y.values()[1] - (1.0 - std::exp(-2.0)));
  const double secs = seconds_since(t0);
  return {worst <= 1e-6 && e1 <= 1e-6 && e2 <= 1e-6 && secs < 10.0,
          fmt("100 configs max|diff| %.2e; closed form errors %.2e, %.2e", worst, e1, e2)};
}

Outcome gradcheck_suite() {
  const auto t0 = Clock::now();
  std::string text;
  const int code = run_cli({"gradcheck", "--module", "all"}, &text);
  const double secs = seconds_since(t0);
  double worst = 0.0;
  std::istringstream lines(text);
  for (std::string line; std::getline(lines, line);) {
    if (line.rfind("worst ", 0) != 0) continue;
    worst = std::max(worst, std::stod(line.substr(line.find_last_of(' ') + 1)));
  }
  return {code == 0 && worst <= 1e-5 && secs <= 300.0, fmt("worst rel err %.2e, exit %.0f", worst, code)};
}

Outcome scan_bijection() {
  bool ok = true;
  std::mt19937_64 rng(3);
  for (auto dir : scan::kAllDirections) {
    for (std::size_t h = 1; h <= 12; ++h) {
      for (std::size_t w = 1; w <= 12; ++w) {
        const auto perm = scan::permutation_for(dir, h, w);
        std::vector<int> seen(h * w, 0);
        for (std::size_t t = 0; t < perm.order.size(); ++t) {
          if (perm.order[t] >= h * w) ok = false;
          else ++seen[perm.order[t]];
        }
        ok = ok && perm.order.size() == h * w && std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; });
        const auto x = tensor({1, 2, h, w}, rng);
        const auto back = scan::fold(scan::unfold(x, dir), dir, h, w);
        ok = ok && std::equal(x.values().begin(), x.values().end(), back.values().begin());
      }
    }
  }
  const auto spiral = scan::permutation_for(scan::ScanDirection::spiral_in, 3, 3).order;
  const bool spiral_ok = spiral == std::vector<std::size_t>{0, 1, 2, 5, 8, 7, 6, 3, 4};
  return {ok && spiral_ok, std::string("5 directions x H,W in 1..12; 3x3 spiral ") + (spiral_ok ? "matches" : "differs")};
}

Outcome metric_identities() {
  std::mt19937_64 rng(4);
  bool exact = true;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = 1 + rng() % 256;
    std::vector<float> p(n), g(n);
    const unsigned density = rng() % 9;
    for (std::size_t k = 0; k < n; ++k) {
      p[k] = static_cast<float>(rng() % 8 < density);
      g[k] = static_cast<float>(rng() % 8 < density);
    }
    const double iou = train::iou(p, g), f1 = train::f1_dice(p, g);
    exact = exact && f1 == 2.0 * iou / (1.0 + iou);
  }
  const std::vector<float> a{1, 1, 0, 0}, b{1, 0, 1, 0}, c{0, 0, 1, 1};
  const bool hand = train::iou(a, b) == 1.0 / 3.0 && train::f1_dice(a, b) == 0.5;
  const bool same = train::iou(a, a) == 1.0 && train::f1_dice(a, a) == 1.0;
  const bool disjoint = train::iou(a, c) == 0.0 && train::f1_dice(a, c) == 0.0;
  return {exact && hand && same && disjoint,
          std::string("identity on 1000 pairs ") + (exact ? "exact" : "broken") + "; hand case " + (hand ? "ok" : "wrong")};
}

Outcome schedule_endpoints() {
  const train::TrainConfig cfg;
  const double start = train::cosine_lr(0, cfg), end = train::cosine_lr(cfg.epochs, cfg);
  bool monotone = true;
  for (std::size_t t = 1; t <= cfg.epochs; ++t) monotone = monotone && train::cosine_lr(t, cfg) <= train::cosine_lr(t - 1, cfg);
  const bool ok = std::abs(start - 1e-4) <= 1e-12 && std::abs(end - 1e-5) <= 1e-12 && monotone;
  return {ok, fmt("lr(0) %.3e, lr(%.0f) %.3e", start, double(cfg.epochs), end) + (monotone ? ", nonincreasing" : ", increases")};
}

Outcome kan_spline() {
  const kan::SplineGrid grid(5, 3, 1.0);
  std::mt19937_64 rng(5);
  double pu = 0.0;
  for (double x : uniform(10000, rng, -1.0, 1.0)) {
    double s = 0.0;
    for (double v : kan::bspline_basis(x, grid)) s += v;
    pu = std::max(pu, std::abs(s - 1.0));
  }
  // Least squares for f(x) = x on a dense grid via the normal equations.
  const std::size_t nb = grid.basis_count();
  std::vector<std::vector<double>> m(nb, std::vector<double>(nb + 1, 0.0));
  for (int s = 0; s <= 400; ++s) {
    const double x = -1.0 + 2.0 * s / 400.0;
    const auto row = kan::bspline_basis(x, grid);
    for (std::size_t i = 0; i < nb; ++i) {
      for (std::size_t j = 0; j < nb; ++j) m[i][j] += row[i] * row[j];
      m[i][nb] += row[i] * x;
    }
  }
  for (std::size_t col = 0; col < nb; ++col) {
    for (std::size_t r = 0; r < nb; ++r) {
      if (r == col) continue;
      const double f = m[r][col] / m[col][col];
      for (std::size_t j = col; j <= nb; ++j) m[r][j] -= f * m[col][j];
    }
  }
  std::vector<double> coeffs(nb);
  for (std::size_t i = 0; i < nb; ++i) coeffs[i] = m[i][nb] / m[i][i];
  Initializer<double> init(5);
  auto layer = kan::init_kan_layer<double>(1, 1, {}, init);
  layer.base_weight = Tensor<double>({1, 1});
  layer.spline_coeffs = Tensor<double>({1, 1, nb}, coeffs);
  const auto x = tensor({1000, 1}, rng);
  const auto y = kan::kan_layer_forward(x, layer);
  double fit = 0.0;
  for (std::size_t i = 0; i < 1000; ++i) fit = std::max(fit, std::abs(y.values()[i] - x.values()[i]));
  return {pu <= 1e-9 && fit <= 1e-3, fmt("partition of unity err %.2e; linear fit err %.2e", pu, fit)};
}

Outcome shape_contract() {
  const ModelConfig cfg;
  const auto m = model::build<float>(cfg, 1);
  bool ok = true;
  std::string detail;
  for (auto [b, h, w] : {std::array<std::size_t, 3>{2, 64, 64}, {2, 96, 64}, {1, 128, 128}}) {
    model::ForwardTrace<float> trace;
    const auto y = model::forward(m, Tensor<float>::full({b, 3, h, w}, 0.5f), &trace);
    ok = ok && y.shape() == Shape{b, cfg.out_channels, h, w} && trace.bottleneck.dim(2) == h / 32 &&
         trace.bottleneck.dim(3) == w / 32;
    detail += shape_string(y.shape()) + " ";
  }
  bool rejects = false;
  try {
    model::forward(m, Tensor<float>({1, 3, 60, 60}));
  } catch (const DimensionError&) {
    rejects = true;
  }
  return {ok && rejects, detail + (rejects ? "; 60x60 rejected" : "; 60x60 accepted")};
}

Outcome checkpoint_roundtrip(const std::string& dir) {
  const auto m = model::build<float>(ModelConfig{}, 11);
  model::save_checkpoint(m, dir + "/m.ckpt");
  const auto back = model::load_checkpoint<float>(dir + "/m.ckpt");
  std::mt19937_64 rng(11);
  const auto xv = uniform(3 * 64 * 64, rng, 0.0, 1.0);
  const Tensor<float> x({1, 3, 64, 64}, std::vector<float>(xv.begin(), xv.end()));
  const auto a = model::forward(m, x), b = model::forward(back, x);
  const bool identical = std::equal(a.values().begin(), a.values().end(), b.values().begin());
  std::ifstream in(dir + "/m.ckpt", std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), {});
  bytes[0] = 'Z';
  std::ofstream(dir + "/bad.ckpt", std::ios::binary) << bytes;
  const int code = run_cli({"eval", "--ckpt", dir + "/bad.ckpt", "--data", dir});
  return {identical && code == 3,
          std::string("logits ") + (identical ? "bit-identical" : "differ") + fmt("; corrupt magic exit %.0f", code)};
}

Outcome scan_linear_time() {
  cli::bench_selective_scan(512, 16, 16, 1, 2);
  const double t2 = cli::bench_selective_scan(2048, 16, 16, 1, 9);
  const double t4 = cli::bench_selective_scan(4096, 16, 16, 1, 9);
  const double ratio = t4 / t2;
  return {ratio >= 1.6 && ratio <= 2.6, fmt("L=2048 %.2f ms, L=4096 %.2f ms, ratio %.3f", t2 * 1e3, t4 * 1e3, ratio)};
}

Outcome overfit(const std::string& dir) {
  if (run_cli({"gen-data", "--out", dir + "/data", "--n", "16", "--size", "64x64", "--seed", "7"}) != 0) {
    return {false, "gen-data failed"};
  }
  const auto samples = data::read_dataset(dir + "/data");
  ModelConfig cfg;
  cfg.conv_channels = {8, 16, 32};
  cfg.token_dims = {64, 128};
  cfg.n_state = 8;
  train::TrainConfig tc;
  tc.epochs = 200;
  tc.lr_max = 1e-3;
  tc.lr_min = 1e-5;
  tc.seed = 7;
  tc.augment = false;
  struct Run {
    double iou;
    double seconds;
    ParamList<float> params;
  };
  const auto once = [&] {
    const auto t0 = Clock::now();
    auto m = model::build<float>(cfg, tc.seed);
    train::train_loop(m, samples, samples, tc);
    const double iou = train::evaluate(m, samples).mean_iou;
    return Run{iou, seconds_since(t0), m.parameters()};
  };
  const Run a = once();
  std::printf("     overfit run 1: train IoU %.6f in %.1f s\n", a.iou, a.seconds);
  std::fflush(stdout);
  const Run b = once();
  bool same_params = a.params.size() == b.params.size();
  for (std::size_t i = 0; same_params && i < a.params.size(); ++i) {
    const auto va = a.params[i].second.values(), vb = b.params[i].second.values();
    same_params = std::equal(va.begin(), va.end(), vb.begin());
  }
  const bool repro = a.iou == b.iou && same_params;
  return {a.iou >= 0.90 && a.seconds <= 600.0 && repro,
          fmt("train IoU %.6f (rerun %.6f) in %.1f s", a.iou, b.iou, a.seconds) +
              (repro ? ", bit-identical rerun" : ", rerun differs")};
}

}  // namespace

int main() {
  const fs::path dir = fs::temp_directory_path() / ("kmunet_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::printf("isa %s\n", std::string(kernels::isa_name(kernels::active_isa())).c_str());
  report("s6_oracle", s6_oracle);
  report("gradcheck_suite", gradcheck_suite);
  report("scan_bijection", scan_bijection);
  report("metric_identities", metric_identities);
  report("schedule_endpoints", schedule_endpoints);
  report("kan_spline", kan_spline);
  report("shape_contract", shape_contract);
  report("checkpoint_roundtrip", [&] { return checkpoint_roundtrip(dir.string()); });
  report("scan_linear_time", scan_linear_time);
  report("overfit", [&] { return overfit(dir.string()); });
  fs::remove_all(dir);
  std::printf("%s: %d criteria failed\n", failures == 0 ? "ACCEPTED" : "REJECTED", failures);
  return failures == 0 ? 0 : 1;
}
