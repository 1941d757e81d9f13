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
#include "kmunet/cli/suites.hpp"

#include "kmunet/error.hpp"
#include "kmunet/kan/kan.hpp"
#include "kmunet/model/model.hpp"
#include "kmunet/numerics/ops.hpp"
#include "kmunet/numerics/params.hpp"
#include "kmunet/s6/s6.hpp"
#include "kmunet/sem/sem.hpp"
#include "kmunet/train/train.hpp"

namespace kmunet::cli {

namespace {

using D = double;
using Leaves = std::vector<NamedLeaf>;

// Random projection weights so the checked scalar depends on every output
// coordinate with a different sign and size.
std::vector<D> probe(std::size_t n, Initializer<D>& init) {
  std::vector<D> w(n);
  for (D& v : w) v = init.draw_uniform(-1.0, 1.0);
  return w;
}

void add_params(Leaves& leaves, const ParamList<D>& params) {
  for (const auto& p : params) leaves.push_back(p);
}

class Runner {
 public:
  explicit Runner(std::vector<SuiteCase>& out) : out_(out) {}

  void check(const std::string& module, const std::string& op, std::function<Tensor<D>()> f, Leaves leaves,
             const GradCheckOptions& opt = {}) {
    out_.push_back({module, op, grad_check(f, std::move(leaves), opt)});
  }

  // Scalar probe of a tensor-valued function.
  void check_map(const std::string& module, const std::string& op, std::function<Tensor<D>()> f, Leaves leaves,
                 Initializer<D>& init, const GradCheckOptions& opt = {}) {
    const Tensor<D> sample = f();
    auto w = std::make_shared<std::vector<D>>(probe(sample.numel(), init));
    check(module, op, [f, w] { return weighted_sum(f(), std::span<const D>(*w)); }, std::move(leaves), opt);
  }

 private:
  std::vector<SuiteCase>& out_;
};

void numerics_suite(Runner& run) {
  Initializer<D> init(101);
  {
    Tensor<D> a = init.uniform({3, 4}, 1.0), b = init.uniform({4, 2}, 1.0);
    run.check_map("numerics", "matmul", [=] { return matmul(a, b); }, {{"a", a}, {"b", b}}, init);
  }
  {
    Tensor<D> x = init.uniform({2, 3, 5}, 1.0), w = init.uniform({4, 5}, 1.0), bias = init.uniform({4}, 1.0);
    run.check_map("numerics", "linear", [=] { return linear(x, w, bias); }, {{"x", x}, {"w", w}, {"bias", bias}}, init);
  }
  {
    Tensor<D> x = init.uniform({2, 4, 6, 5}, 1.0), w = init.uniform({6, 2, 3, 3}, 0.5), bias = init.uniform({6}, 0.5);
    run.check_map("numerics", "conv2d", [=] { return conv2d(x, w, bias, {2, 1, 2}); },
                  {{"x", x}, {"w", w}, {"bias", bias}}, init);
  }
  {
    Tensor<D> x = init.uniform({1, 3, 5, 4}, 1.0), w = init.uniform({3, 1, 3, 3}, 0.5), bias = init.uniform({3}, 0.5);
    run.check_map("numerics", "conv2d_depthwise", [=] { return conv2d(x, w, bias, {1, 1, 3}); },
                  {{"x", x}, {"w", w}, {"bias", bias}}, init);
  }
  {
    Tensor<D> x = init.uniform({3, 2, 6}, 2.0), g = init.uniform({6}, 1.0), b = init.uniform({6}, 1.0);
    run.check_map("numerics", "layernorm", [=] { return layernorm(x, g, b); }, {{"x", x}, {"gamma", g}, {"beta", b}},
                  init);
  }
  {
    Tensor<D> x = init.uniform({2, 4, 3, 3}, 2.0), g = init.uniform({4}, 1.0), b = init.uniform({4}, 1.0);
    run.check_map("numerics", "group_norm", [=] { return group_norm(x, 2, g, b); },
                  {{"x", x}, {"gamma", g}, {"beta", b}}, init);
  }
  for (Pointwise fn : {Pointwise::exp, Pointwise::sigmoid, Pointwise::silu, Pointwise::relu, Pointwise::softplus}) {
    std::vector<D> v(12);
    for (std::size_t i = 0; i < v.size(); ++i) {
      // Keep relu inputs away from its kink.
      const D u = init.draw_uniform(0.1, 2.0);
      v[i] = (i % 2 == 0) ? u : -u;
    }
    Tensor<D> x = Initializer<D>::leaf({3, 4}, v);
    run.check_map("numerics", "pointwise_" + std::string(pointwise_name(fn)), [=] { return pointwise(fn, x); },
                  {{"x", x}}, init);
  }
  {
    Tensor<D> x = init.uniform({1, 2, 4, 4}, 1.0);
    Tensor<D> wd = init.uniform({4, 2, 3, 3}, 0.5), bd = init.uniform({4}, 0.5);
    Tensor<D> wu = init.uniform({2, 4, 1, 1}, 0.5), bu = init.uniform({2}, 0.5);
    model::Resample<D> down{wd, bd}, up{wu, bu};
    run.check_map("numerics", "down_up_pair",
                  [=] { return model::patch_expand(model::patch_merge(x, down), up); },
                  {{"x", x}, {"down.w", wd}, {"down.b", bd}, {"up.w", wu}, {"up.b", bu}}, init);
  }
  {
    Tensor<D> a = init.uniform({2, 3}, 1.0), b = init.uniform({2, 3}, 1.0);
    run.check_map("numerics", "add_sub_mul", [=] { return mul(sub(add(a, b), scale(b, 0.3)), a); },
                  {{"a", a}, {"b", b}}, init);
  }
}

void s6_suite(Runner& run) {
  Initializer<D> init(202);
  for (std::size_t n_state : {1, 4}) {
    const std::size_t d = 3;
    s6::S6Params<D> p = s6::init_params<D>(d, n_state, init);
    Tensor<D> x = init.uniform({2, 7, d}, 1.0);
    Leaves leaves{{"x", x}};
    ParamList<D> ps;
    p.collect("", ps);
    add_params(leaves, ps);
    run.check_map("s6", "selective_scan_n" + std::to_string(n_state), [=] { return s6::selective_scan(x, p); },
                  leaves, init);
  }
}

void kan_suite(Runner& run) {
  Initializer<D> init(303);
  {
    kan::KanLayer<D> layer = kan::init_kan_layer<D>(4, 3, {}, init);
    Tensor<D> z = init.uniform({2, 5, 4}, 0.95);
    Leaves leaves{{"z", z}};
    ParamList<D> ps;
    layer.collect("", ps);
    add_params(leaves, ps);
    run.check_map("kan", "kan_layer", [=] { return kan::kan_layer_forward(z, layer); }, leaves, init);
  }
  for (kan::TokenMixer mixer : {kan::TokenMixer::kan, kan::TokenMixer::mlp}) {
    kan::TokBlockOptions opt;
    opt.mixer = mixer;
    kan::TokBlock<D> block = kan::init_tok_block<D>(4, opt, init);
    Tensor<D> z = init.uniform({2, 6, 4}, 0.95);
    Leaves leaves{{"z", z}};
    ParamList<D> ps;
    block.collect("", ps);
    add_params(leaves, ps);
    run.check_map("kan", mixer == kan::TokenMixer::kan ? "tok_kan_block" : "tok_mlp_block",
                  [=] { return kan::tok_block_forward(z, block, 2, 3); }, leaves, init);
  }
}

void sem_suite(Runner& run) {
  Initializer<D> init(404);
  sem::SemConfig cfg;
  cfg.channels = 4;
  cfg.n_state = 3;
  cfg.attention_groups = 2;
  sem::SemParams<D> p = sem::init_params<D>(cfg, init);
  ParamList<D> ps;
  p.collect("", cfg, ps);
  {
    Tensor<D> x = init.uniform({1, 4, 3, 4}, 1.0);
    Leaves leaves{{"x", x}, {"attn.w1", p.w1}, {"attn.b1", p.b1}, {"attn.w3", p.w3}, {"attn.b3", p.b3}};
    run.check_map("sem", "multiscale_attention", [=] { return sem::multiscale_attention(x, cfg, p); }, leaves, init);
  }
  {
    Tensor<D> x = init.uniform({1, 4, 3, 4}, 1.0);
    Leaves leaves{{"x", x}};
    add_params(leaves, ps);
    run.check_map("sem", "sem_block", [=] { return sem::sem_forward(x, cfg, p); }, leaves, init);
  }
  {
    sem::SemConfig spiral = cfg;
    spiral.directions = {scan::ScanDirection::spiral_in};
    sem::SemParams<D> sp = sem::init_params<D>(spiral, init);
    ParamList<D> sps;
    sp.collect("", spiral, sps);
    Tensor<D> x = init.uniform({1, 4, 4, 3}, 1.0);
    Leaves leaves{{"x", x}};
    add_params(leaves, sps);
    run.check_map("sem", "sem_block_spiral", [=] { return sem::sem_forward(x, spiral, sp); }, leaves, init);
  }
}

void model_suite(Runner& run) {
  ModelConfig cfg;
  cfg.conv_channels = {4, 8, 16};
  cfg.token_dims = {32, 64};
  cfg.n_state = 4;
  const model::KmUnet<D> m = model::build<D>(cfg, 505);
  Initializer<D> init(506);
  Tensor<D> x = init.uniform({1, 3, 32, 32}, 1.0);
  x.set_requires_grad(true);
  std::vector<D> target(32 * 32);
  for (D& v : target) v = init.draw_uniform(0.0, 1.0) < 0.3 ? 1.0 : 0.0;
  const Tensor<D> y({1, 1, 32, 32}, target);
  Leaves leaves{{"input", x}};
  add_params(leaves, m.parameters());
  GradCheckOptions opt;
  opt.max_coords_per_leaf = 8;
  opt.seed = 507;
  run.check("model", "full_model_loss", [=] { return train::bce_dice_loss(model::forward(m, x), y); }, leaves, opt);
}

// Doubles its input but reports a gradient 10% too large.
Tensor<D> corrupted_double(const Tensor<D>& x) {
  std::vector<D> out(x.values().begin(), x.values().end());
  for (D& v : out) v *= 2.0;
  return attach("corrupted_double", Tensor<D>(x.shape(), std::move(out)), {x}, [x](std::span<const D> g) {
    if (!x.requires_grad()) return;
    auto gx = x.grad_accumulator();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += 2.2 * g[i];
  });
}

}  // namespace

std::vector<SuiteCase> run_gradcheck_suites(const std::string& module, bool corrupt) {
  const bool all = module == "all";
  bool known = all;
  for (const auto& m : kSuiteModules) known = known || m == module;
  if (!known) throw ConfigError("gradcheck: unknown module '" + module + "' (expected all|numerics|s6|kan|sem|model)");
  std::vector<SuiteCase> out;
  Runner run(out);
  if (all || module == "numerics") numerics_suite(run);
  if (all || module == "s6") s6_suite(run);
  if (all || module == "kan") kan_suite(run);
  if (all || module == "sem") sem_suite(run);
  if (all || module == "model") model_suite(run);
  if (corrupt) {
    Initializer<D> init(909);
    Tensor<D> x = init.uniform({2, 3}, 1.0);
    run.check_map("negative_control", "corrupted_double", [=] { return corrupted_double(x); }, {{"x", x}}, init);
  }
  return out;
}

}  // namespace kmunet::cli
