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
#include "kmunet/cli/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "kmunet/cli/suites.hpp"
#include "kmunet/error.hpp"
#include "kmunet/kernels/kernels.hpp"
#include "kmunet/model/checkpoint.hpp"
#include "kmunet/model/model.hpp"
#include "kmunet/s6/s6.hpp"

namespace kmunet::cli {

namespace fs = std::filesystem;

void RunConfig::set(const std::string& key, const std::string& value) {
  if (model.set(key, value)) return;
  if (train.set(key, value)) {
    if (key == "train.seed") seed_set = true;
    return;
  }
  if (key == "data.dir") {
    data_dir = value;
  } else if (key == "data.val_ratio") {
    val_ratio = parse_real(key, value);
  } else if (key == "data.size") {
    if (value.empty() || value == "none") {
      resize.reset();
    } else {
      resize = data::parse_size(value);
    }
  } else if (key == "out.dir") {
    out_dir = value;
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

std::vector<KeyValue> RunConfig::entries() const {
  std::vector<KeyValue> out = model.entries();
  for (auto& kv : train.entries()) out.push_back(std::move(kv));
  out.push_back({"data.dir", data_dir});
  out.push_back({"data.val_ratio", format_real(val_ratio)});
  out.push_back({"data.size", resize ? std::to_string(resize->height) + "x" + std::to_string(resize->width) : "none"});
  out.push_back({"out.dir", out_dir});
  return out;
}

void RunConfig::validate() const {
  model.validate();
  train.validate();
  if (data_dir.empty()) throw ConfigError("data.dir is required");
  if (!(val_ratio >= 0.0 && val_ratio < 1.0)) throw ConfigError("data.val_ratio must lie in [0, 1)");
  if (resize && (resize->height % ModelConfig::kDivisor != 0 || resize->width % ModelConfig::kDivisor != 0)) {
    throw ConfigError("data.size: dimensions must be divisible by 32");
  }
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw IoError(path + ": cannot open config");
  std::stringstream text;
  text << in.rdbuf();
  RunConfig cfg;
  for (const auto& [k, v] : parse_key_values(text.str(), path)) cfg.set(k, v);
  for (const auto& o : overrides) {
    const KeyValue kv = parse_override(o);
    cfg.set(kv.key, kv.value);
  }
  if (!cfg.seed_set) {
    if (const char* env = std::getenv("KM_SEED")) cfg.train.seed = parse_seed("KM_SEED", env);
  }
  cfg.validate();
  return cfg;
}

double bench_selective_scan(std::size_t length, std::size_t d, std::size_t n_state, std::size_t batch,
                            std::size_t reps, std::uint64_t seed) {
  if (length == 0 || d == 0 || n_state == 0 || batch == 0 || reps == 0) {
    throw ConfigError("bench: sizes and repetitions must be positive");
  }
  Initializer<float> init(seed);
  const s6::S6Params<float> p = s6::init_params<float>(d, n_state, init);
  Tensor<float> x = init.uniform({batch, length, d}, 1.0);
  x.set_requires_grad(false);
  std::vector<double> times;
  for (std::size_t r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    const Tensor<float> y = s6::selective_scan(x, p);
    const auto t1 = std::chrono::steady_clock::now();
    if (!std::isfinite(y.values()[0])) throw NumericError("bench: non-finite scan output");
    times.push_back(std::chrono::duration<double>(t1 - t0).count());
  }
  std::sort(times.begin(), times.end());
  return times[times.size() / 2];
}

std::vector<float> activation_map(const Tensor<float>& stage) {
  if (stage.rank() != 4) throw DimensionError("activation map: expected [B,C,H,W], got " + shape_string(stage.shape()));
  const std::size_t c = stage.dim(1), hw = stage.dim(2) * stage.dim(3);
  auto v = stage.values();
  std::vector<double> acc(hw, 0.0);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < hw; ++i) acc[i] += static_cast<double>(v[ch * hw + i]);
  }
  const auto [lo, hi] = std::minmax_element(acc.begin(), acc.end());
  const double min = *lo, range = *hi - *lo;
  std::vector<float> out(hw, 0.0f);
  if (range > 0.0) {
    for (std::size_t i = 0; i < hw; ++i) out[i] = static_cast<float>((acc[i] - min) / range);
  }
  return out;
}

namespace {

std::uint64_t seed_or_env(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("KM_SEED")) return parse_seed("KM_SEED", env);
  return 0;
}

Tensor<float> batch_of_one(const Tensor<float>& image) {
  Shape s = image.shape();
  s.insert(s.begin(), 1);
  return Tensor<float>(s, std::vector<float>(image.values().begin(), image.values().end()));
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(dir + ": cannot create directory (" + ec.message() + ")");
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path + ": cannot open for writing");
  out << text;
  if (!out) throw IoError(path + ": write failed");
}

struct RunSummary {
  double best_val_iou = 0.0;
  double best_val_f1 = 0.0;
  double train_iou = 0.0;
  double train_f1 = 0.0;
};

RunSummary train_once(const RunConfig& cfg, const std::vector<data::Sample>& samples, const std::string& out_dir,
                      std::ostream& out) {
  ensure_dir(out_dir);
  std::vector<data::Sample> train_set = samples, val_set = samples;
  if (cfg.val_ratio > 0.0) {
    data::Split s = data::split(samples, 1.0 - cfg.val_ratio, cfg.train.seed);
    train_set = std::move(s.train);
    val_set = std::move(s.val);
  }
  model::KmUnet<float> m = model::build<float>(cfg.model, cfg.train.seed);
  out << "seed " << cfg.train.seed << ": " << train_set.size() << " train / " << val_set.size() << " val samples, "
      << count_parameters(m.parameters()) << " parameters\n";
  const std::string ckpt = (fs::path(out_dir) / "best.ckpt").string();
  RunSummary summary;
  train::TrainHooks hooks;
  hooks.on_best = [&](const model::KmUnet<float>& best, const train::EpochRecord& r) {
    model::save_checkpoint(best, ckpt);
    summary.best_val_iou = r.val_iou;
    summary.best_val_f1 = r.val_f1;
  };
  hooks.on_epoch = [&](const train::EpochRecord& r) {
    char line[160];
    std::snprintf(line, sizeof(line), "epoch %zu lr %.3e loss %.6f val_iou %.4f val_f1 %.4f\n", r.epoch, r.lr,
                  r.train_loss, r.val_iou, r.val_f1);
    out << line << std::flush;
  };
  const train::TrainResult result = train::train_loop(m, train_set, val_set, cfg.train, hooks);
  write_text((fs::path(out_dir) / "history.csv").string(), train::history_csv(result.history));
  const train::EvalReport final_train = train::evaluate(m, train_set, cfg.train.batch_size);
  summary.train_iou = final_train.mean_iou;
  summary.train_f1 = final_train.mean_f1;
  char line[200];
  std::snprintf(line, sizeof(line), "final train IoU %.6f F1 %.6f; best val IoU %.6f F1 %.6f (epoch %zu)\n",
                summary.train_iou, summary.train_f1, summary.best_val_iou, summary.best_val_f1, result.best_epoch);
  out << line << "checkpoint " << ckpt << "\n";
  return summary;
}

void mean_std(const std::vector<double>& v, double& mean, double& std) {
  mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  std = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides, std::size_t runs,
              std::ostream& out) {
  if (runs == 0) throw ConfigError("--runs must be >= 1");
  const RunConfig cfg = load_run_config(config_path, overrides);
  const std::string resolved = format_key_values(cfg.entries());
  out << "# resolved config\n" << resolved << std::flush;
  ensure_dir(cfg.out_dir);
  write_text((fs::path(cfg.out_dir) / "config.txt").string(), resolved);
  const std::vector<data::Sample> samples = data::read_dataset(cfg.data_dir, cfg.resize);
  std::vector<double> val_iou, val_f1, train_iou, train_f1;
  for (std::size_t r = 0; r < runs; ++r) {
    RunConfig run_cfg = cfg;
    run_cfg.train.seed = cfg.train.seed + r;
    const std::string dir = runs == 1 ? cfg.out_dir : (fs::path(cfg.out_dir) / ("run" + std::to_string(r))).string();
    const RunSummary s = train_once(run_cfg, samples, dir, out);
    val_iou.push_back(s.best_val_iou);
    val_f1.push_back(s.best_val_f1);
    train_iou.push_back(s.train_iou);
    train_f1.push_back(s.train_f1);
  }
  if (runs > 1) {
    double m = 0, sd = 0;
    char line[160];
    mean_std(val_iou, m, sd);
    std::snprintf(line, sizeof(line), "over %zu runs: best val IoU %.6f +- %.6f", runs, m, sd);
    out << line;
    mean_std(val_f1, m, sd);
    std::snprintf(line, sizeof(line), ", F1 %.6f +- %.6f", m, sd);
    out << line;
    mean_std(train_iou, m, sd);
    std::snprintf(line, sizeof(line), "; train IoU %.6f +- %.6f\n", m, sd);
    out << line;
  }
  return kOk;
}

int cmd_eval(const std::string& ckpt, const std::string& dir, std::optional<std::string> size, std::ostream& out) {
  const model::KmUnet<float> m = model::load_checkpoint<float>(ckpt);
  std::optional<data::Size2> resize;
  if (size) resize = data::parse_size(*size);
  const auto samples = data::read_dataset(dir, resize);
  const train::EvalReport rep = train::evaluate(m, samples);
  char line[200];
  for (const auto& s : rep.images) {
    std::snprintf(line, sizeof(line), "%s iou %.6f f1 %.6f\n", s.id.c_str(), s.iou, s.f1);
    out << line;
  }
  std::snprintf(line, sizeof(line), "mean iou %.6f f1 %.6f over %zu images\n", rep.mean_iou, rep.mean_f1,
                rep.images.size());
  out << line;
  return kOk;
}

int cmd_infer(const std::string& ckpt, const std::string& image, const std::string& dest, std::ostream& out) {
  const model::KmUnet<float> m = model::load_checkpoint<float>(ckpt);
  const Tensor<float> x = batch_of_one(data::load_image(image));
  const Tensor<float> logits = model::forward(m, x);
  const Tensor<float> mask = train::threshold_logits(logits);
  data::save_mask(Tensor<float>({1, x.dim(2), x.dim(3)}, std::vector<float>(mask.values().begin(),
                                                                            mask.values().begin() + x.dim(2) * x.dim(3))),
                  dest);
  out << "wrote " << dest << " (" << x.dim(2) << "x" << x.dim(3) << ")\n";
  return kOk;
}

int cmd_explain(const std::string& ckpt, const std::string& image, const std::string& dir, std::ostream& out) {
  const model::KmUnet<float> m = model::load_checkpoint<float>(ckpt);
  const Tensor<float> x = batch_of_one(data::load_image(image));
  model::ForwardTrace<float> trace;
  model::forward(m, x, &trace);
  ensure_dir(dir);
  std::vector<std::pair<std::string, Tensor<float>>> maps;
  for (std::size_t i = 0; i < trace.encoder.size(); ++i) maps.emplace_back("stage" + std::to_string(i + 1), trace.encoder[i]);
  maps.emplace_back("bottleneck", trace.bottleneck);
  for (const auto& [name, t] : maps) {
    const std::string path = (fs::path(dir) / (name + ".pgm")).string();
    data::save_gray(activation_map(t), t.dim(2), t.dim(3), path);
    out << path << " " << t.dim(2) << "x" << t.dim(3) << "\n";
  }
  return kOk;
}

int cmd_gradcheck(const std::string& module, bool corrupt, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto cases = run_gradcheck_suites(module, corrupt);
  bool ok = true;
  std::vector<std::pair<std::string, double>> worst;
  char line[256];
  for (const auto& c : cases) {
    std::snprintf(line, sizeof(line), "%-8s %-22s rel_err %.3e  %s%s%s\n", c.module.c_str(), c.op.c_str(),
                  c.report.max_rel_error, c.report.passed ? "pass" : "FAIL", c.report.passed ? "" : " at ",
                  c.report.passed ? "" : c.report.worst_leaf.c_str());
    out << line;
    ok = ok && c.report.passed;
    if (worst.empty() || worst.back().first != c.module) worst.emplace_back(c.module, 0.0);
    worst.back().second = std::max(worst.back().second, c.report.max_rel_error);
  }
  for (const auto& [mod, err] : worst) {
    std::snprintf(line, sizeof(line), "worst %-8s %.3e\n", mod.c_str(), err);
    out << line;
  }
  std::snprintf(line, sizeof(line), "gradcheck %s (%zu cases, %.1f s)\n", ok ? "passed" : "FAILED", cases.size(),
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  out << line;
  return ok ? kOk : kVerification;
}

int cmd_bench(const std::string& op, const std::string& sizes, std::size_t d, std::size_t n, std::size_t batch,
              std::size_t reps, const std::optional<std::string>& config, const std::string& image_size,
              std::ostream& out) {
  if (op != "selective_scan") throw ConfigError("bench: unknown op '" + op + "' (supported: selective_scan)");
  out << "isa " << kernels::isa_name(kernels::active_isa()) << "\n";
  char line[200];
  for (std::size_t length : parse_count_list("--sizes", sizes)) {
    const double t = bench_selective_scan(length, d, n, batch, reps);
    std::snprintf(line, sizeof(line), "selective_scan L=%zu D=%zu N=%zu B=%zu: %.3f ms, %.3e tokens/s\n", length, d, n,
                  batch, t * 1e3, static_cast<double>(length * batch) / t);
    out << line;
  }
  ModelConfig mc;
  if (config) {
    std::ifstream in(*config);
    if (!in) throw IoError(*config + ": cannot open config");
    std::stringstream text;
    text << in.rdbuf();
    for (const auto& [k, v] : parse_key_values(text.str(), *config)) {
      if (!mc.set(k, v) && k.rfind("train.", 0) != 0 && k.rfind("data.", 0) != 0 && k != "out.dir") {
        throw ConfigError(*config + ": unknown config key '" + k + "'");
      }
    }
    mc.validate();
  }
  const data::Size2 hw = data::parse_size(image_size);
  const model::KmUnet<float> m = model::build<float>(mc, 0);
  std::snprintf(line, sizeof(line), "model parameters: %zu (closed form %zu)\n", count_parameters(m.parameters()),
                model::parameter_count(mc));
  out << line;
  const double macs = static_cast<double>(model::estimate_macs(mc, hw.height, hw.width));
  std::snprintf(line, sizeof(line), "analytic MAC estimate (estimate only) at 1x%zux%zux%zu: %.4e MACs (%.4f GMAC)\n",
                mc.in_channels, hw.height, hw.width, macs, macs * 1e-9);
  out << line;
  return kOk;
}

int cmd_gen_data(const std::string& dir, std::size_t n, const std::string& size, std::optional<std::uint64_t> seed,
                 std::ostream& out) {
  const data::Size2 hw = data::parse_size(size);
  const auto samples = data::gen_synthetic(n, hw.height, hw.width, seed_or_env(seed));
  data::write_dataset(dir, samples);
  out << "wrote " << samples.size() << " samples to " << dir << "\n";
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"kmunet: segmentation network with selective scans and KAN token blocks"};
  app.require_subcommand(1);

  std::string gen_out, gen_size;
  std::size_t gen_n = 0;
  std::optional<std::uint64_t> gen_seed;
  auto* gen = app.add_subcommand("gen-data", "Write a synthetic dataset");
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--n", gen_n, "Number of samples")->required();
  gen->add_option("--size", gen_size, "HxW, both divisible by 32")->required();
  gen->add_option("--seed", gen_seed, "Seed (falls back to KM_SEED, then 0)");

  std::string train_cfg;
  std::size_t runs = 1;
  std::vector<std::string> overrides;
  auto* tr = app.add_subcommand("train", "Train from a key=value config");
  tr->add_option("--config", train_cfg, "Config file")->required();
  tr->add_option("--runs", runs, "Independent runs with seeds seed..seed+N-1");
  tr->add_option("--set", overrides, "key=value override (repeatable)");

  std::string ckpt, data_dir;
  std::optional<std::string> eval_size;
  auto* ev = app.add_subcommand("eval", "Score a checkpoint on a dataset");
  ev->add_option("--ckpt", ckpt, "Checkpoint")->required();
  ev->add_option("--data", data_dir, "Dataset directory")->required();
  ev->add_option("--size", eval_size, "Resize samples to HxW");

  std::string image, dest;
  auto* inf = app.add_subcommand("infer", "Write the predicted mask of one image");
  inf->add_option("--ckpt", ckpt, "Checkpoint")->required();
  inf->add_option("--image", image, "Input P5/P6 image")->required();
  inf->add_option("--out", dest, "Output P5 mask")->required();

  std::string module = "all";
  bool corrupt = false;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient suites (64-bit)");
  gc->add_option("--module", module, "all|numerics|s6|kan|sem|model");
  gc->add_flag("--corrupt-backward", corrupt, "Add a case with a broken backward rule (negative control)");

  auto* ex = app.add_subcommand("explain", "Export per-stage activation maps");
  ex->add_option("--ckpt", ckpt, "Checkpoint")->required();
  ex->add_option("--image", image, "Input P5/P6 image")->required();
  ex->add_option("--out", dest, "Output directory")->required();

  std::string bench_op = "selective_scan", bench_sizes = "1024,2048,4096", bench_image = "256x256";
  std::size_t bench_d = 16, bench_n = 16, bench_batch = 1, bench_reps = 5;
  std::optional<std::string> bench_cfg;
  auto* bn = app.add_subcommand("bench", "Time kernels and report model size estimates");
  bn->add_option("--op", bench_op, "Operation (selective_scan)");
  bn->add_option("--sizes", bench_sizes, "Comma-separated sequence lengths");
  bn->add_option("--d", bench_d, "Channels");
  bn->add_option("--n", bench_n, "State size");
  bn->add_option("--batch", bench_batch, "Batch size");
  bn->add_option("--reps", bench_reps, "Repetitions (median reported)");
  bn->add_option("--config", bench_cfg, "Model config for the parameter and MAC report");
  bn->add_option("--image-size", bench_image, "HxW for the MAC estimate");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (*gen) return cmd_gen_data(gen_out, gen_n, gen_size, gen_seed, out);
    if (*tr) return cmd_train(train_cfg, overrides, runs, out);
    if (*ev) return cmd_eval(ckpt, data_dir, eval_size, out);
    if (*inf) return cmd_infer(ckpt, image, dest, out);
    if (*gc) return cmd_gradcheck(module, corrupt, out);
    if (*ex) return cmd_explain(ckpt, image, dest, out);
    if (*bn) return cmd_bench(bench_op, bench_sizes, bench_d, bench_n, bench_batch, bench_reps, bench_cfg, bench_image, out);
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIo;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << "\n";
    return kVerification;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  }
  return kValidation;
}

}  // namespace kmunet::cli
