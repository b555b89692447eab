// segvit: data generation, training, evaluation, inference, FLOPs and
// gradient checks for the SegViT toy artifact.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "segvit/checkpoint.hpp"
#include "segvit/config.hpp"
#include "segvit/dataset.hpp"
#include "segvit/errors.hpp"
#include "segvit/evaluation.hpp"
#include "segvit/flops.hpp"
#include "segvit/model_check.hpp"
#include "segvit/trainer.hpp"

namespace fs = std::filesystem;
using namespace segvit;

namespace {

enum class Verbosity { kQuiet, kInfo, kDebug };

Verbosity verbosity() {
  const char* env = std::getenv("SEGVIT_LOG");
  if (!env) return Verbosity::kInfo;
  const std::string v = env;
  if (v == "quiet" || v == "0") return Verbosity::kQuiet;
  if (v == "debug" || v == "2") return Verbosity::kDebug;
  return Verbosity::kInfo;
}

void info(const std::string& msg) {
  if (verbosity() != Verbosity::kQuiet) std::cerr << "[segvit] " << msg << '\n';
}

void debug(const std::string& msg) {
  if (verbosity() == Verbosity::kDebug) std::cerr << "[segvit:debug] " << msg << '\n';
}

struct ConfigArgs {
  std::string path;
  std::vector<std::string> overrides;

  void attach(CLI::App* app, bool required) {
    auto* opt = app->add_option("-c,--config", path, "config file (dotted key = value lines)");
    if (required) opt->required();
    app->add_option("-s,--set", overrides, "override, key=value (repeatable)");
  }

  SegVitConfig load() const {
    SegVitConfig cfg = path.empty() ? SegVitConfig{} : SegVitConfig::load(path);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("override '" + kv + "' is not key=value");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    cfg.validate();
    return cfg;
  }
};

std::vector<fs::path> files_with_extension(const fs::path& dir, const std::string& ext) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ext) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::pair<int64_t, int64_t> parse_crop(const std::string& crop) {
  const auto x = crop.find('x');
  try {
    if (x == std::string::npos) {
      const int64_t s = std::stoll(crop);
      return {s, s};
    }
    return {std::stoll(crop.substr(0, x)), std::stoll(crop.substr(x + 1))};
  } catch (const std::exception&) {
    throw ConfigError("crop '" + crop + "' is not HxW");
  }
}

int cmd_gen_data(const ConfigArgs& ca, const std::string& out) {
  const SegVitConfig cfg = ca.load();
  generate_dataset(out, cfg);
  info("wrote " + std::to_string(cfg.data.train_count) + " train and " +
       std::to_string(cfg.data.eval_count) + " eval samples to " + out);
  return 0;
}

struct TrainArgs {
  std::string data, out, log, resume;
  int64_t until = -1;
  bool eval_after = false;
};

int cmd_train(const ConfigArgs& ca, const TrainArgs& ta) {
  const SegVitConfig cfg = ca.load();
  const auto train_set = load_split(ta.data, "train");
  info("loaded " + std::to_string(train_set.size()) + " training samples");
  std::optional<Trainer> trainer;
  if (ta.resume.empty()) {
    trainer.emplace(cfg);
  } else {
    trainer.emplace(cfg, read_checkpoint(ta.resume));
    info("resumed at iteration " + std::to_string(trainer->iteration()));
  }
  std::ofstream log_file;
  if (!ta.log.empty()) {
    log_file.open(ta.log, trainer->iteration() > 0 ? std::ios::app : std::ios::trunc);
    if (!log_file) throw IoError("cannot write log " + ta.log);
  }
  std::ostream& log = ta.log.empty() ? std::cout : static_cast<std::ostream&>(log_file);
  const auto t0 = std::chrono::steady_clock::now();
  trainer->run(train_set, log, ta.until);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  debug("training took " + std::to_string(secs) + " s");
  write_checkpoint(ta.out, trainer->checkpoint());
  info("checkpoint at iteration " + std::to_string(trainer->iteration()) + " written to " + ta.out);
  if (ta.eval_after) {
    const auto eval_set = load_split(ta.data, "eval");
    const auto r = evaluate(trainer->model(), eval_set);
    std::printf("eval_miou=%.9g\n", r.mean);
  }
  return 0;
}

struct EvalArgs {
  std::string pred, gt, checkpoint, data, split = "eval";
  int64_t limit = -1;
};

int cmd_eval(const ConfigArgs& ca, const EvalArgs& ea) {
  MiouResult result;
  if (!ea.pred.empty() || !ea.gt.empty()) {
    if (ea.pred.empty() || ea.gt.empty()) throw ConfigError("--pred and --gt go together");
    const SegVitConfig cfg = ca.load();
    std::vector<LabelMap> preds, gts;
    for (const auto& g : files_with_extension(ea.gt, ".pgm")) {
      const fs::path p = fs::path(ea.pred) / g.filename();
      if (!fs::exists(p)) throw IoError("missing prediction " + p.string());
      gts.push_back(read_pgm(g));
      preds.push_back(read_pgm(p));
      if (preds.back().height != gts.back().height || preds.back().width != gts.back().width) {
        throw DataError(p.string() + ": size differs from ground truth");
      }
    }
    result = miou(preds, gts, cfg.data.classes);
  } else {
    if (ea.checkpoint.empty() || ea.data.empty()) {
      throw ConfigError("eval needs --pred/--gt or --checkpoint/--data");
    }
    const auto model = load_model(read_checkpoint(ea.checkpoint));
    result = evaluate(model, load_split(ea.data, ea.split), ea.limit);
  }
  std::cout << format_miou_report(result);
  std::printf("miou=%.9g\n", result.mean);
  return 0;
}

struct InferArgs {
  std::string checkpoint, image, out, data, out_dir, split = "eval";
};

int cmd_infer(const InferArgs& ia) {
  const auto model = load_model(read_checkpoint(ia.checkpoint));
  if (!ia.image.empty()) {
    if (ia.out.empty()) throw ConfigError("--image needs --out");
    write_pgm(ia.out, infer(model, image_tensor<float>(read_ppm(ia.image))));
    return 0;
  }
  if (ia.data.empty() || ia.out_dir.empty()) throw ConfigError("infer needs --image/--out or --data/--out-dir");
  fs::create_directories(ia.out_dir);
  for (const auto& p : files_with_extension(fs::path(ia.data) / ia.split, ".ppm")) {
    auto name = p.filename();
    name.replace_extension(".pgm");
    write_pgm(fs::path(ia.out_dir) / name, infer(model, image_tensor<float>(read_ppm(p))));
  }
  return 0;
}

struct FlopsArgs {
  std::string crop, compare;
  bool kv = false;
};

int cmd_flops(const ConfigArgs& ca, const FlopsArgs& fa) {
  const SegVitConfig cfg = ca.load();
  auto [h, w] = fa.crop.empty() ? std::pair{cfg.model.encoder.image_height, cfg.model.encoder.image_width}
                                : parse_crop(fa.crop);
  const CostBreakdown cost = estimate(cfg.model, h, w);
  std::cout << format_breakdown(cost, fa.kv);
  if (!fa.compare.empty()) {
    const SegVitConfig other = SegVitConfig::load(fa.compare);
    const CostComparison cmp = compare(cfg.model, other.model, h, w);
    std::printf("\ncompare: %s vs %s\n", ca.path.c_str(), fa.compare.c_str());
    for (const auto& [name, delta] : cmp.deltas) {
      std::printf("delta.%s=%lld\n", name.c_str(), static_cast<long long>(delta));
    }
    std::printf("ratio=%.6f\n", cmp.ratio);
  }
  return 0;
}

struct GradArgs {
  std::string mode = "all";
  int64_t samples = 4;
  double tol = 1e-4;
  double step = 1e-5;
};

int cmd_gradcheck(const ConfigArgs& ca, const GradArgs& ga) {
  const SegVitConfig base = ca.load();
  std::vector<std::string> modes;
  if (ga.mode == "all") {
    modes = {"off", "naive", "full"};
  } else {
    parse_shrunk_mode(ga.mode);
    modes = {ga.mode};
  }
  GradCheckOptions opts;
  opts.samples_per_tensor = ga.samples;
  opts.step = ga.step;
  double worst = 0.0;
  for (const auto& m : modes) {
    SegVitConfig cfg = base;
    cfg.set("shrunk.mode", m);
    const auto t0 = std::chrono::steady_clock::now();
    const GradCheckResult r = check_model_gradients(cfg, opts);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("mode=%s probes=%lld max_rel_error=%.3e worst=%s[%lld] analytic=%.9e numeric=%.9e seconds=%.2f\n",
                m.c_str(), static_cast<long long>(r.probes), r.max_rel_error, r.worst_param.c_str(),
                static_cast<long long>(r.worst_index), r.worst_analytic, r.worst_numeric, secs);
    worst = std::max(worst, r.max_rel_error);
  }
  const bool ok = worst < ga.tol;
  std::printf("gradcheck %s max_rel_error=%.3e tolerance=%.1e\n", ok ? "ok" : "failed", worst, ga.tol);
  if (!ok) {
    std::printf("error kind=numeric message=\"max relative error %.3e exceeds %.1e\"\n", worst, ga.tol);
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SegViT toy artifact: plain ViT encoder, ATM cascade decoder, Shrunk variant"};
  app.require_subcommand(1);

  ConfigArgs gen_cfg, train_cfg, eval_cfg, flops_cfg, grad_cfg;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen-data", "render the synthetic shapes dataset");
  gen_cfg.attach(gen, true);
  gen->add_option("-o,--out", gen_out, "output directory")->required();

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "train from scratch or resume, then write a checkpoint");
  train_cfg.attach(train, true);
  train->add_option("-d,--data", ta.data, "dataset directory")->required();
  train->add_option("-o,--out", ta.out, "checkpoint path")->required();
  train->add_option("--log", ta.log, "metric log file (default stdout)");
  train->add_option("--resume", ta.resume, "checkpoint to continue from");
  train->add_option("--until", ta.until, "stop after this many iterations in total");
  train->add_flag("--eval", ta.eval_after, "report eval-split mIoU when done");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "mIoU of prediction maps or of a checkpoint");
  eval_cfg.attach(eval, false);
  eval->add_option("--pred", ea.pred, "directory of predicted .pgm maps");
  eval->add_option("--gt", ea.gt, "directory of ground-truth .pgm maps");
  eval->add_option("--checkpoint", ea.checkpoint, "checkpoint to evaluate");
  eval->add_option("-d,--data", ea.data, "dataset directory");
  eval->add_option("--split", ea.split, "dataset split")->check(CLI::IsMember({"train", "eval"}));
  eval->add_option("--limit", ea.limit, "evaluate at most this many images");

  InferArgs ia;
  auto* inf = app.add_subcommand("infer", "predict label maps");
  inf->add_option("--checkpoint", ia.checkpoint, "checkpoint")->required();
  inf->add_option("--image", ia.image, "input .ppm");
  inf->add_option("-o,--out", ia.out, "output .pgm");
  inf->add_option("-d,--data", ia.data, "dataset directory");
  inf->add_option("--out-dir", ia.out_dir, "output directory for a whole split");
  inf->add_option("--split", ia.split, "dataset split")->check(CLI::IsMember({"train", "eval"}));

  FlopsArgs fa;
  auto* flops = app.add_subcommand("flops", "analytic multiply-accumulate count");
  flops_cfg.attach(flops, true);
  flops->add_option("--crop", fa.crop, "input size, HxW or a single side");
  flops->add_flag("--kv", fa.kv, "append key=value lines per component");
  flops->add_option("--compare", fa.compare, "second config; prints deltas and the cost ratio");

  GradArgs ga;
  auto* grad = app.add_subcommand("gradcheck", "tape gradients vs central differences in 64-bit");
  grad_cfg.attach(grad, true);
  grad->add_option("--mode", ga.mode, "off, naive, full or all")
      ->check(CLI::IsMember({"off", "plain", "naive", "full", "all"}));
  grad->add_option("--samples", ga.samples, "entries probed per tensor, 0 for all");
  grad->add_option("--tol", ga.tol, "maximum relative error");
  grad->add_option("--step", ga.step, "finite-difference step");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*gen) return cmd_gen_data(gen_cfg, gen_out);
    if (*train) return cmd_train(train_cfg, ta);
    if (*eval) return cmd_eval(eval_cfg, ea);
    if (*inf) return cmd_infer(ia);
    if (*flops) return cmd_flops(flops_cfg, fa);
    if (*grad) {
      if (ga.mode == "plain") ga.mode = "off";
      return cmd_gradcheck(grad_cfg, ga);
    }
  } catch (const Error& e) {
    std::printf("error kind=%s message=\"%s\"\n", e.kind().c_str(), e.what());
    return 1;
  } catch (const std::exception& e) {
    std::printf("error kind=internal message=\"%s\"\n", e.what());
    return 1;
  }
  return 2;
}
