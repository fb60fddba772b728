// Copyright (c) 2026 The csdn authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "csdn/config.hpp"
#include "csdn/data.hpp"
#include "csdn/eval.hpp"
#include "csdn/io.hpp"
#include "csdn/text.hpp"
#include "csdn/train.hpp"
#include "csdn/verify.hpp"

namespace fs = std::filesystem;
using namespace csdn;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

// Invalid user input; maps to exit code 1.
struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// 5e-05 -> 5e-5
std::string short_number(double v) {
  std::string s = format_number(v);
  const auto e = s.find('e');
  if (e == std::string::npos) return s;
  std::string mant = s.substr(0, e), exp = s.substr(e + 1);
  std::string sign;
  if (!exp.empty() && (exp[0] == '-' || exp[0] == '+')) {
    if (exp[0] == '-') sign = "-";
    exp.erase(0, 1);
  }
  exp.erase(0, std::min(exp.find_first_not_of('0'), exp.size() - 1));
  return mant + "e" + sign + exp;
}

std::vector<Category> parse_categories(const std::string& list) {
  std::vector<Category> out;
  for (const auto& part : split(list, ',')) {
    const std::string name(trim(part));
    if (name.empty()) throw UsageError("empty entry in category list '" + list + "'");
    out.push_back(parse_category(name));
  }
  if (out.empty()) throw UsageError("category list is empty");
  return out;
}

// ----------------------------------------------------------------- gen-data

struct GenDataArgs {
  fs::path out;
  std::string categories = "table,chair,lamp,car";
  std::size_t per_category = 8;
  std::size_t test_per_category = 0;
  std::uint64_t seed = 0;
  std::string preset = "full";
  std::size_t views = kViewCount;
  bool force = false;
};

int cmd_gen_data(const GenDataArgs& a) {
  const RunConfig preset = preset_config(parse_preset(a.preset));
  DataConfig cfg;
  cfg.categories = parse_categories(a.categories);
  cfg.per_category = a.per_category;
  cfg.test_per_category = a.test_per_category;
  cfg.seed = a.seed;
  cfg.gt_points = preset.model.gt_points;
  cfg.partial_points = preset.model.input_points;
  cfg.image_size = preset.model.image_size;
  cfg.views = a.views;
  cfg.validate();

  if (fs::exists(a.out)) {
    if (!fs::is_directory(a.out)) throw UsageError(a.out.string() + " exists and is not a directory");
    if (!fs::is_empty(a.out)) {
      if (!a.force) throw UsageError(a.out.string() + " is not empty (pass --force to regenerate)");
      for (const char* entry : {"manifest.txt", "train", "test"}) fs::remove_all(a.out / entry);
    }
  }
  const auto objects = generate_dataset(cfg);
  write_dataset(a.out, objects, cfg);

  std::cout << "wrote " << objects.size() << " objects to " << a.out.string() << "\n";
  for (Category c : cfg.categories) {
    std::size_t train = 0, test = 0, views = 0;
    for (const auto& o : objects) {
      if (o.category != to_string(c)) continue;
      (o.split == "train" ? train : test) += 1;
      views += o.views.size();
    }
    std::printf("  %-8s train=%zu test=%zu views=%zu\n", std::string(to_string(c)).c_str(), train, test, views);
  }
  return kExitOk;
}

// -------------------------------------------------------------------- train

struct TrainArgs {
  fs::path data, out, config, resume;
  std::string preset;
  std::vector<std::string> overrides;
  std::string variant;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs, max_iters, threads;
  bool deterministic = false;
  bool quiet = false;
};

void apply_overrides(RunConfig& cfg, const std::vector<std::string>& overrides) {
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
    apply_override(cfg, std::string(trim(kv.substr(0, eq))), std::string(trim(kv.substr(eq + 1))));
  }
}

RunConfig resolve_config(const TrainArgs& a, const std::optional<RunConfig>& base) {
  RunConfig cfg = base ? *base : preset_config(a.preset.empty() ? Preset::kFull : parse_preset(a.preset));
  if (!a.config.empty()) {
    if (!a.preset.empty()) throw UsageError("--preset and --config are exclusive; set 'preset' in the file");
    const std::string src = a.config.string();
    cfg = from_text(KeyValueText::parse(read_file(a.config), src), src);
  } else if (base && !a.preset.empty()) {
    throw UsageError("--preset cannot change the preset of a resumed run");
  }
  apply_overrides(cfg, a.overrides);
  if (!a.variant.empty()) cfg.model.variant = parse_variant(a.variant);
  if (a.seed) cfg.train.seed = *a.seed;
  if (a.epochs) cfg.train.epochs = *a.epochs;
  if (a.max_iters) cfg.train.max_iters = *a.max_iters;
  if (a.threads) cfg.train.threads = *a.threads;
  if (a.deterministic) cfg.train.deterministic = true;
  cfg.model.validate();
  cfg.train.validate();
  return cfg;
}

template <typename T>
void run_training(const RunConfig& cfg, std::vector<ObjectRecord> objects, const TrainArgs& a) {
  TrainOptions opts;
  opts.out_dir = a.out;
  if (!a.quiet) {
    opts.on_epoch = [](const EpochMetrics& m) {
      std::printf("epoch %zu iter %zu alpha %.4g lr %.3g cd_coarse %.6g cd_out %.6g fscore %.4f\n", m.epoch,
                  m.iter, m.alpha, m.lr, m.cd_coarse, m.cd_out, m.fscore);
      std::fflush(stdout);
    };
  }
  if (a.resume.empty()) {
    Trainer<T> trainer(cfg, std::move(objects), opts);
    trainer.run();
  } else {
    Trainer<T> trainer(cfg, std::move(objects), load_checkpoint<T>(a.resume), opts);
    trainer.run();
  }
}

int cmd_train(const TrainArgs& a) {
  std::optional<RunConfig> base;
  if (!a.resume.empty()) base = checkpoint_config(a.resume);
  const RunConfig cfg = resolve_config(a, base);
  std::cout << repro_header(cfg) << "\n"
            << "lr=" << short_number(cfg.train.learning_rate) << " epochs=" << cfg.train.epochs
            << " k=" << cfg.model.k_neighbors << " C=" << cfg.model.feature_dim
            << " batch=" << cfg.train.batch_size << " variant=" << to_string(cfg.model.variant)
            << " precision=" << cfg.train.precision << " workers=" << worker_count(cfg.train) << "\n";
  auto objects = read_dataset(a.data, std::string("train"));
  if (objects.empty()) throw UsageError("dataset " + a.data.string() + " has no train split");
  check_scale(cfg.model, objects);
  fs::create_directories(a.out);
  write_file(a.out / "config.txt", repro_header(cfg) + "\n" + to_text(cfg).str());
  if (cfg.train.precision == 64) {
    run_training<double>(cfg, std::move(objects), a);
  } else {
    run_training<float>(cfg, std::move(objects), a);
  }
  std::cout << "wrote " << (a.out / "final.ckpt").string() << "\n";
  return kExitOk;
}

// --------------------------------------------------------------------- eval

struct EvalArgs {
  fs::path checkpoint, data, out;
  std::string split = "test";
  std::string chamfer;
  std::optional<double> tau;
  std::optional<std::size_t> view;
  bool per_view_std = false;
  bool oracle = false;
};

template <typename T>
Predictor model_predictor(std::shared_ptr<const CsdnModel<T>> model) {
  return [model](const ObjectRecord&, const View& v) {
    return complete(*model, v.partial, v.image, v.camera).out;
  };
}

int cmd_eval(const EvalArgs& a) {
  if (a.oracle == !a.checkpoint.empty()) throw UsageError("eval needs exactly one of --checkpoint or --oracle");
  std::optional<std::string> split;
  if (a.split != "all") split = a.split;
  const auto objects = read_dataset(a.data, split);
  if (objects.empty()) throw UsageError("dataset " + a.data.string() + " has no '" + a.split + "' records");

  EvalOptions opts;
  opts.per_view_std = a.per_view_std;
  opts.only_view = a.view;
  std::string header;
  Predictor predict;
  if (a.oracle) {
    header = "# csdn " CSDN_VERSION " oracle";
    predict = [](const ObjectRecord& o, const View&) { return o.gt; };
  } else {
    const RunConfig cfg = checkpoint_config(a.checkpoint);
    check_scale(cfg.model, objects);
    header = repro_header(cfg);
    opts.variant = cfg.train.report_chamfer;
    opts.tau = cfg.train.fscore_tau;
    if (cfg.train.precision == 64) {
      auto ck = load_checkpoint<double>(a.checkpoint);
      predict = model_predictor(std::make_shared<const CsdnModel<double>>(ck.config.model, std::move(ck.params)));
    } else {
      auto ck = load_checkpoint<float>(a.checkpoint);
      predict = model_predictor(std::make_shared<const CsdnModel<float>>(ck.config.model, std::move(ck.params)));
    }
  }
  if (!a.chamfer.empty()) opts.variant = parse_chamfer_variant(a.chamfer);
  if (a.tau) opts.tau = *a.tau;
  if (!(opts.tau > 0)) throw UsageError("--tau must be positive");
  header += " split=" + a.split + " chamfer=" + std::string(to_string(opts.variant)) +
            " tau=" + format_number(opts.tau);

  const EvalReport report = evaluate(objects, predict, opts);
  std::cout << header << "\n" << summary_table(report);
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    write_file(a.out / "summary.csv", summary_csv(report, header));
    write_file(a.out / "samples.csv", samples_csv(report, header));
    if (a.per_view_std) write_file(a.out / "view_std.csv", view_std_csv(report, header));
    std::cout << "wrote reports to " << a.out.string() << "\n";
  }
  return kExitOk;
}

// ----------------------------------------------------------------- complete

struct CompleteArgs {
  fs::path checkpoint, partial, image, camera, out, emit_coarse;
};

template <typename T>
int run_complete(const CompleteArgs& a, const RunConfig& cfg) {
  const PointCloud partial = read_xyz(a.partial);
  const Image image = read_image(a.image);
  const Camera camera = read_camera(a.camera);
  if (partial.size() != cfg.model.input_points) {
    throw UsageError("scale mismatch: input_points: config " + std::to_string(cfg.model.input_points) +
                     ", " + a.partial.string() + " has " + std::to_string(partial.size()));
  }
  if (image.width != cfg.model.image_size || image.height != cfg.model.image_size) {
    throw UsageError("scale mismatch: image_size: config " + std::to_string(cfg.model.image_size) + ", " +
                     a.image.string() + " is " + std::to_string(image.width) + "x" +
                     std::to_string(image.height));
  }
  auto ck = load_checkpoint<T>(a.checkpoint);
  const CsdnModel<T> model(ck.config.model, std::move(ck.params));
  const auto result = complete(model, partial, image, camera);
  const std::string header = repro_header(cfg);
  write_xyz(a.out, result.out, header + " cloud=out");
  std::cout << "wrote " << result.out.size() << " points to " << a.out.string() << "\n";
  if (!a.emit_coarse.empty()) {
    write_xyz(a.emit_coarse, result.coarse, header + " cloud=coarse");
    std::cout << "wrote " << result.coarse.size() << " points to " << a.emit_coarse.string() << "\n";
  }
  return kExitOk;
}

int cmd_complete(const CompleteArgs& a) {
  const RunConfig cfg = checkpoint_config(a.checkpoint);
  return cfg.train.precision == 64 ? run_complete<double>(a, cfg) : run_complete<float>(a, cfg);
}

// ------------------------------------------------------------------- verify

struct VerifyArgs {
  std::uint64_t seed = 1;
  std::string perturb_vjp;
  std::string suite = "all";
};

int cmd_verify(const VerifyArgs& a) {
  verify::Options opts;
  opts.seed = a.seed;
  opts.perturb_vjp = a.perturb_vjp;
  opts.on_result = [](const verify::CheckResult& r) {
    std::cout << verify::format_matrix({r});
    std::cout.flush();
  };
  std::vector<verify::CheckResult> results;
  if (a.suite == "all") {
    results = verify::run_all(opts);
  } else if (a.suite == "gradient") {
    results = verify::gradient_suite(opts);
  } else if (a.suite == "oracle") {
    results = verify::oracle_suite(opts);
  } else if (a.suite == "ipadain") {
    results = verify::ipadain_suite(opts);
  } else if (a.suite == "invariant") {
    results = verify::invariant_suite(opts);
  } else {
    throw UsageError("unknown suite '" + a.suite + "'");
  }
  double seconds = 0;
  std::size_t failed = 0;
  for (const auto& r : results) {
    seconds += r.seconds;
    failed += r.pass ? 0 : 1;
  }
  std::printf("%zu checks, %zu failed, %.1fs\n", results.size(), failed, seconds);
  for (const auto& r : results) {
    if (!r.pass) std::printf("FAILED %s/%s: %s\n", r.suite.c_str(), r.name.c_str(), r.detail.c_str());
  }
  return failed ? kExitRuntime : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"csdn: cross-modal point cloud completion"};
  app.set_version_flag("--version", std::string(CSDN_VERSION));
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* g = app.add_subcommand("gen-data", "Generate a synthetic multi-view dataset");
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_option("--categories", gen.categories, "Comma-separated categories (table,chair,lamp,car)");
  g->add_option("--per-category", gen.per_category, "Train objects per category");
  g->add_option("--test-per-category", gen.test_per_category, "Held-out objects per category");
  g->add_option("--seed", gen.seed, "Generator seed");
  g->add_option("--preset", gen.preset, "Point and image sizes: full|desk|micro");
  g->add_option("--views", gen.views, "Views per object")->check(CLI::Range(1, static_cast<int>(kViewCount)));
  g->add_flag("--force", gen.force, "Replace an existing dataset in --out");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a model");
  t->add_option("--data", tr.data, "Dataset root")->required();
  t->add_option("--out", tr.out, "Run directory for checkpoints and metrics")->required();
  t->add_option("--preset", tr.preset, "full|desk|micro");
  t->add_option("--config", tr.config, "Config file ([model] and [train] sections)");
  t->add_option("--set", tr.overrides, "Override, e.g. train.learning_rate=1e-4 (repeatable)");
  t->add_option("--variant", tr.variant,
                "full|no-ipadain|swap-features|no-local|no-global|serial|no-image|coarse-only");
  t->add_option("--seed", tr.seed, "Training seed");
  t->add_option("--epochs", tr.epochs, "Epoch count");
  t->add_option("--max-iters", tr.max_iters, "Stop after this many optimizer steps (0: no cap)");
  t->add_option("--threads", tr.threads, "Worker threads (0: all cores; capped by CSDN_THREADS)");
  t->add_option("--resume", tr.resume, "Continue from a checkpoint");
  t->add_flag("--deterministic", tr.deterministic, "Single-threaded, bitwise reproducible");
  t->add_flag("--quiet", tr.quiet, "Do not print per-epoch metrics");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
  e->add_option("--checkpoint", ev.checkpoint, "Checkpoint file");
  e->add_option("--data", ev.data, "Dataset root")->required();
  e->add_option("--split", ev.split, "train|test|all");
  e->add_option("--out", ev.out, "Directory for report CSVs");
  e->add_option("--chamfer", ev.chamfer, "l2|squared_l2 (default: from config)");
  e->add_option("--tau", ev.tau, "F-score distance threshold (default: from config)");
  e->add_option("--view", ev.view, "Evaluate only this view id");
  e->add_flag("--per-view-std", ev.per_view_std, "Per-object CD standard deviation across views");
  e->add_flag("--oracle", ev.oracle, "Predict the ground truth (metric sanity check)");

  CompleteArgs co;
  auto* c = app.add_subcommand("complete", "Complete one partial cloud");
  c->add_option("--checkpoint", co.checkpoint, "Checkpoint file")->required();
  c->add_option("--partial", co.partial, "Partial cloud (.xyz)")->required();
  c->add_option("--image", co.image, "View image (binary PPM)")->required();
  c->add_option("--camera", co.camera, "Camera file")->required();
  c->add_option("--out", co.out, "Output cloud (.xyz)")->required();
  c->add_option("--emit-coarse", co.emit_coarse, "Also write the coarse cloud here");

  VerifyArgs ve;
  auto* v = app.add_subcommand("verify", "Run gradient, oracle and invariant checks");
  v->add_option("--seed", ve.seed, "Seed for random instances");
  v->add_option("--suite", ve.suite, "all|gradient|oracle|ipadain|invariant");
  v->add_option("--perturb-vjp", ve.perturb_vjp, "Test hook: scale one primitive's VJP by 1.01");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*g) return cmd_gen_data(gen);
    if (*t) return cmd_train(tr);
    if (*e) return cmd_eval(ev);
    if (*c) return cmd_complete(co);
    if (*v) return cmd_verify(ve);
  } catch (const NumericError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitRuntime;
  } catch (const ParseError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitValidation;
  } catch (const DataError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitValidation;
  } catch (const std::invalid_argument& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitRuntime;
  }
  return kExitValidation;
}
