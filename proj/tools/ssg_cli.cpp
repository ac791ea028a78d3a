#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ssg/pipeline.hpp"

namespace {

enum Exit { kOk = 0, kValidation = 1, kTraining = 2, kCriterion = 3 };

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> config;
  std::optional<std::size_t> threads;
  std::vector<std::string> sets;
  std::vector<std::pair<std::string, std::string>> flags;  // filled by subcommands
};

ssg::RunConfig build_config(const Overrides& o) {
  ssg::RunConfig cfg = o.config ? ssg::load_config(*o.config) : ssg::RunConfig{};
  for (const auto& [k, v] : o.flags) cfg.set(k, v);
  for (const std::string& kv : o.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ssg::ValidationError("[cli] --set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (o.seed) cfg.set("seed", std::to_string(*o.seed));
  if (o.out) cfg.out = *o.out;
  if (o.threads) cfg.threads = *o.threads;
  return cfg;
}

// Adds a string option that, when given, becomes a config assignment.
void config_option(CLI::App* cmd, Overrides& o, const std::string& flag, const std::string& key,
                   const std::string& help) {
  cmd->add_option_function<std::string>(
      flag, [&o, key](const std::string& v) { o.flags.emplace_back(key, v); }, help);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Set-valued prediction by sequential generation with a calibrated memory penalty"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(ssg::version()));

  Overrides o;
  app.add_option("--seed", o.seed, "Run seed")->group("Global");
  app.add_option("--out", o.out, "Output directory")->group("Global");
  app.add_option("--config", o.config, "Flat key = value config file")
      ->check(CLI::ExistingFile)
      ->group("Global");
  app.add_option("--threads", o.threads, "Worker threads for decoding")->group("Global");
  app.add_option("--set", o.sets, "Override any config key (key=value), repeatable")->group("Global");
  app.fallthrough();

  auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset");
  config_option(gen, o, "--task", "task", "threshold | task1 | task2");
  config_option(gen, o, "--n", "n", "Number of samples");
  config_option(gen, o, "--task1-min-len", "task1_min_len", "Shortest Task-1 input");
  config_option(gen, o, "--task1-max-len", "task1_max_len", "Longest Task-1 input");

  std::string import_source;
  std::optional<std::size_t> import_features, import_labels;
  auto* imp = app.add_subcommand("import", "Convert a sparse multi-label file to the dataset format");
  imp->add_option("source", import_source, "Sparse multi-label text file")
      ->required()
      ->check(CLI::ExistingFile);
  imp->add_option("--features", import_features, "Feature dimension (overrides the header)");
  imp->add_option("--labels", import_labels, "Label universe size (overrides the header)");

  auto add_run_options = [&](CLI::App* cmd) {
    config_option(cmd, o, "--task", "task", "threshold | task1 | task2 | multilabel-file");
    config_option(cmd, o, "--data", "data", "Dataset JSONL (generated when omitted)");
    config_option(cmd, o, "--n", "n", "Number of generated samples");
    config_option(cmd, o, "--family", "family", "ssg | baseline");
    config_option(cmd, o, "--penalty", "penalty",
                  "scalar | per-position | learned-recurrent | learned-windowed");
    config_option(cmd, o, "--rho", "rho", "Stopping tolerance in [0,1)");
    config_option(cmd, o, "--split", "split", "Training fraction");
    config_option(cmd, o, "--metric", "metric", "auto | mF1 | mED");
    config_option(cmd, o, "--epochs", "epochs", "Base-model epochs");
    config_option(cmd, o, "--lambda-epochs", "lambda_epochs", "Lambda-net epochs");
  };

  auto* train = app.add_subcommand("train", "Train a base model and calibrate its penalty");
  add_run_options(train);

  std::string checkpoints;
  bool override_hash = false;
  auto* eval = app.add_subcommand("eval", "Decode the test split and score it");
  add_run_options(eval);
  eval->add_option("--checkpoints", checkpoints, "Directory written by train")->required();
  eval->add_flag("--override-hash", override_hash, "Accept checkpoints trained under another config");

  std::string experiment;
  auto* repro = app.add_subcommand("reproduce", "Run every method on one experiment and compare");
  repro->add_option("experiment", experiment, "task1 | task2 | multilabel-file")->required();
  config_option(repro, o, "--data", "data", "Dataset JSONL (required for multilabel-file)");
  config_option(repro, o, "--n", "n", "Number of generated samples");
  config_option(repro, o, "--epochs", "epochs", "Base-model epochs");
  config_option(repro, o, "--lambda-epochs", "lambda_epochs", "Lambda-net epochs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kValidation;
  }

  try {
    const ssg::RunConfig cfg = build_config(o);
    if (*gen) {
      ssg::cmd_gen(cfg);
      std::cout << "wrote " << cfg.out << "/data.jsonl\n";
    } else if (*imp) {
      ssg::cmd_import(cfg, import_source, import_features, import_labels);
      std::cout << "wrote " << cfg.out << "/data.jsonl\n";
    } else if (*train) {
      const auto report = ssg::cmd_train(cfg);
      std::cout << "config " << report["config_hash"].get<std::string>() << "\n";
      if (report.contains("lambda")) std::cout << "lambda " << report["lambda"]["lambdas"].dump() << "\n";
      if (report.contains("lambda_net")) {
        std::cout << "lambda-net validation token accuracy "
                  << report["lambda_net"]["validation_token_accuracy"].get<double>() << "\n";
      }
    } else if (*eval) {
      const ssg::EvalReport r = ssg::cmd_eval(cfg, checkpoints, override_hash);
      std::cout << ssg::to_string(r.metric) << " " << r.aggregate << " over " << r.samples
                << " samples (exact " << r.exact_match_rate << ", truncated " << r.truncations << ")\n";
    } else if (*repro) {
      ssg::RunConfig rc = cfg;
      const ssg::TaskTag tag = ssg::task_tag_from_string(experiment);
      if (tag == ssg::TaskTag::multilabel_file && rc.data.empty()) {
        throw ssg::ValidationError("[cli] reproduce multilabel-file needs --data");
      }
      if (tag == ssg::TaskTag::threshold) {
        throw ssg::ValidationError("[cli] reproduce covers task1, task2 and multilabel-file");
      }
      const ssg::ReproduceResult r = ssg::cmd_reproduce(tag, rc, std::cout);
      return r.passed() ? kOk : kCriterion;
    }
  } catch (const ssg::TrainingError& e) {
    std::cerr << "training failed: " << e.what() << "\n";
    return kTraining;
  } catch (const ssg::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  }
  return kOk;
}
