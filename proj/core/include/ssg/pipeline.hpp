#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ssg/lambda_net.hpp"
#include "ssg/metrics.hpp"
#include "ssg/tasks.hpp"
#include "ssg/training.hpp"

namespace ssg {

[[nodiscard]] std::string_view version();

enum class Family { ssg, baseline };
enum class PenaltyKind { scalar, per_position, learned_recurrent, learned_windowed };

[[nodiscard]] std::string_view to_string(Family f);
[[nodiscard]] std::string_view to_string(PenaltyKind p);
[[nodiscard]] PenaltyKind penalty_kind_from_string(std::string_view s);

/// Every setting of one run. Serialised as flat "key = value" lines; see
/// README for the keys.
struct RunConfig {
  TaskSpec task;
  std::string data;  // dataset JSONL; generated from `task` when empty
  Family family = Family::ssg;
  PenaltyKind penalty = PenaltyKind::per_position;
  double rho = 0.0;
  double split = 0.7;
  std::optional<Metric> metric;  // task default when unset
  TrainConfig model;
  TrainConfig lambda_net;
  LambdaNetOptions lambda_options;
  double baseline_threshold = 0.5;
  std::string out = "run";
  std::size_t threads = 1;

  RunConfig();

  /// Applies one key; unknown keys and bad values throw ValidationError.
  void set(std::string_view key, std::string_view value);
  void validate() const;
  [[nodiscard]] std::uint64_t seed() const noexcept { return task.seed; }
  [[nodiscard]] Metric resolved_metric() const;

  /// Canonical text form: fixed key order, one "key = value" per line. The
  /// output directory and thread count are excluded, since neither changes
  /// any result.
  [[nodiscard]] std::string canonical() const;
  [[nodiscard]] std::string hash() const;
  [[nodiscard]] nlohmann::ordered_json to_json() const;
};

/// "key = value" lines; blank lines and '#' comments are ignored.
void apply_config(RunConfig& cfg, std::istream& in, const std::string& origin);
[[nodiscard]] RunConfig load_config(const std::string& path);

/// Directory whose files are written once and never replaced.
class RunDir {
 public:
  explicit RunDir(std::string path);
  [[nodiscard]] const std::string& path() const noexcept { return path_; }
  [[nodiscard]] std::string file(std::string_view name) const;
  void write_text(std::string_view name, const std::string& text) const;
  void write_json(std::string_view name, const nlohmann::ordered_json& doc) const;

 private:
  std::string path_;
};

/// Deterministic per-purpose seed derived from the run seed.
[[nodiscard]] std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Runs fn(i) for i in [0, n) on `threads` workers; results land by index.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

[[nodiscard]] Dataset load_or_generate(const RunConfig& cfg);

struct SplitData {
  Dataset train;
  Dataset test;
};
[[nodiscard]] SplitData split_dataset(const Dataset& data, const RunConfig& cfg);

/// Decoded set of one sample plus decoder bookkeeping.
struct SamplePrediction {
  TargetSet predicted;
  std::size_t iterations = 0;
  std::size_t repeats = 0;
  bool truncated = false;
};

/// One JSON object per sample: x, predicted, iterations, truncated, repeats.
[[nodiscard]] std::string decode_report_jsonl(const Dataset& data,
                                              const std::vector<SamplePrediction>& preds);

/// Trained base model and penalty of one method.
struct Method;

class TrainedMethod {
 public:
  TrainedMethod(TrainedMethod&&) noexcept;
  TrainedMethod& operator=(TrainedMethod&&) noexcept;
  ~TrainedMethod();

  [[nodiscard]] const nlohmann::ordered_json& report() const;
  /// Prediction for every sample, ordered as the dataset.
  [[nodiscard]] std::vector<SamplePrediction> predict(const Dataset& data, std::size_t threads) const;
  void save(const RunDir& dir) const;
  [[nodiscard]] static TrainedMethod load(const RunConfig& cfg, const RunDir& dir, bool override_hash);

  friend TrainedMethod train_method(const RunConfig& cfg, const Dataset& train,
                                    const TrainedMethod* reuse_base);

 private:
  TrainedMethod();
  std::unique_ptr<Method> impl_;
};

/// Trains the configured family and penalty variant on `train`. An SSG method
/// given `reuse_base` copies that method's base model instead of training one;
/// the caller guarantees it was trained under the same model settings.
[[nodiscard]] TrainedMethod train_method(const RunConfig& cfg, const Dataset& train,
                                         const TrainedMethod* reuse_base = nullptr);

// Commands. Each writes into cfg.out and refuses to overwrite.

void cmd_gen(const RunConfig& cfg);
void cmd_import(const RunConfig& cfg, const std::string& source,
                std::optional<std::size_t> features, std::optional<std::size_t> labels);
nlohmann::ordered_json cmd_train(const RunConfig& cfg);
/// Decodes the test split with the checkpoints in `checkpoints`; their stored
/// config hash must match `cfg` unless `override_hash`.
EvalReport cmd_eval(const RunConfig& cfg, const std::string& checkpoints, bool override_hash);

struct CriterionCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ReproduceRow {
  std::string method;
  std::optional<double> score;  // nullopt: not applicable
  std::size_t truncations = 0;
};

struct ReproduceResult {
  Metric metric = Metric::mf1;
  std::vector<ReproduceRow> rows;
  std::vector<CriterionCheck> checks;
  [[nodiscard]] bool passed() const;
};

/// Runs the baseline and every applicable SSG variant with derived seeds and
/// writes table.md, table.csv and report.json.
ReproduceResult cmd_reproduce(TaskTag experiment, const RunConfig& cfg, std::ostream& log);

}  // namespace ssg
