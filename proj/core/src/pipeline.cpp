#include "ssg/pipeline.hpp"

#include <atomic>
#include <charconv>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <istream>
#include <mutex>
#include <sstream>
#include <thread>

#include "ssg/checkpoint.hpp"
#include "ssg/decoder.hpp"
#include "ssg/label_model.hpp"
#include "ssg/lambda.hpp"
#include "ssg/multilabel_baseline.hpp"
#include "ssg/sequence_model.hpp"

#ifndef SSG_VERSION
#define SSG_VERSION "0.0.0"
#endif

namespace ssg {

namespace fs = std::filesystem;

std::string_view version() { return SSG_VERSION; }

std::string_view to_string(Family f) { return f == Family::ssg ? "ssg" : "baseline"; }

std::string_view to_string(PenaltyKind p) {
  switch (p) {
    case PenaltyKind::scalar: return "scalar";
    case PenaltyKind::per_position: return "per-position";
    case PenaltyKind::learned_recurrent: return "learned-recurrent";
    case PenaltyKind::learned_windowed: return "learned-windowed";
  }
  return "?";
}

PenaltyKind penalty_kind_from_string(std::string_view s) {
  if (s == "scalar") return PenaltyKind::scalar;
  if (s == "per-position") return PenaltyKind::per_position;
  if (s == "learned-recurrent") return PenaltyKind::learned_recurrent;
  if (s == "learned-windowed") return PenaltyKind::learned_windowed;
  throw ValidationError("[cli] unknown penalty '" + std::string(s) + "'");
}

namespace {

bool learned(PenaltyKind p) {
  return p == PenaltyKind::learned_recurrent || p == PenaltyKind::learned_windowed;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(std::string_view key, std::string_view v) {
  T out{};
  const std::string s = trim(v);
  const char* first = s.data();
  const char* last = s.data() + s.size();
  std::from_chars_result r{};
  if constexpr (std::is_floating_point_v<T>) {
    r = std::from_chars(first, last, out);
  } else {
    r = std::from_chars(first, last, out, 10);
  }
  if (s.empty() || r.ec != std::errc{} || r.ptr != last) {
    throw ValidationError("[cli] bad value '" + s + "' for " + std::string(key));
  }
  return out;
}

std::vector<std::size_t> parse_sizes(std::string_view key, std::string_view v) {
  std::vector<std::size_t> out;
  const std::string s = trim(v);
  if (s.empty() || s == "none") return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<std::size_t>(key, item));
  return out;
}

std::string join(const std::vector<std::size_t>& v) {
  if (v.empty()) return "none";
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

nn::OptimizerKind optimizer_from_string(std::string_view s) {
  if (s == "adam") return nn::OptimizerKind::adam;
  if (s == "sgd") return nn::OptimizerKind::sgd;
  throw ValidationError("[cli] unknown optimizer '" + std::string(s) + "'");
}

std::string_view to_string(nn::OptimizerKind k) { return k == nn::OptimizerKind::adam ? "adam" : "sgd"; }

}  // namespace

RunConfig::RunConfig() {
  model.epochs = 60;
  lambda_net.epochs = 30;
  lambda_net.batch_size = 32;
  lambda_net.learning_rate = 3e-3;
  lambda_net.hidden = {32, 16};
}

void RunConfig::set(std::string_view key_in, std::string_view value_in) {
  const std::string key = trim(key_in);
  const std::string v = trim(value_in);
  if (key == "task") task.task = task_tag_from_string(v);
  else if (key == "data") data = v;
  else if (key == "n") task.n = parse_number<std::size_t>(key, v);
  else if (key == "seed") task.seed = parse_number<std::uint64_t>(key, v);
  else if (key == "task1_min_len") task.task1_min_len = parse_number<std::size_t>(key, v);
  else if (key == "task1_max_len") task.task1_max_len = parse_number<std::size_t>(key, v);
  else if (key == "family") {
    if (v == "ssg") family = Family::ssg;
    else if (v == "baseline") family = Family::baseline;
    else throw ValidationError("[cli] unknown family '" + v + "'");
  }
  else if (key == "penalty") penalty = penalty_kind_from_string(v);
  else if (key == "rho") rho = parse_number<double>(key, v);
  else if (key == "split") split = parse_number<double>(key, v);
  else if (key == "metric") {
    if (v == "auto") metric.reset();
    else metric = metric_from_string(v);
  }
  else if (key == "epochs") model.epochs = parse_number<std::size_t>(key, v);
  else if (key == "batch_size") model.batch_size = parse_number<std::size_t>(key, v);
  else if (key == "learning_rate") model.learning_rate = parse_number<double>(key, v);
  else if (key == "optimizer") model.optimizer = optimizer_from_string(v);
  else if (key == "hidden") model.hidden = parse_sizes(key, v);
  else if (key == "embedding") model.embedding = parse_number<std::size_t>(key, v);
  else if (key == "encoder_hidden") model.encoder_hidden = parse_number<std::size_t>(key, v);
  else if (key == "decoder_hidden") model.decoder_hidden = parse_number<std::size_t>(key, v);
  else if (key == "lambda_epochs") lambda_net.epochs = parse_number<std::size_t>(key, v);
  else if (key == "lambda_batch_size") lambda_net.batch_size = parse_number<std::size_t>(key, v);
  else if (key == "lambda_learning_rate") lambda_net.learning_rate = parse_number<double>(key, v);
  else if (key == "lambda_window") lambda_options.window_radius = parse_number<std::size_t>(key, v);
  else if (key == "lambda_filters") lambda_options.filters = parse_number<std::size_t>(key, v);
  else if (key == "lambda_cell") lambda_options.cell = parse_number<std::size_t>(key, v);
  else if (key == "lambda_dense") lambda_options.dense = parse_sizes(key, v);
  else if (key == "lambda_threshold") lambda_options.threshold = parse_number<double>(key, v);
  else if (key == "baseline_threshold") baseline_threshold = parse_number<double>(key, v);
  else if (key == "out") out = v;
  else if (key == "threads") threads = parse_number<std::size_t>(key, v);
  else throw ValidationError("[cli] unknown config key '" + key + "'");
}

void RunConfig::validate() const {
  if (!(rho >= 0.0 && rho < 1.0)) throw ValidationError("[cli] rho must lie in [0,1)");
  if (!(split > 0.0 && split < 1.0)) throw ValidationError("[cli] split must lie in (0,1)");
  if (threads == 0) throw ValidationError("[cli] threads must be positive");
  if (!(baseline_threshold > 0.0 && baseline_threshold < 1.0)) {
    throw ValidationError("[cli] baseline_threshold must lie in (0,1)");
  }
  if (!(lambda_options.threshold > 0.0 && lambda_options.threshold < 1.0)) {
    throw ValidationError("[cli] lambda_threshold must lie in (0,1)");
  }
  if (data.empty()) task.validate();
  model.validate();
  lambda_net.validate();
}

Metric RunConfig::resolved_metric() const {
  if (metric) return *metric;
  return task.task == TaskTag::task2 ? Metric::med : Metric::mf1;
}

std::string RunConfig::canonical() const {
  std::ostringstream o;
  auto kv = [&](std::string_view k, const std::string& v) { o << k << " = " << v << "\n"; };
  kv("task", std::string(to_string(task.task)));
  kv("data", data);
  kv("n", std::to_string(task.n));
  kv("seed", std::to_string(task.seed));
  kv("task1_min_len", std::to_string(task.task1_min_len));
  kv("task1_max_len", std::to_string(task.task1_max_len));
  kv("family", std::string(to_string(family)));
  kv("penalty", std::string(to_string(penalty)));
  kv("rho", fmt(rho));
  kv("split", fmt(split));
  kv("metric", metric ? std::string(to_string(*metric)) : "auto");
  kv("epochs", std::to_string(model.epochs));
  kv("batch_size", std::to_string(model.batch_size));
  kv("learning_rate", fmt(model.learning_rate));
  kv("optimizer", std::string(to_string(model.optimizer)));
  kv("hidden", join(model.hidden));
  kv("embedding", std::to_string(model.embedding));
  kv("encoder_hidden", std::to_string(model.encoder_hidden));
  kv("decoder_hidden", std::to_string(model.decoder_hidden));
  kv("lambda_epochs", std::to_string(lambda_net.epochs));
  kv("lambda_batch_size", std::to_string(lambda_net.batch_size));
  kv("lambda_learning_rate", fmt(lambda_net.learning_rate));
  kv("lambda_window", std::to_string(lambda_options.window_radius));
  kv("lambda_filters", std::to_string(lambda_options.filters));
  kv("lambda_cell", std::to_string(lambda_options.cell));
  kv("lambda_dense", join(lambda_options.dense));
  kv("lambda_threshold", fmt(lambda_options.threshold));
  kv("baseline_threshold", fmt(baseline_threshold));
  return o.str();
}

std::string RunConfig::hash() const { return sha256_hex(canonical()); }

nlohmann::ordered_json RunConfig::to_json() const {
  nlohmann::ordered_json j;
  std::istringstream in(canonical());
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    j[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return j;
}

void apply_config(RunConfig& cfg, std::istream& in, const std::string& origin) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ValidationError("[cli] " + origin + ":" + std::to_string(lineno) + ": expected key = value");
    }
    try {
      cfg.set(line.substr(0, eq), line.substr(eq + 1));
    } catch (const ValidationError& e) {
      throw ValidationError("[cli] " + origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("[cli] cannot open config '" + path + "'");
  RunConfig cfg;
  apply_config(cfg, in, path);
  return cfg;
}

RunDir::RunDir(std::string path) : path_(std::move(path)) {
  std::error_code ec;
  fs::create_directories(path_, ec);
  if (ec) throw ValidationError("[cli] cannot create '" + path_ + "': " + ec.message());
}

std::string RunDir::file(std::string_view name) const { return (fs::path(path_) / name).string(); }

void RunDir::write_text(std::string_view name, const std::string& text) const {
  const std::string p = file(name);
  if (fs::exists(p)) throw ValidationError("[cli] refusing to overwrite '" + p + "'");
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ValidationError("[cli] cannot write '" + p + "'");
  out << text;
  if (!out) throw ValidationError("[cli] write failed for '" + p + "'");
}

void RunDir::write_json(std::string_view name, const nlohmann::ordered_json& doc) const {
  write_text(name, doc.dump(2) + "\n");
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finaliser
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
            next = n;
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

Dataset load_or_generate(const RunConfig& cfg) {
  if (!cfg.data.empty()) return load_dataset(cfg.data);
  return generate(cfg.task);
}

SplitData split_dataset(const Dataset& data, const RunConfig& cfg) {
  auto [train, test] = split_indices(data.size(), cfg.split, derive_seed(cfg.seed(), 1));
  if (train.empty() || test.empty()) {
    throw ValidationError("[cli] split leaves an empty train or test part");
  }
  return {data.subset(train), data.subset(test)};
}

// ---------------------------------------------------------------------------

struct Method {
  RunConfig cfg;
  TaskKind kind = TaskKind::labels;
  std::size_t universe = 0;
  std::size_t max_len = 0;
  std::optional<LabelModel> label_model;
  std::optional<SequenceModel> seq_model;
  std::optional<MultiLabelBaseline> baseline;
  std::optional<PenaltyParams> penalty;
  std::optional<LambdaNet> net;
  nlohmann::ordered_json report;

  [[nodiscard]] nlohmann::json model_json() const {
    if (label_model) return to_json(*label_model);
    if (seq_model) return to_json(*seq_model);
    return to_json(*baseline);
  }

  [[nodiscard]] SamplePrediction predict_one(const SetSample& s) const {
    SamplePrediction out;
    if (baseline) {
      if (kind == TaskKind::labels) {
        out.predicted = baseline->predict(std::get<Features>(s.x));
      } else {
        const Features f = digit_one_hot(std::get<TokenSeq>(s.x), cfg.task.task1_max_len);
        out.predicted = digit_sequences(baseline->predict(f), static_cast<Token>(universe - 1));
      }
      return out;
    }
    if (label_model) {
      const Features& x = std::get<Features>(s.x);
      if (net) {
        LabelSet labels;
        for (Token t : classify_positives(*net, label_model->logits(x), 1)) {
          labels.push_back({static_cast<std::uint32_t>(t)});
        }
        out.predicted = std::move(labels);
        out.iterations = 1;
        return out;
      }
      const LabelDecodeResult r = decode_set(*label_model, penalty->lambda_at(1), x, cfg.rho);
      out.predicted = r.predicted;
      out.iterations = r.iterations;
      out.repeats = r.repeats;
      out.truncated = r.truncated;
      return out;
    }
    const SequenceDecodeResult r =
        net ? decode_sequence_set(*seq_model, lambda_gate(*net), s.x, max_len)
            : decode_sequence_set(*seq_model, *penalty, s.x, max_len, cfg.rho);
    out.predicted = r.predicted;
    out.iterations = r.iterations;
    out.repeats = r.repeats;
    out.truncated = r.truncated();
    return out;
  }
};

TrainedMethod::TrainedMethod() : impl_(std::make_unique<Method>()) {}
TrainedMethod::TrainedMethod(TrainedMethod&&) noexcept = default;
TrainedMethod& TrainedMethod::operator=(TrainedMethod&&) noexcept = default;
TrainedMethod::~TrainedMethod() = default;

const nlohmann::ordered_json& TrainedMethod::report() const { return impl_->report; }

std::vector<SamplePrediction> TrainedMethod::predict(const Dataset& data, std::size_t threads) const {
  std::vector<SamplePrediction> out(data.size());
  parallel_for(data.size(), threads, [&](std::size_t i) { out[i] = impl_->predict_one(data.samples()[i]); });
  return out;
}

namespace {

nlohmann::ordered_json input_json(const Input& x) {
  if (const auto* f = std::get_if<Features>(&x)) return *f;
  return digits_of(x);
}

nlohmann::ordered_json set_json(const TargetSet& y, std::size_t universe) {
  auto arr = nlohmann::ordered_json::array();
  if (const auto* l = std::get_if<LabelSet>(&y)) {
    for (const Label& e : *l) arr.push_back(e.id);
  } else {
    for (const TokenSeq& t : std::get<SequenceSet>(y)) arr.push_back(format_tokens(t, universe));
  }
  return arr;
}

struct Scored {
  std::vector<TargetSet> sets;
  std::vector<bool> truncated;
};

Scored unpack(const std::vector<SamplePrediction>& preds) {
  Scored s;
  for (const SamplePrediction& p : preds) {
    s.sets.push_back(p.predicted);
    s.truncated.push_back(p.truncated);
  }
  return s;
}

}  // namespace

std::string decode_report_jsonl(const Dataset& data, const std::vector<SamplePrediction>& preds) {
  if (preds.size() != data.size()) throw ValidationError("[cli] predictions do not match the dataset");
  std::string out;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    nlohmann::ordered_json j;
    j["x"] = input_json(data.samples()[i].x);
    j["predicted"] = set_json(preds[i].predicted, data.universe());
    j["iterations"] = preds[i].iterations;
    j["truncated"] = preds[i].truncated;
    j["repeats"] = preds[i].repeats;
    out += j.dump() + "\n";
  }
  return out;
}

namespace {

void require_baseline_applicable(const RunConfig& cfg, const Dataset& data) {
  if (data.kind() == TaskKind::sequences && cfg.task.task != TaskTag::task1) {
    throw ValidationError(
        "[cli] multi-label baseline is not applicable: it cannot emit sequence-set targets");
  }
}

nlohmann::ordered_json penalty_summary(const PenaltyParams& p) {
  nlohmann::ordered_json j;
  j["variant"] = std::string(to_string(p.variant));
  j["lambdas"] = p.lambdas;
  auto entries = nlohmann::ordered_json::array();
  for (const PenaltyReportEntry& e : p.report) {
    nlohmann::ordered_json r;
    r["position"] = e.position;
    r["records"] = e.records;
    r["solved"] = e.solved;
    r["feasible"] = e.feasible;
    r["carried"] = e.carried;
    r["candidate"] = std::string(to_string(e.candidate));
    r["lo"] = e.lo;
    r["hi"] = e.hi;
    entries.push_back(r);
  }
  j["positions"] = entries;
  return j;
}

LambdaNet fit_lambda_net(const RunConfig& cfg, const LambdaTrainingSet& all, std::size_t vocab,
                         std::size_t max_len, nlohmann::ordered_json& report) {
  // every tenth example is held out for validation
  LambdaTrainingSet train, val;
  for (std::size_t i = 0; i < all.examples.size(); ++i) {
    (i % 10 == 9 ? val : train).examples.push_back(all.examples[i]);
  }
  if (train.examples.empty()) train = all;
  LambdaNetOptions opts = cfg.lambda_options;
  opts.variant = cfg.penalty == PenaltyKind::learned_recurrent ? LambdaNetVariant::recurrent
                                                               : LambdaNetVariant::windowed;
  opts.vocab = vocab;
  opts.max_len = max_len;
  TrainConfig tc = cfg.lambda_net;
  tc.seed = derive_seed(cfg.seed(), 3);
  TrainReport tr;
  LambdaNet net = train_lambda_net(train, opts, tc, &tr);
  const auto acc = evaluate_lambda_net(net, val.examples.empty() ? train.examples : val.examples);
  nlohmann::ordered_json j;
  j["variant"] = std::string(to_string(opts.variant));
  j["examples"] = all.examples.size();
  j["positive_tokens"] = all.positives;
  j["negative_tokens"] = all.negatives;
  j["positive_weight"] = net.positive_weight();
  j["validation_examples"] = val.examples.size();
  j["validation_token_accuracy"] = acc.token_accuracy;
  j["validation_exact_set_rate"] = acc.exact_set_rate;
  j["epoch_loss"] = tr.epoch_loss;
  report["lambda_net"] = j;
  return net;
}

}  // namespace

TrainedMethod train_method(const RunConfig& cfg, const Dataset& train,
                           const TrainedMethod* reuse_base) {
  cfg.validate();
  TrainedMethod tm;
  Method& m = *tm.impl_;
  m.cfg = cfg;
  m.kind = train.kind();
  m.universe = train.universe();
  m.max_len = train.max_len();
  TrainConfig mc = cfg.model;
  mc.seed = derive_seed(cfg.seed(), 2);
  m.report["version"] = std::string(version());
  m.report["config_hash"] = cfg.hash();
  m.report["config"] = cfg.to_json();
  m.report["family"] = std::string(to_string(cfg.family));
  m.report["train_samples"] = train.size();
  TrainReport base;
  const Method* donor = reuse_base && cfg.family == Family::ssg ? reuse_base->impl_.get() : nullptr;
  if (donor && !donor->label_model && !donor->seq_model) donor = nullptr;

  if (cfg.family == Family::baseline) {
    require_baseline_applicable(cfg, train);
    const Dataset view =
        train.kind() == TaskKind::labels ? train : task1_label_view(train, cfg.task.task1_max_len);
    m.baseline = train_multilabel_baseline(view, mc, &base);
    m.baseline->set_threshold(cfg.baseline_threshold);
    m.report["base_model"] = {{"family", "multilabel_baseline"}, {"epoch_loss", base.epoch_loss}};
    m.report["model_hash"] = json_hash(m.model_json());
    return tm;
  }

  m.report["penalty"] = std::string(to_string(cfg.penalty));
  const auto flat = flatten(train);
  if (train.kind() == TaskKind::labels) {
    if (cfg.penalty == PenaltyKind::per_position) {
      throw ValidationError("[cli] per-position penalties need sequence targets");
    }
    if (donor) {
      m.label_model = donor->label_model.value();
      m.report["base_model"] = donor->report["base_model"];
    } else {
      m.label_model = train_label_model(flat, train.universe(), mc, &base);
      m.report["base_model"] = {{"family", "label_model"}, {"epoch_loss", base.epoch_loss}};
    }
    const std::string hash = json_hash(m.model_json());
    m.report["model_hash"] = hash;
    if (learned(cfg.penalty)) {
      m.net = fit_lambda_net(cfg, build_lambda_training_set(*m.label_model, train), train.universe(), 1,
                             m.report);
      m.penalty.emplace();
      m.penalty->variant = PenaltyParams::Variant::learned;
    } else {
      const MarginStats stats = margin_stats(*m.label_model, train);
      if (stats.records.empty()) {
        throw TrainingError("[cli] every group covers the whole universe; lambda is undetermined");
      }
      m.penalty = scalar_penalty(solve_lambda(stats.records), stats.records.size());
      m.report["skipped_groups"] = stats.skipped_groups.size();
    }
    m.penalty->model_hash = hash;
  } else {
    const SequenceShape shape{train.input_dim(), train.universe(), train.max_len()};
    if (donor) {
      m.seq_model = donor->seq_model.value();
      m.report["base_model"] = donor->report["base_model"];
    } else {
      m.seq_model = train_sequence_model(flat, shape, mc, &base);
      m.report["base_model"] = {{"family", "sequence_model"}, {"epoch_loss", base.epoch_loss}};
    }
    const std::string hash = json_hash(m.model_json());
    m.report["model_hash"] = hash;
    if (learned(cfg.penalty)) {
      m.net = fit_lambda_net(cfg, build_lambda_training_set(*m.seq_model, train), train.universe(),
                             train.max_len(), m.report);
      m.penalty.emplace();
      m.penalty->variant = PenaltyParams::Variant::learned;
    } else if (cfg.penalty == PenaltyKind::per_position) {
      m.penalty = solve_lambda_per_position(*m.seq_model, train);
    } else {
      std::vector<MarginRecord> pooled;
      for (std::size_t j = 1; j <= train.max_len(); ++j) {
        const auto r = position_records(*m.seq_model, train, j);
        pooled.insert(pooled.end(), r.begin(), r.end());
      }
      if (pooled.empty()) throw TrainingError("[cli] no margin records for the scalar penalty");
      m.penalty = scalar_penalty(solve_lambda(pooled), pooled.size());
    }
    m.penalty->model_hash = hash;
  }
  if (m.net) {
    m.penalty->lambda_net = LambdaNetHandle{"lambda_net.json", json_hash(to_json(*m.net)),
                                            std::string(to_string(m.net->options().variant))};
  }
  m.report["lambda"] = penalty_summary(*m.penalty);
  return tm;
}

void TrainedMethod::save(const RunDir& dir) const {
  const Method& m = *impl_;
  dir.write_text("config.txt", m.cfg.canonical());
  dir.write_text("model.json", m.model_json().dump() + "\n");
  if (m.penalty) dir.write_text("penalty.json", to_json(*m.penalty).dump(2) + "\n");
  if (m.net) dir.write_text("lambda_net.json", to_json(*m.net).dump() + "\n");
  dir.write_json("train_report.json", m.report);
}

TrainedMethod TrainedMethod::load(const RunConfig& cfg, const RunDir& dir, bool override_hash) {
  TrainedMethod tm;
  Method& m = *tm.impl_;
  m.cfg = cfg;
  const nlohmann::json report = read_json_file(dir.file("train_report.json"));
  const std::string stored = report.at("config_hash").get<std::string>();
  if (stored != cfg.hash() && !override_hash) {
    throw ValidationError("[cli] checkpoints in '" + dir.path() + "' were trained with config " +
                          stored + ", not " + cfg.hash() + " (pass --override-hash to force)");
  }
  const nlohmann::json model = read_json_file(dir.file("model.json"));
  const std::string family = model.value("family", std::string{});
  if (family == "label_model") {
    m.label_model = label_model_from_json(model);
    m.kind = TaskKind::labels;
    m.universe = m.label_model->universe();
    m.max_len = 1;
  } else if (family == "sequence_model") {
    m.seq_model = sequence_model_from_json(model);
    m.kind = TaskKind::sequences;
    m.universe = m.seq_model->vocab();
    m.max_len = m.seq_model->max_len();
  } else if (family == "multilabel_baseline") {
    m.baseline = multilabel_baseline_from_json(model);
    m.kind = cfg.task.task == TaskTag::task1 ? TaskKind::sequences : TaskKind::labels;
    m.universe = m.kind == TaskKind::sequences ? kDigitOutputVocab : m.baseline->universe();
    m.max_len = m.kind == TaskKind::sequences ? 2 : 1;
    m.baseline->set_threshold(cfg.baseline_threshold);
  } else {
    throw ValidationError("[cli] unknown model family '" + family + "' in '" + dir.path() + "'");
  }
  if (family != "multilabel_baseline") {
    m.penalty = penalty_from_json(read_json_file(dir.file("penalty.json")));
    check_penalty_hash(*m.penalty, json_hash(model), override_hash);
    if (m.penalty->variant == PenaltyParams::Variant::learned) {
      if (!m.penalty->lambda_net) throw ValidationError("[cli] learned penalty without a lambda-net handle");
      const nlohmann::json net = read_json_file(dir.file(m.penalty->lambda_net->file));
      if (json_hash(net) != m.penalty->lambda_net->hash && !override_hash) {
        throw ValidationError("[cli] lambda-net checkpoint hash does not match the penalty file");
      }
      m.net = lambda_net_from_json(net);
    }
  }
  m.report = nlohmann::ordered_json::parse(report.dump());
  return tm;
}

// ---------------------------------------------------------------------------

namespace {

nlohmann::ordered_json provenance(const RunConfig& cfg) {
  nlohmann::ordered_json j;
  j["version"] = std::string(version());
  j["config_hash"] = cfg.hash();
  j["config"] = cfg.to_json();
  return j;
}

std::string dataset_text(const Dataset& d) {
  std::ostringstream o;
  write_jsonl(o, d);
  return o.str();
}

void write_dataset_run(const RunConfig& cfg, const Dataset& d, nlohmann::ordered_json manifest) {
  const RunDir dir(cfg.out);
  const std::string text = dataset_text(d);
  dir.write_text("data.jsonl", text);
  manifest["samples"] = d.size();
  manifest["kind"] = std::string(to_string(d.kind()));
  manifest["universe"] = d.universe();
  manifest["max_len"] = d.max_len();
  manifest["data_sha256"] = sha256_hex(text);
  dir.write_json("manifest.json", manifest);
}

}  // namespace

void cmd_gen(const RunConfig& cfg) {
  cfg.task.validate();
  if (cfg.task.task == TaskTag::multilabel_file) {
    throw ValidationError("[cli] gen does not handle multilabel files; use import");
  }
  const Dataset d = generate(cfg.task);
  verify_truths(d, cfg.task.task);
  std::ostringstream spec;
  spec << "task=" << to_string(cfg.task.task) << ";n=" << cfg.task.n << ";seed=" << cfg.task.seed
       << ";task1_min_len=" << cfg.task.task1_min_len << ";task1_max_len=" << cfg.task.task1_max_len;
  nlohmann::ordered_json manifest;
  manifest["version"] = std::string(version());
  manifest["task"] = std::string(to_string(cfg.task.task));
  manifest["seed"] = cfg.task.seed;
  manifest["spec"] = spec.str();
  manifest["spec_hash"] = sha256_hex(spec.str());
  write_dataset_run(cfg, d, manifest);
}

void cmd_import(const RunConfig& cfg, const std::string& source, std::optional<std::size_t> features,
                std::optional<std::size_t> labels) {
  const Dataset d = load_multilabel(source, features, labels);
  nlohmann::ordered_json manifest;
  manifest["version"] = std::string(version());
  manifest["task"] = "multilabel-file";
  manifest["source"] = fs::path(source).filename().string();
  manifest["input_dim"] = d.input_dim();
  write_dataset_run(cfg, d, manifest);
}

nlohmann::ordered_json cmd_train(const RunConfig& cfg) {
  cfg.validate();
  const Dataset data = load_or_generate(cfg);
  const SplitData parts = split_dataset(data, cfg);
  const TrainedMethod m = train_method(cfg, parts.train);
  m.save(RunDir(cfg.out));
  return m.report();
}

EvalReport cmd_eval(const RunConfig& cfg, const std::string& checkpoints, bool override_hash) {
  cfg.validate();
  if (!fs::exists(fs::path(checkpoints) / "train_report.json")) {
    throw ValidationError("[cli] no checkpoints in '" + checkpoints + "'");
  }
  const TrainedMethod m = TrainedMethod::load(cfg, RunDir(checkpoints), override_hash);
  const Dataset data = load_or_generate(cfg);
  const SplitData parts = split_dataset(data, cfg);
  const auto preds = m.predict(parts.test, cfg.threads);
  const Scored scored = unpack(preds);
  const EvalReport r = evaluate(scored.sets, parts.test, cfg.resolved_metric(), &scored.truncated);
  const RunDir out(cfg.out);
  out.write_text("predictions.jsonl", decode_report_jsonl(parts.test, preds));
  nlohmann::ordered_json doc = provenance(cfg);
  doc["model_hash"] = m.report().value("model_hash", std::string{});
  doc["test_samples"] = parts.test.size();
  doc["eval"] = r.to_json();
  out.write_json("eval_report.json", doc);
  const std::string method = cfg.family == Family::baseline ? "multi-label"
                                                            : "ssg-" + std::string(to_string(cfg.penalty));
  out.write_text("eval.csv", EvalReport::csv_header() + "\n" + r.csv_row(method) + "\n");
  return r;
}

// ---------------------------------------------------------------------------

bool ReproduceResult::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CriterionCheck& c) { return c.passed; });
}

namespace {

struct Column {
  std::string title;
  std::string slug;
  Family family;
  PenaltyKind penalty;
};

std::string score_text(const std::optional<double>& s) {
  if (!s) return "N/A";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *s);
  return buf;
}

const ReproduceRow& row_of(const ReproduceResult& r, std::string_view title) {
  for (const ReproduceRow& row : r.rows) {
    if (row.method == title) return row;
  }
  throw std::logic_error("missing column");
}

}  // namespace

ReproduceResult cmd_reproduce(TaskTag experiment, const RunConfig& base_cfg, std::ostream& log) {
  RunConfig cfg = base_cfg;
  cfg.task.task = experiment;
  if (experiment == TaskTag::multilabel_file && cfg.data.empty()) {
    if (cfg.task.path.empty()) throw ValidationError("[cli] reproduce multilabel-file needs a data file");
  }
  cfg.validate();
  const bool sequences = experiment == TaskTag::task1 || experiment == TaskTag::task2;
  const std::vector<Column> columns =
      sequences ? std::vector<Column>{{"Multi-Label", "multi-label", Family::baseline, PenaltyKind::scalar},
                                      {"SSG-S", "ssg-s", Family::ssg, PenaltyKind::per_position},
                                      {"SSG-recurrent", "ssg-recurrent", Family::ssg,
                                       PenaltyKind::learned_recurrent},
                                      {"SSG-windowed", "ssg-windowed", Family::ssg,
                                       PenaltyKind::learned_windowed}}
                : std::vector<Column>{{"Multi-Label", "multi-label", Family::baseline, PenaltyKind::scalar},
                                      {"SSG", "ssg", Family::ssg, PenaltyKind::scalar},
                                      {"SSG-recurrent", "ssg-recurrent", Family::ssg,
                                       PenaltyKind::learned_recurrent},
                                      {"SSG-windowed", "ssg-windowed", Family::ssg,
                                       PenaltyKind::learned_windowed}};

  const RunDir root(cfg.out);
  const Dataset data = load_or_generate(cfg);
  if (cfg.data.empty() && experiment != TaskTag::multilabel_file) verify_truths(data, experiment);
  const SplitData parts = split_dataset(data, cfg);

  ReproduceResult result;
  result.metric = cfg.resolved_metric();
  nlohmann::ordered_json methods = nlohmann::ordered_json::array();
  std::optional<TrainedMethod> first_ssg;  // its base model is shared by the other SSG columns
  for (const Column& col : columns) {
    RunConfig c = cfg;
    c.family = col.family;
    c.penalty = col.penalty;
    c.out = (fs::path(cfg.out) / col.slug).string();
    ReproduceRow row;
    row.method = col.title;
    nlohmann::ordered_json entry;
    entry["method"] = col.title;
    entry["config_hash"] = c.hash();
    if (col.family == Family::baseline && experiment == TaskTag::task2) {
      log << col.title << ": N/A (multi-label baseline cannot emit sequence sets)\n";
      entry["score"] = "N/A";
      methods.push_back(entry);
      result.rows.push_back(row);
      continue;
    }
    log << col.title << ": training\n" << std::flush;
    TrainedMethod m = train_method(c, parts.train, first_ssg ? &*first_ssg : nullptr);
    const RunDir dir(c.out);
    m.save(dir);
    const auto preds = m.predict(parts.test, cfg.threads);
    const Scored scored = unpack(preds);
    const EvalReport r = evaluate(scored.sets, parts.test, result.metric, &scored.truncated);
    dir.write_text("predictions.jsonl", decode_report_jsonl(parts.test, preds));
    nlohmann::ordered_json doc = provenance(c);
    doc["test_samples"] = parts.test.size();
    doc["eval"] = r.to_json();
    dir.write_json("eval_report.json", doc);
    row.score = r.aggregate;
    row.truncations = r.truncations;
    entry["score"] = r.aggregate;
    entry["exact_match_rate"] = r.exact_match_rate;
    entry["truncations"] = r.truncations;
    if (m.report().contains("lambda_net")) {
      entry["lambda_net_validation_token_accuracy"] =
          m.report()["lambda_net"]["validation_token_accuracy"];
    }
    log << col.title << ": " << to_string(result.metric) << " = " << score_text(row.score) << "\n"
        << std::flush;
    methods.push_back(entry);
    result.rows.push_back(row);
    if (col.family == Family::ssg && !first_ssg) first_ssg.emplace(std::move(m));
  }

  auto check = [&](std::string name, bool ok, std::string detail) {
    result.checks.push_back({std::move(name), ok, std::move(detail)});
  };
  if (experiment == TaskTag::task1) {
    const auto& w = row_of(result, "SSG-windowed");
    const auto& b = row_of(result, "Multi-Label");
    const auto& s = row_of(result, "SSG-S");
    check("SSG-windowed mF1 > Multi-Label mF1", *w.score > *b.score,
          score_text(w.score) + " vs " + score_text(b.score));
    check("SSG-windowed mF1 > SSG-S mF1", *w.score > *s.score,
          score_text(w.score) + " vs " + score_text(s.score));
  } else if (experiment == TaskTag::task2) {
    const auto& w = row_of(result, "SSG-windowed");
    const auto& s = row_of(result, "SSG-S");
    const auto& b = row_of(result, "Multi-Label");
    check("SSG-windowed mED < SSG-S mED", *w.score < *s.score,
          score_text(w.score) + " vs " + score_text(s.score));
    check("Multi-Label reports N/A", !b.score.has_value(), score_text(b.score));
  }

  const std::string task_name(to_string(experiment));
  const std::string metric_name(to_string(result.metric));
  std::ostringstream md, csv;
  md << "| Task |";
  for (const Column& col : columns) md << " " << col.title << " |";
  md << "\n|---|";
  for (std::size_t i = 0; i < columns.size(); ++i) md << "---|";
  md << "\n| " << task_name << " (" << metric_name << ", "
     << (higher_is_better(result.metric) ? "higher" : "lower") << " is better) |";
  for (const ReproduceRow& row : result.rows) md << " " << score_text(row.score) << " |";
  md << "\n";
  csv << "task,metric,method,score,truncations\n";
  for (const ReproduceRow& row : result.rows) {
    csv << task_name << "," << metric_name << "," << row.method << "," << score_text(row.score) << ","
        << row.truncations << "\n";
  }
  nlohmann::ordered_json report = provenance(cfg);
  report["experiment"] = task_name;
  report["metric"] = metric_name;
  report["train_samples"] = parts.train.size();
  report["test_samples"] = parts.test.size();
  report["methods"] = methods;
  auto checks = nlohmann::ordered_json::array();
  for (const CriterionCheck& c : result.checks) {
    checks.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  }
  report["checks"] = checks;
  root.write_text("table.md", md.str());
  root.write_text("table.csv", csv.str());
  root.write_json("report.json", report);
  log << "\n" << md.str() << "\n";
  for (const CriterionCheck& c : result.checks) {
    log << (c.passed ? "PASS " : "FAIL ") << c.name << " (" << c.detail << ")\n";
  }
  return result;
}

}  // namespace ssg
