#include "ssg/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace ssg {

namespace {

std::string digit_string(std::mt19937_64& rng, std::size_t len) {
  std::uniform_int_distribution<int> digit(0, 9);
  std::string s(len, '0');
  for (char& c : s) c = static_cast<char>('0' + digit(rng));
  return s;
}

void require_digits(std::string_view x, const char* who) {
  for (char c : x) {
    if (c < '0' || c > '9') {
      throw ValidationError(std::string("[tasks] ") + who + ": non-digit character in '" +
                            std::string(x) + "'");
    }
  }
}

TokenSeq digits_to_tokens(std::string_view s) {
  TokenSeq t;
  for (char c : s) t.tokens.push_back(static_cast<Token>(c - '0'));
  return t;
}

}  // namespace

std::string_view to_string(TaskTag t) {
  switch (t) {
    case TaskTag::threshold: return "threshold";
    case TaskTag::task1: return "task1";
    case TaskTag::task2: return "task2";
    case TaskTag::multilabel_file: return "multilabel-file";
  }
  return "?";
}

TaskTag task_tag_from_string(std::string_view s) {
  if (s == "threshold") return TaskTag::threshold;
  if (s == "task1") return TaskTag::task1;
  if (s == "task2") return TaskTag::task2;
  if (s == "multilabel-file" || s == "multilabel") return TaskTag::multilabel_file;
  throw ValidationError("[tasks] unknown task '" + std::string(s) + "'");
}

void TaskSpec::validate() const {
  if (n == 0) throw ValidationError("[tasks] sample count must be positive");
  if (task == TaskTag::task1) {
    if (task1_min_len == 0 || task1_min_len > task1_max_len) {
      throw ValidationError("[tasks] task1 length range is empty");
    }
    if (task1_max_len < 9) {
      throw ValidationError("[tasks] task1 max length must admit a leading 9 (>= 9)");
    }
  }
  if (task == TaskTag::multilabel_file && path.empty()) {
    throw ValidationError("[tasks] multilabel-file needs a path");
  }
}

ThresholdTruth threshold_truth(double x) {
  ThresholdTruth t;
  if (!std::isfinite(x)) throw ValidationError("[tasks] threshold input must be finite");
  if (x >= 10.0) {
    t.out_of_range = true;
    return t;
  }
  const double first = std::max(1.0, std::floor(x) + 1.0);
  for (auto y = static_cast<std::uint32_t>(first); y <= 10; ++y) t.labels.push_back({y});
  return t;
}

LabelSet task1_truth(std::string_view x) {
  if (x.empty()) throw ValidationError("[tasks] task1 input is empty");
  require_digits(x, "task1");
  const auto m = static_cast<std::size_t>(x[0] - '0');
  if (m == 0) throw ValidationError("[tasks] task1 leading digit must be >= 1");
  if (x.size() < m) {
    throw ValidationError("[tasks] task1 input '" + std::string(x) + "' is shorter than its leading digit");
  }
  std::set<std::uint32_t> digits;
  for (std::size_t i = 0; i < m; ++i) digits.insert(static_cast<std::uint32_t>(x[i] - '0'));
  LabelSet out;
  for (std::uint32_t d : digits) out.push_back({d});
  return out;
}

SequenceSet task2_truth(std::string_view x) {
  if (x.size() != kTask2InputLength) {
    throw ValidationError("[tasks] task2 input must have 20 digits, got " + std::to_string(x.size()));
  }
  require_digits(x, "task2");
  const std::string_view a = x.substr(10);
  std::set<TokenSeq> out;
  for (std::size_t i = 0; i < 5; ++i) {
    const auto s = static_cast<std::size_t>(x[2 * i] - '0');
    const auto e = static_cast<std::size_t>(x[2 * i + 1] - '0');
    if (s >= e) continue;
    TokenSeq seq = digits_to_tokens(a.substr(s, e - s));
    seq.tokens.push_back(static_cast<Token>(kDigitVocab));
    out.insert(std::move(seq));
  }
  return {out.begin(), out.end()};
}

Dataset generate(const TaskSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::vector<SetSample> samples;
  samples.reserve(spec.n);
  switch (spec.task) {
    case TaskTag::threshold: {
      std::uniform_real_distribution<double> u(0.0, 10.0);
      for (std::size_t i = 0; i < spec.n; ++i) {
        const double x = u(rng);
        samples.push_back({Features{x}, threshold_truth(x).labels});
      }
      return Dataset(TaskKind::labels, 11, 1, 1, std::move(samples));
    }
    case TaskTag::task1: {
      std::uniform_int_distribution<std::size_t> lead(1, 9);
      const auto end = static_cast<Token>(kDigitVocab);
      for (std::size_t i = 0; i < spec.n; ++i) {
        const std::size_t m = lead(rng);
        std::uniform_int_distribution<std::size_t> len(std::max(spec.task1_min_len, m),
                                                       spec.task1_max_len);
        std::string x = digit_string(rng, len(rng));
        x[0] = static_cast<char>('0' + m);
        samples.push_back({digits_to_tokens(x), digit_sequences(task1_truth(x), end)});
      }
      return Dataset(TaskKind::sequences, kDigitOutputVocab, 2, kDigitVocab, std::move(samples));
    }
    case TaskTag::task2: {
      for (std::size_t i = 0; i < spec.n; ++i) {
        const std::string x = digit_string(rng, kTask2InputLength);
        samples.push_back({digits_to_tokens(x), task2_truth(x)});
      }
      return Dataset(TaskKind::sequences, kDigitOutputVocab, 11, kDigitVocab, std::move(samples));
    }
    case TaskTag::multilabel_file:
      return load_multilabel(spec.path);
  }
  throw ValidationError("[tasks] unknown task");
}

void verify_truths(const Dataset& dataset, TaskTag task) {
  const auto& samples = dataset.samples();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const SetSample& s = samples[i];
    bool ok = true;
    switch (task) {
      case TaskTag::threshold:
        ok = std::get<LabelSet>(s.y) == threshold_truth(std::get<Features>(s.x).at(0)).labels;
        break;
      case TaskTag::task1:
        ok = std::get<SequenceSet>(s.y) ==
             digit_sequences(task1_truth(digits_of(s.x)), dataset.end_token());
        break;
      case TaskTag::task2:
        ok = std::get<SequenceSet>(s.y) == task2_truth(digits_of(s.x));
        break;
      case TaskTag::multilabel_file:
        return;
    }
    if (!ok) throw ValidationError("[tasks] sample " + std::to_string(i) + " disagrees with its truth function");
  }
}

Dataset load_multilabel(std::istream& in, std::optional<std::size_t> features,
                        std::optional<std::size_t> labels) {
  struct Row {
    std::vector<std::uint32_t> labels;
    std::vector<std::pair<std::size_t, double>> entries;
  };
  std::vector<Row> rows;
  std::optional<std::size_t> declared_samples;
  std::size_t max_feature = 0, max_label = 0;
  bool any_feature = false;
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& what) {
    throw ValidationError("[tasks] multilabel line " + std::to_string(lineno) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (rows.empty() && !declared_samples && line.find(':') == std::string::npos &&
        line.find(',') == std::string::npos) {
      std::istringstream hs(line);
      std::size_t a = 0, b = 0, c = 0;
      std::string rest;
      if (hs >> a >> b >> c && !(hs >> rest)) {
        declared_samples = a;
        if (!features) features = b;
        if (!labels) labels = c;
        continue;
      }
    }
    if (line[0] == ' ' || line[0] == '\t') fail("empty label field");
    std::istringstream ls(line);
    std::string label_field;
    ls >> label_field;
    if (label_field.find(':') != std::string::npos) fail("empty label field");
    Row row;
    std::stringstream lf(label_field);
    std::string tok;
    while (std::getline(lf, tok, ',')) {
      if (tok.empty()) fail("empty label in '" + label_field + "'");
      try {
        std::size_t used = 0;
        const unsigned long v = std::stoul(tok, &used);
        if (used != tok.size()) fail("bad label '" + tok + "'");
        row.labels.push_back(static_cast<std::uint32_t>(v));
        max_label = std::max<std::size_t>(max_label, v);
      } catch (const std::logic_error&) {
        fail("bad label '" + tok + "'");
      }
    }
    std::string entry;
    while (ls >> entry) {
      const auto colon = entry.find(':');
      if (colon == std::string::npos || colon == 0 || colon + 1 == entry.size()) {
        fail("bad feature entry '" + entry + "'");
      }
      try {
        std::size_t u1 = 0, u2 = 0;
        const std::string idx = entry.substr(0, colon), val = entry.substr(colon + 1);
        const unsigned long k = std::stoul(idx, &u1);
        const double v = std::stod(val, &u2);
        if (u1 != idx.size() || u2 != val.size()) fail("bad feature entry '" + entry + "'");
        row.entries.emplace_back(k, v);
        max_feature = std::max<std::size_t>(max_feature, k);
        any_feature = true;
      } catch (const std::logic_error&) {
        fail("bad feature entry '" + entry + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ValidationError("[tasks] multilabel file has no samples");
  if (declared_samples && *declared_samples != rows.size()) {
    throw ValidationError("[tasks] multilabel header declares " + std::to_string(*declared_samples) +
                          " samples, found " + std::to_string(rows.size()));
  }
  const std::size_t d = features.value_or(any_feature ? max_feature + 1 : 1);
  const std::size_t universe = labels.value_or(max_label + 1);
  if (any_feature && max_feature >= d) {
    throw ValidationError("[tasks] feature index " + std::to_string(max_feature) +
                          " exceeds the declared dimension " + std::to_string(d));
  }
  if (max_label >= universe) {
    throw ValidationError("[tasks] label " + std::to_string(max_label) + " exceeds the declared universe " +
                          std::to_string(universe));
  }
  std::vector<SetSample> samples;
  samples.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Features x(d, 0.0);
    for (auto [k, v] : rows[i].entries) x[k] = v;
    std::vector<Label> ls;
    for (std::uint32_t l : rows[i].labels) ls.push_back({l});
    try {
      samples.push_back({std::move(x), make_label_set(std::move(ls))});
    } catch (const ValidationError& e) {
      throw ValidationError("[tasks] multilabel sample " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return Dataset(TaskKind::labels, universe, 1, d, std::move(samples));
}

Dataset load_multilabel(const std::string& path, std::optional<std::size_t> features,
                        std::optional<std::size_t> labels) {
  std::ifstream in(path);
  if (!in) throw ValidationError("[tasks] cannot open '" + path + "'");
  return load_multilabel(in, features, labels);
}

std::string digits_of(const Input& x) {
  const auto* seq = std::get_if<TokenSeq>(&x);
  if (!seq) throw ValidationError("[tasks] expected a digit-string input");
  std::string s;
  for (Token t : seq->tokens) s.push_back(static_cast<char>('0' + t));
  return s;
}

Features digit_one_hot(const TokenSeq& digits, std::size_t max_len) {
  if (digits.size() > max_len) {
    throw ValidationError("[tasks] input of length " + std::to_string(digits.size()) +
                          " exceeds the one-hot width " + std::to_string(max_len));
  }
  Features f(max_len * kDigitVocab, 0.0);
  for (std::size_t i = 0; i < digits.size(); ++i) {
    f[i * kDigitVocab + static_cast<std::size_t>(digits.tokens[i])] = 1.0;
  }
  return f;
}

Dataset task1_label_view(const Dataset& dataset, std::size_t max_len) {
  if (dataset.kind() != TaskKind::sequences) throw ValidationError("[tasks] task1 view needs sequence data");
  std::vector<SetSample> samples;
  samples.reserve(dataset.size());
  for (const SetSample& s : dataset.samples()) {
    samples.push_back({digit_one_hot(std::get<TokenSeq>(s.x), max_len),
                       digit_labels(std::get<SequenceSet>(s.y), dataset.end_token())});
  }
  return Dataset(TaskKind::labels, kDigitVocab, 1, max_len * kDigitVocab, std::move(samples));
}

LabelSet digit_labels(const SequenceSet& seqs, Token end_token) {
  std::vector<Label> out;
  for (const TokenSeq& s : seqs) {
    if (s.size() != 2 || s.tokens[1] != end_token || s.tokens[0] < 0 || s.tokens[0] >= end_token) {
      throw ValidationError("[tasks] expected one-digit sequences");
    }
    out.push_back({static_cast<std::uint32_t>(s.tokens[0])});
  }
  return make_label_set(std::move(out));
}

SequenceSet digit_sequences(const LabelSet& labels, Token end_token) {
  SequenceSet out;
  for (const Label& l : labels) out.push_back(TokenSeq{{static_cast<Token>(l.id), end_token}});
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace ssg
