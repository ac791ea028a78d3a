#include "ssg/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>

#include <nlohmann/json.hpp>

namespace ssg {

std::string_view to_string(TaskKind kind) {
  return kind == TaskKind::labels ? "labels" : "sequences";
}

TaskKind task_kind_from_string(std::string_view s) {
  if (s == "labels") return TaskKind::labels;
  if (s == "sequences") return TaskKind::sequences;
  throw ValidationError("[core] unknown dataset kind '" + std::string(s) + "'");
}

namespace {

std::string at_sample(std::size_t i) { return " (sample " + std::to_string(i) + ")"; }

void validate_sample(const SetSample& s, std::size_t i, TaskKind kind, std::size_t universe,
                     std::size_t max_len, std::size_t input_dim) {
  if (kind == TaskKind::labels) {
    const auto* x = std::get_if<Features>(&s.x);
    const auto* y = std::get_if<LabelSet>(&s.y);
    if (x == nullptr || y == nullptr) {
      throw ValidationError("[core] label dataset holds a non-label sample" + at_sample(i));
    }
    if (x->size() != input_dim) {
      throw ValidationError("[core] feature dimension " + std::to_string(x->size()) +
                            " != " + std::to_string(input_dim) + at_sample(i));
    }
    if (y->empty()) throw ValidationError("[core] empty target set" + at_sample(i));
    for (const Label& l : *y) {
      if (l.id >= universe) {
        throw ValidationError("[core] label " + std::to_string(l.id) + " outside universe " +
                              std::to_string(universe) + at_sample(i));
      }
    }
    if (!std::is_sorted(y->begin(), y->end()) ||
        std::adjacent_find(y->begin(), y->end()) != y->end()) {
      throw ValidationError("[core] target set not sorted/duplicate-free" + at_sample(i));
    }
    return;
  }
  const auto* x = std::get_if<TokenSeq>(&s.x);
  const auto* y = std::get_if<SequenceSet>(&s.y);
  if (x == nullptr || y == nullptr) {
    throw ValidationError("[core] sequence dataset holds a non-sequence sample" + at_sample(i));
  }
  for (Token t : x->tokens) {
    if (t < 0 || static_cast<std::size_t>(t) >= input_dim) {
      throw ValidationError("[core] input token outside input vocabulary" + at_sample(i));
    }
  }
  const auto end = static_cast<Token>(universe - 1);
  for (const TokenSeq& seq : *y) {
    if (seq.empty() || seq.tokens.back() != end) {
      throw ValidationError("[core] target sequence lacks end token" + at_sample(i));
    }
    if (seq.size() > max_len) {
      throw ValidationError("[core] target sequence longer than max_len " +
                            std::to_string(max_len) + at_sample(i));
    }
    for (std::size_t k = 0; k < seq.size(); ++k) {
      const Token t = seq.tokens[k];
      if (t < 0 || static_cast<std::size_t>(t) >= universe) {
        throw ValidationError("[core] token outside vocabulary" + at_sample(i));
      }
      if (t == end && k + 1 != seq.size()) {
        throw ValidationError("[core] interior end token" + at_sample(i));
      }
    }
  }
  if (!std::is_sorted(y->begin(), y->end()) ||
      std::adjacent_find(y->begin(), y->end()) != y->end()) {
    throw ValidationError("[core] target set not sorted/duplicate-free" + at_sample(i));
  }
}

}  // namespace

Dataset::Dataset(TaskKind kind, std::size_t universe, std::size_t max_len, std::size_t input_dim,
                 std::vector<SetSample> samples)
    : kind_(kind),
      universe_(universe),
      max_len_(max_len),
      input_dim_(input_dim),
      samples_(std::move(samples)) {
  if (universe_ == 0) throw ValidationError("[core] universe size must be positive");
  if (kind_ == TaskKind::sequences && universe_ < 2) {
    throw ValidationError("[core] sequence vocabulary needs at least one token plus end");
  }
  if (max_len_ == 0) throw ValidationError("[core] max_len must be positive");
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    validate_sample(samples_[i], i, kind_, universe_, max_len_, input_dim_);
  }
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  std::vector<SetSample> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(samples_.at(i));
  return Dataset(kind_, universe_, max_len_, input_dim_, std::move(out));
}

LabelSet make_label_set(std::vector<Label> labels) {
  std::sort(labels.begin(), labels.end());
  if (std::adjacent_find(labels.begin(), labels.end()) != labels.end()) {
    throw ValidationError("[core] duplicate label in target set");
  }
  return labels;
}

SequenceSet make_sequence_set(std::vector<TokenSeq> seqs) {
  std::sort(seqs.begin(), seqs.end());
  if (std::adjacent_find(seqs.begin(), seqs.end()) != seqs.end()) {
    throw ValidationError("[core] duplicate sequence in target set");
  }
  return seqs;
}

std::size_t target_size(const TargetSet& y) {
  return std::visit([](const auto& v) { return v.size(); }, y);
}

std::vector<FlatPair> flatten(const Dataset& dataset) {
  if (dataset.empty()) throw ValidationError("[core] cannot flatten an empty dataset");
  std::vector<FlatPair> flat;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const SetSample& s = dataset.samples()[i];
    if (dataset.kind() == TaskKind::labels) {
      const auto& y = std::get<LabelSet>(s.y);
      if (y.empty()) throw ValidationError("[core] empty target set" + at_sample(i));
      for (const Label& l : y) flat.push_back({s.x, l, i});
    } else {
      for (const TokenSeq& t : std::get<SequenceSet>(s.y)) flat.push_back({s.x, t, i});
    }
  }
  return flat;
}

std::map<std::size_t, GroupTargets> group_by_input(const std::vector<FlatPair>& flat,
                                                   std::size_t universe) {
  std::map<std::size_t, std::vector<const Element*>> members;
  for (const FlatPair& p : flat) members[p.group_id].push_back(&p.y);

  std::map<std::size_t, GroupTargets> groups;
  for (const auto& [gid, elems] : members) {
    GroupTargets g;
    if (std::holds_alternative<Label>(*elems.front())) {
      LabelSet pos;
      for (const Element* e : elems) pos.push_back(std::get<Label>(*e));
      std::sort(pos.begin(), pos.end());
      pos.erase(std::unique(pos.begin(), pos.end()), pos.end());
      for (std::uint32_t id = 0; id < universe; ++id) {
        if (!std::binary_search(pos.begin(), pos.end(), Label{id})) g.negatives.push_back({id});
      }
      g.positives = std::move(pos);
    } else {
      SequenceSet pos;
      for (const Element* e : elems) pos.push_back(std::get<TokenSeq>(*e));
      std::sort(pos.begin(), pos.end());
      pos.erase(std::unique(pos.begin(), pos.end()), pos.end());
      g.positives = std::move(pos);
    }
    groups.emplace(gid, std::move(g));
  }
  return groups;
}

TokenSeq parse_tokens(std::string_view text, std::size_t vocab, bool append_end) {
  const auto end = static_cast<Token>(vocab - 1);
  TokenSeq seq;
  for (char c : text) {
    Token t = 0;
    if (c >= '0' && c <= '9') {
      t = c - '0';
    } else if (c >= 'a' && c <= 'z') {
      t = 10 + (c - 'a');
    } else if (c == '#') {
      t = end;
    } else {
      throw ValidationError(std::string("[core] invalid token character '") + c + "'");
    }
    if (t >= static_cast<Token>(vocab)) {
      throw ValidationError(std::string("[core] token '") + c + "' outside vocabulary");
    }
    seq.tokens.push_back(t);
  }
  if (append_end) seq.tokens.push_back(end);
  return seq;
}

std::string format_tokens(const TokenSeq& seq, std::size_t vocab, bool strip) {
  const auto end = static_cast<Token>(vocab - 1);
  std::string out;
  for (std::size_t k = 0; k < seq.size(); ++k) {
    const Token t = seq.tokens[k];
    if (t == end) {
      if (strip && k + 1 == seq.size()) break;
      out.push_back('#');
    } else if (t < 10) {
      out.push_back(static_cast<char>('0' + t));
    } else {
      out.push_back(static_cast<char>('a' + (t - 10)));
    }
  }
  return out;
}

TokenSeq strip_end(const TokenSeq& seq, Token end_token) {
  TokenSeq out = seq;
  if (!out.empty() && out.tokens.back() == end_token) out.tokens.pop_back();
  return out;
}

void write_jsonl(std::ostream& out, const Dataset& dataset) {
  nlohmann::ordered_json header;
  header["kind"] = std::string(to_string(dataset.kind()));
  header["universe"] = dataset.universe();
  header["max_len"] = dataset.max_len();
  out << header.dump() << '\n';
  for (const SetSample& s : dataset.samples()) {
    nlohmann::ordered_json line;
    if (dataset.kind() == TaskKind::labels) {
      line["x"] = std::get<Features>(s.x);
      auto ys = nlohmann::ordered_json::array();
      for (const Label& l : std::get<LabelSet>(s.y)) ys.push_back(l.id);
      line["y"] = ys;
    } else {
      line["x"] = format_tokens(std::get<TokenSeq>(s.x), kDigitVocab + 1, false);
      auto ys = nlohmann::ordered_json::array();
      for (const TokenSeq& t : std::get<SequenceSet>(s.y)) {
        ys.push_back(format_tokens(t, dataset.universe(), true));
      }
      line["y"] = ys;
    }
    out << line.dump() << '\n';
  }
}

Dataset read_jsonl(std::istream& in) {
  std::string text;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& what) {
    throw ValidationError("[core] dataset line " + std::to_string(lineno) + ": " + what);
  };
  nlohmann::json header;
  while (std::getline(in, text)) {
    ++lineno;
    if (text.empty()) continue;
    try {
      header = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      fail(e.what());
    }
    break;
  }
  if (header.is_null()) throw ValidationError("[core] dataset file has no header line");
  TaskKind kind{};
  std::size_t universe = 0;
  std::size_t max_len = 0;
  try {
    kind = task_kind_from_string(header.at("kind").get<std::string>());
    universe = header.at("universe").get<std::size_t>();
    max_len = header.at("max_len").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("bad header: ") + e.what());
  }

  std::vector<SetSample> samples;
  std::size_t input_dim = kind == TaskKind::labels ? 0 : kDigitVocab;
  while (std::getline(in, text)) {
    ++lineno;
    if (text.empty()) continue;
    try {
      const auto line = nlohmann::json::parse(text);
      SetSample s;
      if (kind == TaskKind::labels) {
        auto x = line.at("x").get<Features>();
        if (samples.empty()) input_dim = x.size();
        std::vector<Label> ys;
        for (const auto& v : line.at("y")) ys.push_back({v.get<std::uint32_t>()});
        s.x = std::move(x);
        s.y = make_label_set(std::move(ys));
      } else {
        s.x = parse_tokens(line.at("x").get<std::string>(), kDigitVocab + 1, false);
        std::vector<TokenSeq> ys;
        for (const auto& v : line.at("y")) {
          ys.push_back(parse_tokens(v.get<std::string>(), universe, true));
        }
        s.y = make_sequence_set(std::move(ys));
      }
      validate_sample(s, samples.size(), kind, universe, max_len, input_dim);
      samples.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      fail(e.what());
    } catch (const ValidationError& e) {
      fail(e.what());
    }
  }
  return Dataset(kind, universe, max_len, input_dim, std::move(samples));
}

void save_dataset(const std::string& path, const Dataset& dataset) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("[core] cannot write " + path);
  write_jsonl(out, dataset);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("[core] cannot open " + path);
  return read_jsonl(in);
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::size_t n, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ValidationError("[core] split fraction must lie in (0,1)");
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto n_train = static_cast<std::size_t>(train_fraction * static_cast<double>(n) + 0.5);
  std::vector<std::size_t> train(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {std::move(train), std::move(test)};
}

}  // namespace ssg
