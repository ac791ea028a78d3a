#include "ssg/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ssg/nn.hpp"

namespace ssg {

std::uint32_t DecodeState::count(std::uint32_t id) const {
  for (std::size_t k = 0; k < z.size(); ++k) {
    if (z[k] == id) return counts[k];
  }
  return 0;
}

std::size_t DecodeState::total() const {
  std::size_t t = 0;
  for (std::uint32_t c : counts) t += c;
  return t;
}

bool DecodeState::record(std::uint32_t id) {
  for (std::size_t k = 0; k < z.size(); ++k) {
    if (z[k] == id) {
      ++counts[k];
      return true;
    }
  }
  z.push_back(id);
  counts.push_back(1);
  return false;
}

bool DecodeState::should_stop() const {
  return static_cast<double>(total()) >= (1.0 + rho) * static_cast<double>(z.size());
}

std::uint32_t penalized_argmax(std::span<const double> probs, const DecodeState& state,
                               double lambda) {
  std::uint32_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::uint32_t y = 0; y < probs.size(); ++y) {
    const double score = probs[y] - lambda * static_cast<double>(state.count(y));
    if (score > best_score) {
      best_score = score;
      best = y;
    }
  }
  return best;
}

GatherResult gather(std::span<const double> probs, double lambda, double rho,
                    std::size_t max_iters) {
  if (!(rho >= 0.0 && rho < 1.0)) throw ValidationError("[decoder] rho must lie in [0,1)");
  GatherResult out;
  DecodeState state;
  state.rho = rho;
  while (true) {
    if (out.trace.size() >= max_iters) {
      out.truncated = true;
      break;
    }
    const std::uint32_t y = penalized_argmax(probs, state, lambda);
    out.trace.push_back(y);
    if (state.record(y)) {
      ++out.repeats;
      if (state.should_stop()) break;
    }
  }
  out.produced = state.z;
  return out;
}

LabelDecodeResult decode_set(std::span<const double> probs, double lambda, double rho,
                             std::optional<std::size_t> max_iters) {
  if (!std::isfinite(lambda)) throw ValidationError("[decoder] lambda must be finite");
  const GatherResult g = gather(probs, lambda, rho, max_iters.value_or(probs.size() * 4));
  LabelDecodeResult r;
  for (std::uint32_t y : g.produced) r.predicted.push_back({y});
  std::sort(r.predicted.begin(), r.predicted.end());
  r.trace = g.trace;
  r.iterations = g.trace.size();
  r.repeats = g.repeats;
  r.truncated = g.truncated;
  return r;
}

LabelDecodeResult decode_set(const LabelModel& model, double lambda, const Features& x,
                             double rho, std::optional<std::size_t> max_iters) {
  const auto probs = model.posterior(x);
  return decode_set(probs, lambda, rho, max_iters);
}

AnswerTrie::AnswerTrie() { nodes_.push_back(Node{}); }

std::size_t AnswerTrie::extend(std::size_t node, Token t) {
  if (auto it = nodes_.at(node).children.find(t); it != nodes_[node].children.end()) {
    return it->second;
  }
  Node child;
  child.token = t;
  child.parent = node;
  child.depth = nodes_[node].depth + 1;
  nodes_.push_back(child);
  const std::size_t id = nodes_.size() - 1;
  nodes_[node].children.emplace(t, id);
  return id;
}

TokenSeq AnswerTrie::path(std::size_t node) const {
  TokenSeq seq;
  for (std::size_t n = node; n != root(); n = nodes_.at(n).parent) {
    seq.tokens.push_back(nodes_[n].token);
  }
  std::reverse(seq.tokens.begin(), seq.tokens.end());
  return seq;
}

void AnswerTrie::complete(std::size_t node) { completed_.push_back(node); }

SequenceSet AnswerTrie::completed() const {
  SequenceSet out;
  for (std::size_t n : completed_) out.push_back(path(n));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

namespace {

using Chooser = std::function<std::vector<Token>(const TokenSeq& prefix,
                                                 const std::vector<double>& logits,
                                                 std::size_t position, SequenceDecodeResult& res)>;

SequenceDecodeResult expand(const SequenceScorer& scorer, const Input& x, std::size_t max_len,
                            std::size_t max_expanded, const Chooser& choose) {
  if (max_len == 0 || max_len > scorer.max_len()) {
    throw ValidationError("[decoder] max_len must lie in [1, scorer max_len]");
  }
  if (max_expanded == 0) throw ValidationError("[decoder] max_expanded must be positive");
  const auto end = static_cast<Token>(scorer.vocab() - 1);
  auto session = scorer.open(x);
  SequenceDecodeResult res;
  AnswerTrie trie;
  std::vector<std::size_t> frontier{AnswerTrie::root()};
  for (std::size_t position = 1; position <= max_len && !frontier.empty(); ++position) {
    std::vector<std::size_t> next;
    for (std::size_t i = 0; i < frontier.size(); ++i) {
      if (res.expanded == max_expanded) {
        res.budget_exhausted = true;
        res.truncated_branches += frontier.size() - i + next.size();
        next.clear();
        break;
      }
      const std::size_t node = frontier[i];
      const TokenSeq prefix = trie.path(node);
      const auto logits = session->logits(prefix);
      ++res.expanded;
      const std::vector<Token> tokens = choose(prefix, logits, position, res);
      if (tokens.empty()) {
        ++res.rejected_branches;
        continue;
      }
      for (Token t : tokens) {
        const std::size_t child = trie.extend(node, t);
        if (t == end) {
          trie.complete(child);
        } else if (position == max_len) {
          ++res.truncated_branches;
        } else {
          next.push_back(child);
        }
      }
    }
    frontier = std::move(next);
  }
  res.predicted = trie.completed();
  return res;
}

}  // namespace

SequenceDecodeResult decode_sequence_set(const SequenceScorer& scorer,
                                         const PenaltyParams& penalty, const Input& x,
                                         std::size_t max_len, double rho,
                                         std::size_t max_expanded) {
  if (penalty.variant == PenaltyParams::Variant::learned) {
    throw ValidationError("[decoder] learned penalties decode through a token gate");
  }
  return expand(scorer, x, max_len, max_expanded,
                [&](const TokenSeq&, const std::vector<double>& logits, std::size_t position,
                    SequenceDecodeResult& res) {
                  const nn::Vec p = nn::softmax(
                      nn::ConstVecView(logits.data(), static_cast<Eigen::Index>(logits.size())));
                  const GatherResult g =
                      gather(std::span<const double>(p.data(), static_cast<std::size_t>(p.size())),
                             penalty.lambda_at(position), rho, logits.size() * 4);
                  res.iterations += g.trace.size();
                  res.repeats += g.repeats;
                  res.gather_truncated = res.gather_truncated || g.truncated;
                  return std::vector<Token>(g.produced.begin(), g.produced.end());
                });
}

SequenceDecodeResult decode_sequence_set(const SequenceScorer& scorer, const TokenGate& gate,
                                         const Input& x, std::size_t max_len,
                                         std::size_t max_expanded) {
  return expand(scorer, x, max_len, max_expanded,
                [&](const TokenSeq& prefix, const std::vector<double>& logits,
                    std::size_t position, SequenceDecodeResult& res) {
                  ++res.iterations;
                  auto tokens = gate(x, prefix, logits, position);
                  std::sort(tokens.begin(), tokens.end());
                  tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
                  return tokens;
                });
}

TokenGate oracle_gate(SequenceSet targets) {
  return [targets = std::move(targets)](const Input&, const TokenSeq& prefix,
                                               std::span<const double>, std::size_t) {
    std::vector<Token> out;
    for (const TokenSeq& t : targets) {
      if (t.size() > prefix.size() &&
          std::equal(prefix.tokens.begin(), prefix.tokens.end(), t.tokens.begin())) {
        out.push_back(t.tokens[prefix.size()]);
      }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  };
}

}  // namespace ssg
