#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "ssg/label_model.hpp"
#include "ssg/lambda.hpp"
#include "ssg/sequence_model.hpp"

namespace ssg {

/// Memory of produced elements with production counters.
/// Invariants: z is duplicate-free, counts.size() == z.size(), counts >= 1.
struct DecodeState {
  std::vector<std::uint32_t> z;
  std::vector<std::uint32_t> counts;
  double rho = 0.0;

  [[nodiscard]] std::uint32_t count(std::uint32_t id) const;
  [[nodiscard]] std::size_t total() const;
  /// Adds a new element or bumps the counter of a repeat; returns true on repeat.
  bool record(std::uint32_t id);
  /// sum(C) >= (1 + rho) |Z|; only meaningful right after a repeat.
  [[nodiscard]] bool should_stop() const;
};

/// argmax_y probs[y] - lambda * C(y), smallest id on ties.
[[nodiscard]] std::uint32_t penalized_argmax(std::span<const double> probs,
                                             const DecodeState& state, double lambda);

struct GatherResult {
  std::vector<std::uint32_t> produced;  // Z in production order
  std::vector<std::uint32_t> trace;     // every argmax, repeats included
  std::size_t repeats = 0;
  bool truncated = false;
};

/// Repeated penalised argmax on one distribution until the stopping rule fires
/// or `max_iters` productions have been made.
[[nodiscard]] GatherResult gather(std::span<const double> probs, double lambda, double rho,
                                  std::size_t max_iters);

struct LabelDecodeResult {
  LabelSet predicted;
  std::vector<std::uint32_t> trace;
  std::size_t iterations = 0;
  std::size_t repeats = 0;
  bool truncated = false;
};

[[nodiscard]] LabelDecodeResult decode_set(std::span<const double> probs, double lambda, double rho,
                                           std::optional<std::size_t> max_iters = std::nullopt);
[[nodiscard]] LabelDecodeResult decode_set(const LabelModel& model, double lambda,
                                           const Features& x, double rho,
                                           std::optional<std::size_t> max_iters = std::nullopt);

/// Partial answers of one input, one node per distinct prefix.
class AnswerTrie {
 public:
  struct Node {
    Token token = -1;
    std::size_t parent = 0;
    std::size_t depth = 0;
    std::map<Token, std::size_t> children;
  };

  AnswerTrie();
  [[nodiscard]] static constexpr std::size_t root() { return 0; }
  /// Child of `node` along `t`, created on first use.
  std::size_t extend(std::size_t node, Token t);
  [[nodiscard]] TokenSeq path(std::size_t node) const;
  [[nodiscard]] const Node& node(std::size_t i) const { return nodes_.at(i); }
  [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }

  void complete(std::size_t node);  // node's path ends with the end token
  [[nodiscard]] SequenceSet completed() const;

 private:
  std::vector<Node> nodes_;
  std::vector<std::size_t> completed_;
};

/// Chooses the continuation tokens of one partial answer. Receives the input,
/// the prefix, the scorer's logits at the next position and that position
/// (1-based).
using TokenGate = std::function<std::vector<Token>(const Input& x, const TokenSeq& prefix,
                                                   std::span<const double> logits,
                                                   std::size_t position)>;

struct SequenceDecodeResult {
  SequenceSet predicted;     // complete sequences, end token included
  std::size_t iterations = 0;  // penalised argmax calls
  std::size_t repeats = 0;
  std::size_t expanded = 0;           // (partial, position) pairs scored
  std::size_t truncated_branches = 0;  // reached max_len without the end token
  std::size_t rejected_branches = 0;   // gathered nothing
  bool gather_truncated = false;
  bool budget_exhausted = false;  // stopped at max_expanded; leftover frontier counted as truncated
  [[nodiscard]] bool truncated() const {
    return truncated_branches > 0 || gather_truncated || budget_exhausted;
  }
};

/// Cap on scored (partial, position) pairs per input. A gate that accepts most
/// tokens would otherwise grow the trie as vocab^max_len.
inline constexpr std::size_t kDefaultMaxExpanded = 4096;

/// Breadth-wise expansion: every live partial gathers its continuation tokens
/// with a fresh per-branch memory and lambda at that position.
[[nodiscard]] SequenceDecodeResult decode_sequence_set(const SequenceScorer& scorer,
                                                       const PenaltyParams& penalty,
                                                       const Input& x, std::size_t max_len,
                                                       double rho,
                                                       std::size_t max_expanded = kDefaultMaxExpanded);
/// Gate-driven expansion (learned penalties or oracles).
[[nodiscard]] SequenceDecodeResult decode_sequence_set(const SequenceScorer& scorer,
                                                       const TokenGate& gate, const Input& x,
                                                       std::size_t max_len,
                                                       std::size_t max_expanded = kDefaultMaxExpanded);

/// Gate returning position_candidates positives for fixed targets.
[[nodiscard]] TokenGate oracle_gate(SequenceSet targets);

}  // namespace ssg
