#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <vector>

#include "ssg/lambda.hpp"
#include "ssg/sequence_model.hpp"

namespace ssg::testing {

inline TokenSeq seq(std::initializer_list<Token> t) { return TokenSeq{std::vector<Token>(t)}; }

inline LabelSet labels(std::initializer_list<std::uint32_t> ids) {
  std::vector<Label> v;
  for (auto i : ids) v.push_back({i});
  return make_label_set(v);
}

/// Scorer backed by a plain function of (input, prefix).
class FnScorer final : public SequenceScorer {
 public:
  using Fn = std::function<std::vector<double>(const Input&, const TokenSeq&)>;

  FnScorer(std::size_t vocab, std::size_t max_len, Fn fn)
      : vocab_(vocab), max_len_(max_len), fn_(std::move(fn)) {}

  [[nodiscard]] std::size_t vocab() const override { return vocab_; }
  [[nodiscard]] std::size_t max_len() const override { return max_len_; }
  [[nodiscard]] std::unique_ptr<Session> open(const Input& x) const override {
    return std::make_unique<FnSession>(x, fn_);
  }

 private:
  class FnSession final : public Session {
   public:
    FnSession(Input x, Fn fn) : x_(std::move(x)), fn_(std::move(fn)) {}
    std::vector<double> logits(const TokenSeq& prefix) override { return fn_(x_, prefix); }

   private:
    Input x_;
    Fn fn_;
  };

  std::size_t vocab_;
  std::size_t max_len_;
  Fn fn_;
};

/// Log-probabilities uniform over the true continuations of `prefix`; tokens
/// off every target get -infinity. Prefixes outside the targets are uniform.
inline std::vector<double> oracle_logits(const SequenceSet& targets, const TokenSeq& prefix,
                                         std::size_t vocab) {
  std::vector<Token> pos;
  try {
    pos = position_candidates(targets, prefix, vocab).positives;
  } catch (const ValidationError&) {
    return std::vector<double>(vocab, 0.0);
  }
  std::vector<double> z(vocab, -std::numeric_limits<double>::infinity());
  for (Token t : pos) z[static_cast<std::size_t>(t)] = -std::log(static_cast<double>(pos.size()));
  return z;
}

}  // namespace ssg::testing
