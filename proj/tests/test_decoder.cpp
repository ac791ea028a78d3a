#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "ssg/decoder.hpp"
#include "ssg/tasks.hpp"
#include "test_support.hpp"

using namespace ssg;
using ssg::testing::labels;
using ssg::testing::seq;

namespace {

const std::vector<double> kAbc = {0.5, 0.3, 0.2};

std::vector<double> random_probs(std::mt19937_64& rng, std::size_t n) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> p(n);
  double s = 0.0;
  for (double& v : p) s += (v = e(rng));
  for (double& v : p) v /= s;
  return p;
}

}  // namespace

TEST_CASE("penalised argmax hand trace") {
  DecodeState st;
  CHECK(penalized_argmax(kAbc, st, 0.25) == 0);
  CHECK_FALSE(st.record(0));
  CHECK(penalized_argmax(kAbc, st, 0.25) == 1);
  CHECK_FALSE(st.record(1));
  CHECK(penalized_argmax(kAbc, st, 0.25) == 0);
  CHECK(st.record(0));
  CHECK(st.count(0) == 2);
  CHECK(st.total() == 3);
}

TEST_CASE("penalised argmax breaks ties toward the smallest id") {
  DecodeState st;
  const std::vector<double> p = {0.25, 0.25, 0.5};
  st.record(2);
  CHECK(penalized_argmax(p, st, 0.25) == 0);
}

TEST_CASE("decode_set hand traces for rho 0 and 0.5") {
  const auto r0 = decode_set(kAbc, 0.25, 0.0);
  CHECK(r0.predicted == labels({0, 1}));
  CHECK(r0.trace == std::vector<std::uint32_t>{0, 1, 0});
  CHECK(r0.repeats == 1);
  CHECK_FALSE(r0.truncated);

  const auto r5 = decode_set(kAbc, 0.25, 0.5);
  CHECK(r5.trace == std::vector<std::uint32_t>{0, 1, 0});
  CHECK(r5.predicted == labels({0, 1}));
}

TEST_CASE("the first element always enters the memory") {
  const std::vector<double> p = {0.9, 0.05, 0.05};
  // lambda below the top gap: a singleton after one repeat
  auto r = decode_set(p, 0.5, 0.0);
  CHECK(r.predicted == labels({0}));
  CHECK(r.trace == std::vector<std::uint32_t>{0, 0});
  // lambda above every probability: the first element still counts
  r = decode_set(p, 2.0, 0.0);
  CHECK(r.trace.front() == 0);
  CHECK(std::binary_search(r.predicted.begin(), r.predicted.end(), Label{0}));
}

TEST_CASE("decode_set truncates at max_iters and validates inputs") {
  const auto r = decode_set(kAbc, 0.25, 0.0, 2);
  CHECK(r.truncated);
  CHECK(r.iterations == 2);
  CHECK_THROWS_AS((void)decode_set(kAbc, 0.25, 1.0), ValidationError);
  CHECK_THROWS_AS((void)decode_set(kAbc, std::nan(""), 0.0), ValidationError);
}

TEST_CASE("rho 0 decoding is step-identical to plain memory decoding") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 0.6);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto p = random_probs(rng, 2 + rng() % 12);
    const double lambda = u(rng);
    const auto mine = decode_set(p, lambda, 0.0, 200);
    CHECK(mine.trace == oracle::plain_decode_trace(p, lambda, 200));
  }
}

TEST_CASE("rho 0.5 never drops an element produced at rho 0") {
  std::mt19937_64 rng(78);
  std::uniform_real_distribution<double> u(0.0, 0.6);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto p = random_probs(rng, 2 + rng() % 12);
    const double lambda = u(rng);
    const auto a = decode_set(p, lambda, 0.0, 200);
    const auto b = decode_set(p, lambda, 0.5, 200);
    CHECK(std::includes(b.predicted.begin(), b.predicted.end(), a.predicted.begin(), a.predicted.end()));
    // the rho 0 trace is a prefix of the rho 0.5 trace
    REQUIRE(b.trace.size() >= a.trace.size());
    CHECK(std::equal(a.trace.begin(), a.trace.end(), b.trace.begin()));
  }
}

TEST_CASE("decode_set is order-free under relabelling") {
  std::mt19937_64 rng(79);
  std::uniform_real_distribution<double> u(0.0, 0.4);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 3 + rng() % 8;
    const auto p = random_probs(rng, n);
    const double lambda = u(rng);
    std::vector<std::uint32_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0u);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> q(n);
    for (std::size_t i = 0; i < n; ++i) q[perm[i]] = p[i];
    const auto a = decode_set(p, lambda, 0.0);
    const auto b = decode_set(q, lambda, 0.0);
    std::vector<Label> mapped;
    for (const Label& l : a.predicted) mapped.push_back({perm[l.id]});
    CHECK(make_label_set(mapped) == b.predicted);
  }
}

TEST_CASE("an oracle posterior with its calibrated lambda decodes every set exactly") {
  const Dataset d = generate(TaskSpec{TaskTag::threshold, 300, 3});
  const PosteriorFn oracle_posterior = [&](const Input& x) {
    const auto y = threshold_truth(std::get<Features>(x)[0]).labels;
    std::vector<double> p(11, 0.0);
    for (const Label& l : y) p[l.id] = 1.0 / static_cast<double>(y.size());
    return p;
  };
  const LambdaSolution sol = solve_lambda(margin_stats(oracle_posterior, d).records);
  REQUIRE(sol.feasible);
  for (const SetSample& s : d.samples()) {
    CHECK(decode_set(oracle_posterior(s.x), sol.lambda, 0.0).predicted == std::get<LabelSet>(s.y));
  }
}

TEST_CASE("oracle gate reproduces the worked substring set") {
  const SequenceSet targets = task2_truth("00490000349172105519");
  REQUIRE(targets == SequenceSet{seq({1, 0, 5, 5, 1, 10}), seq({2, 10})});
  testing::FnScorer scorer(11, 11, [](const Input&, const TokenSeq&) { return std::vector<double>(11, 0.0); });
  const auto r = decode_sequence_set(scorer, oracle_gate(targets), Input{seq({0})}, 11);
  CHECK(r.predicted == targets);
  // "", "1", "10", "105", "1055", "10551", "2"
  CHECK(r.expanded == 7);
  CHECK(r.rejected_branches == 0);
  CHECK_FALSE(r.truncated());
}

TEST_CASE("per-position penalties on an oracle scorer decode exactly") {
  const SequenceSet targets = task2_truth("00490000349172105519");
  const Dataset d(TaskKind::sequences, 11, 11, kDigitVocab, {{seq({0}), targets}});
  testing::FnScorer scorer(11, 11, [&](const Input&, const TokenSeq& prefix) {
    return testing::oracle_logits(targets, prefix, 11);
  });
  const PenaltyParams p = solve_lambda_per_position(scorer, d);
  const auto r = decode_sequence_set(scorer, p, Input{seq({0})}, 11, 0.0);
  CHECK(r.predicted == targets);
}

TEST_CASE("a memorising scorer decodes to its single sequence") {
  const TokenSeq target = seq({4, 4, 1, 10});
  testing::FnScorer scorer(11, 6, [&](const Input&, const TokenSeq& prefix) {
    std::vector<double> z(11, -3.0);
    if (prefix.size() < target.size()) z[static_cast<std::size_t>(target.tokens[prefix.size()])] = 4.0;
    return z;
  });
  const Dataset d(TaskKind::sequences, 11, 6, kDigitVocab, {{seq({1}), SequenceSet{target}}});
  const PenaltyParams p = solve_lambda_per_position(scorer, d);
  const auto r = decode_sequence_set(scorer, p, Input{seq({1})}, 6, 0.0);
  CHECK(r.predicted == SequenceSet{target});
}

TEST_CASE("rejecting every branch yields the empty set with a flag") {
  testing::FnScorer scorer(5, 4, [](const Input&, const TokenSeq&) { return std::vector<double>(5, 0.0); });
  const TokenGate none = [](const Input&, const TokenSeq&, std::span<const double>, std::size_t) {
    return std::vector<Token>{};
  };
  const auto r = decode_sequence_set(scorer, none, Input{seq({1})}, 4);
  CHECK(r.predicted.empty());
  CHECK(r.rejected_branches == 1);
  CHECK(r.expanded == 1);
}

TEST_CASE("branches that never end are counted as truncated") {
  testing::FnScorer scorer(3, 3, [](const Input&, const TokenSeq&) { return std::vector<double>{5.0, 0.0, 0.0}; });
  const TokenGate always_zero = [](const Input&, const TokenSeq&, std::span<const double>, std::size_t) {
    return std::vector<Token>{0};
  };
  const auto r = decode_sequence_set(scorer, always_zero, Input{seq({1})}, 3);
  CHECK(r.predicted.empty());
  CHECK(r.truncated_branches == 1);
  CHECK(r.truncated());
  CHECK_THROWS_AS((void)decode_sequence_set(scorer, always_zero, Input{seq({1})}, 4), ValidationError);
}

TEST_CASE("an accept-all gate stops at the expansion budget") {
  testing::FnScorer scorer(11, 11, [](const Input&, const TokenSeq&) { return std::vector<double>(11, 0.0); });
  const TokenGate all = [](const Input&, const TokenSeq&, std::span<const double>, std::size_t) {
    std::vector<Token> t(11);
    std::iota(t.begin(), t.end(), Token{0});
    return t;
  };
  const auto r = decode_sequence_set(scorer, all, Input{seq({1})}, 11, 50);
  CHECK(r.expanded == 50);
  CHECK(r.budget_exhausted);
  CHECK(r.truncated());
  // root plus 10 nodes at depth 1 expanded fully, then 39 of the 100 at depth 2
  CHECK(r.predicted.size() == 1 + 10 + 39);
  CHECK(r.truncated_branches == 100 - 39 + 39 * 10);
  CHECK_THROWS_AS((void)decode_sequence_set(scorer, all, Input{seq({1})}, 11, 0), ValidationError);

  const auto small = decode_sequence_set(scorer, all, Input{seq({1})}, 2);
  CHECK_FALSE(small.budget_exhausted);
  CHECK(small.expanded == 11);
}

TEST_CASE("branches keep separate memories") {
  // both branches "0" and "1" must be able to emit the same continuation 2
  const SequenceSet targets{seq({0, 2, 3}), seq({1, 2, 3})};
  const Dataset d(TaskKind::sequences, 4, 3, kDigitVocab, {{seq({0}), targets}});
  testing::FnScorer scorer(4, 3, [&](const Input&, const TokenSeq& prefix) {
    return testing::oracle_logits(targets, prefix, 4);
  });
  const auto r = decode_sequence_set(scorer, solve_lambda_per_position(scorer, d), Input{seq({0})}, 3, 0.0);
  CHECK(r.predicted == targets);
}

TEST_CASE("answer trie shares prefixes") {
  AnswerTrie t;
  const auto a = t.extend(AnswerTrie::root(), 1);
  CHECK(t.extend(AnswerTrie::root(), 1) == a);
  const auto b = t.extend(a, 3);
  CHECK(t.path(b) == seq({1, 3}));
  CHECK(t.node(b).depth == 2);
  t.complete(b);
  t.complete(b);
  CHECK(t.completed() == SequenceSet{seq({1, 3})});
  CHECK(t.size() == 3);
}
