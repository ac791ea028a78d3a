#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "ssg/lambda.hpp"
#include "ssg/nn.hpp"
#include "test_support.hpp"

using namespace ssg;
using ssg::testing::labels;
using ssg::testing::seq;

namespace {

PosteriorFn fixed_posterior(std::vector<double> p) {
  return [p](const Input&) { return p; };
}

std::vector<double> softmax(const std::vector<double>& z) {
  double m = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) s += (p[i] = std::exp(z[i] - m));
  for (double& v : p) v /= s;
  return p;
}

}  // namespace

TEST_CASE("records of a two-positive group") {
  const Dataset d(TaskKind::labels, 3, 1, 1, {{Features{0.0}, labels({0, 1})}});
  const auto stats = margin_stats(fixed_posterior({0.6, 0.4, 0.2}), d);
  REQUIRE(stats.records.size() == 2);
  const MarginRecord& a = stats.records[0];
  const MarginRecord& b = stats.records[1];
  CHECK(a.p == 0.6);
  CHECK(b.p == 0.4);
  for (const MarginRecord* r : {&a, &b}) {
    CHECK(r->l_pos_min == 0.4);
    CHECK(r->l_neg_max == 0.2);
    CHECK(r->p_hat == doctest::Approx(0.3).epsilon(1e-15));
  }
  CHECK(stats.skipped_groups.empty());
}

TEST_CASE("a group covering the universe is skipped and reported") {
  const Dataset d(TaskKind::labels, 2, 1, 1,
                  {{Features{0.0}, labels({0, 1})}, {Features{1.0}, labels({0})}});
  const auto stats = margin_stats(fixed_posterior({0.7, 0.3}), d);
  CHECK(stats.skipped_groups == std::vector<std::size_t>{0});
  CHECK(stats.records.size() == 1);
}

TEST_CASE("singleton positive record") {
  const Dataset d(TaskKind::labels, 3, 1, 1, {{Features{0.0}, labels({0})}});
  const auto stats = margin_stats(fixed_posterior({0.9, 0.05, 0.05}), d);
  REQUIRE(stats.records.size() == 1);
  const MarginRecord& r = stats.records[0];
  CHECK(r.p == 0.9);
  CHECK(r.l_pos_min == 0.9);
  CHECK(r.l_neg_max == 0.05);
  CHECK(r.p_hat == doctest::Approx(0.475).epsilon(1e-15));
}

TEST_CASE("solve_lambda on the two-record group") {
  const std::vector<MarginRecord> rs = {make_record(0.6, 0.4, 0.2), make_record(0.4, 0.4, 0.2)};
  const LambdaSolution s = solve_lambda(rs);
  CHECK(s.feasible);
  CHECK(s.interval.lo == doctest::Approx(0.2));
  CHECK(s.interval.hi == doctest::Approx(0.2));
  CHECK(s.lambda == doctest::Approx(0.2));
  const auto g = oracle::grid_lambda(rs);
  CHECK(std::abs(oracle::quadratic(rs, s.lambda) - g.objective) < 1e-3);
}

TEST_CASE("solve_lambda on one confident record is the interior mean") {
  const std::vector<MarginRecord> rs = {make_record(1.0, 1.0, 0.0)};
  const LambdaSolution s = solve_lambda(rs);
  CHECK(s.feasible);
  CHECK(s.interval.lo == 0.0);
  CHECK(s.interval.hi == 1.0);
  CHECK(s.lambda == doctest::Approx(0.5));
  CHECK(s.candidate == LambdaCandidate::interior);
}

TEST_CASE("an empty interval falls back to the hinge scan") {
  // lo = 0.5 - 0.2 = 0.3, hi = 0.3 - 0.2 = 0.1
  const std::vector<MarginRecord> rs = {make_record(0.5, 0.2, 0.0), make_record(0.3, 0.3, 0.2)};
  const LambdaSolution s = solve_lambda(rs);
  CHECK(s.interval.empty);
  CHECK(s.interval.lo == doctest::Approx(0.3));
  CHECK(s.interval.hi == doctest::Approx(0.1));
  CHECK_FALSE(s.feasible);
  CHECK(s.candidate == LambdaCandidate::penalized_scan);
  CHECK(s.lambda >= 0.1 - 1e-9);
  CHECK(s.lambda <= 0.3 + 1e-9);
  const auto g = oracle::grid_lambda(rs);
  CHECK_FALSE(g.feasible);
  CHECK(oracle::hinge_penalised(rs, s.lambda) <= g.objective + 1e-3);
}

TEST_CASE("boundary candidates win when the interior minimiser is outside") {
  // p - p_hat = 0.45 and 0.1, mean 0.275; hi = 0.5 - 0.3 = 0.2
  std::vector<MarginRecord> rs = {make_record(0.9, 0.9, 0.0), make_record(0.5, 0.5, 0.3)};
  LambdaSolution s = solve_lambda(rs);
  REQUIRE(s.feasible);
  CHECK(s.lambda == doctest::Approx(0.2));
  CHECK(s.candidate == LambdaCandidate::boundary_high);

  // p - p_hat = 0.75 and 0.45, mean 0.6; lo = 0.9 - 0.2 = 0.7
  rs = {make_record(0.9, 0.2, 0.1), make_record(0.9, 0.9, 0.0)};
  s = solve_lambda(rs);
  REQUIRE(s.feasible);
  CHECK(s.lambda == doctest::Approx(0.7));
  CHECK(s.candidate == LambdaCandidate::boundary_low);
}

TEST_CASE("solve_lambda rejects no records") {
  CHECK_THROWS_AS((void)solve_lambda(std::vector<MarginRecord>{}), ValidationError);
}

TEST_CASE("solve_lambda agrees with the grid oracle on random record sets") {
  std::mt19937_64 rng(2024);
  int agree = 0;
  constexpr int kTrials = 100;
  for (int trial = 0; trial < kTrials; ++trial) {
    const auto rs = oracle::random_records(rng, 1 + rng() % 50);
    const LambdaSolution s = solve_lambda(rs);
    const auto g = oracle::grid_lambda(rs);
    if (s.feasible == g.feasible) {
      ++agree;
      const double mine = s.feasible ? oracle::quadratic(rs, s.lambda) : oracle::hinge_penalised(rs, s.lambda);
      CHECK(mine <= g.objective + 1e-3);
    } else {
      CHECK(s.interval.hi - s.interval.lo < 2e-4);
    }
  }
  CHECK(agree >= 99);
}

TEST_CASE("feasible lambda keeps every margin") {
  std::mt19937_64 rng(5);
  int feasible = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    const auto rs = oracle::random_records(rng, 1 + rng() % 6);
    const LambdaSolution s = solve_lambda(rs);
    if (!s.feasible) continue;
    ++feasible;
    for (const MarginRecord& r : rs) {
      CHECK(r.p - s.lambda >= r.l_neg_max - 1e-9);
      CHECK(r.p - s.lambda <= r.l_pos_min + 1e-9);
    }
  }
  CHECK(feasible > 20);
}

TEST_CASE("solve_lambda is permutation invariant") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    auto rs = oracle::random_records(rng, 2 + rng() % 30);
    const LambdaSolution a = solve_lambda(rs);
    std::shuffle(rs.begin(), rs.end(), rng);
    const LambdaSolution b = solve_lambda(rs);
    REQUIRE(a.feasible == b.feasible);
    if (a.feasible) {
      CHECK(a.lambda == doctest::Approx(b.lambda).epsilon(1e-9));
    } else {
      // the refined scan is only as exact as its summation order
      CHECK(oracle::hinge_penalised(rs, a.lambda) == doctest::Approx(oracle::hinge_penalised(rs, b.lambda)).epsilon(1e-6));
    }
  }
}

TEST_CASE("position candidates") {
  const SequenceSet example{seq({2, 10}), seq({1, 0, 5, 5, 1, 10})};
  CHECK(position_candidates(example, seq({}), 11).positives == std::vector<Token>{1, 2});
  CHECK(position_candidates(SequenceSet{seq({2, 10})}, seq({2}), 11).positives ==
        std::vector<Token>{10});
  // "ab#", "ac#" with a=0, b=1, c=2, #=3
  const auto pc = position_candidates(SequenceSet{seq({0, 1, 3}), seq({0, 2, 3})}, seq({0}), 4);
  CHECK(pc.positives == std::vector<Token>{1, 2});
  CHECK(pc.negatives == std::vector<Token>{0, 3});
  CHECK_THROWS_AS((void)position_candidates(example, seq({3}), 11), ValidationError);
}

TEST_CASE("length-1 targets solve only the first position and carry it forward") {
  // targets are (digit, end): positions 1 and 2 have records, 3.. carried
  const Dataset d(TaskKind::sequences, 4, 4, kDigitVocab,
                  {{seq({1}), SequenceSet{seq({0, 3}), seq({1, 3})}}, {seq({2}), SequenceSet{seq({2, 3})}}});
  testing::FnScorer scorer(4, 4, [&](const Input& x, const TokenSeq& prefix) {
    const auto& xs = std::get<TokenSeq>(x);
    const SequenceSet t = xs == seq({1}) ? SequenceSet{seq({0, 3}), seq({1, 3})} : SequenceSet{seq({2, 3})};
    auto z = testing::oracle_logits(t, prefix, 4);
    for (double& v : z) v = std::max(v, -8.0);
    return z;
  });
  const PenaltyParams p = solve_lambda_per_position(scorer, d);
  REQUIRE(p.lambdas.size() == 4);
  CHECK(p.report[0].solved);
  CHECK(p.report[1].solved);
  CHECK(p.report[2].carried);
  CHECK(p.report[3].carried);
  CHECK(p.lambdas[2] == p.lambdas[1]);
  CHECK(p.lambdas[3] == p.lambdas[1]);
  CHECK(position_records(scorer, d, 1).size() == 3);
  CHECK(position_records(scorer, d, 3).empty());
}

TEST_CASE("a memorising scorer gives feasible lambdas at every position") {
  const SequenceSet targets{seq({1, 0, 5, 10}), seq({2, 10})};
  const Dataset d(TaskKind::sequences, 11, 4, kDigitVocab, {{seq({0, 4, 9}), targets}});
  testing::FnScorer scorer(11, 4, [&](const Input&, const TokenSeq& prefix) {
    auto z = testing::oracle_logits(targets, prefix, 11);
    for (double& v : z) v = std::max(v, -10.0);
    return z;
  });
  const PenaltyParams p = solve_lambda_per_position(scorer, d);
  for (const PenaltyReportEntry& e : p.report) {
    CAPTURE(e.position);
    CHECK(e.solved);
    CHECK(e.feasible);
  }
}

TEST_CASE("per-position solve reduces to the scalar solve") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 1.5);
  std::vector<SetSample> seqs;
  std::vector<SetSample> labs;
  std::vector<std::vector<double>> logits;
  for (int i = 0; i < 30; ++i) {
    std::vector<Label> ls;
    SequenceSet ss;
    for (Token t = 0; t < 5; ++t) {
      if (rng() % 3 == 0) ls.push_back({static_cast<std::uint32_t>(t)});
    }
    if (ls.empty()) ls.push_back({static_cast<std::uint32_t>(rng() % 5)});
    for (const Label& l : ls) ss.push_back(seq({static_cast<Token>(l.id), 5}));
    std::vector<double> z(6);
    for (double& v : z) v = n(rng);
    logits.push_back(z);
    seqs.push_back({seq({static_cast<Token>(i / 10), static_cast<Token>(i % 10)}), make_sequence_set(ss)});
    labs.push_back({Features{static_cast<double>(i)}, make_label_set(ls)});
  }
  const Dataset sd(TaskKind::sequences, 6, 2, kDigitVocab, seqs);
  const Dataset ld(TaskKind::labels, 6, 1, 1, labs);
  testing::FnScorer scorer(6, 2, [&](const Input& x, const TokenSeq& prefix) {
    const auto& t = std::get<TokenSeq>(x).tokens;
    if (prefix.empty()) return logits[static_cast<std::size_t>(t[0] * 10 + t[1])];
    return std::vector<double>{0, 0, 0, 0, 0, 5};
  });
  const PenaltyParams per = solve_lambda_per_position(scorer, sd);
  const auto stats = margin_stats(
      [&](const Input& x) { return softmax(logits[static_cast<std::size_t>(std::get<Features>(x)[0])]); }, ld);
  const LambdaSolution scalar = solve_lambda(stats.records);
  CHECK(per.lambdas[0] == doctest::Approx(scalar.lambda).epsilon(1e-12));
  CHECK(per.report[0].feasible == scalar.feasible);

  // a max_len = 1 dataset: every target is just the end token
  const Dataset one(TaskKind::sequences, 3, 1, kDigitVocab, {{seq({0}), SequenceSet{seq({2})}}});
  testing::FnScorer flat(3, 1, [](const Input&, const TokenSeq&) { return std::vector<double>{0.1, 0.5, 2.0}; });
  const PenaltyParams p1 = solve_lambda_per_position(flat, one);
  REQUIRE(p1.lambdas.size() == 1);
  CHECK(p1.lambdas[0] == solve_lambda(position_records(flat, one, 1)).lambda);
}

TEST_CASE("an untrained sequence model is refused") {
  SequenceModel m(SequenceShape{kDigitVocab, 3, 2}, 2, 2, 2);
  m.init(1);
  const Dataset d(TaskKind::sequences, 3, 2, kDigitVocab, {{seq({0}), SequenceSet{seq({1, 2})}}});
  CHECK_THROWS_AS((void)solve_lambda_per_position(m, d), ValidationError);
}

TEST_CASE("penalty JSON round trip and hash check") {
  PenaltyParams p = scalar_penalty(solve_lambda(std::vector<MarginRecord>{make_record(1.0, 1.0, 0.0)}), 1);
  p.model_hash = "abc";
  const PenaltyParams q = penalty_from_json(to_json(p));
  CHECK(q.lambdas == p.lambdas);
  CHECK(q.variant == p.variant);
  CHECK(q.report.at(0).candidate == LambdaCandidate::interior);
  CHECK_NOTHROW(check_penalty_hash(q, "abc", false));
  CHECK_THROWS_AS(check_penalty_hash(q, "abd", false), ValidationError);
  CHECK_NOTHROW(check_penalty_hash(q, "abd", true));
  CHECK(q.lambda_at(7) == q.lambdas[0]);
}
