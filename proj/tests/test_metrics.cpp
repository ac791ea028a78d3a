#include <doctest.h>

#include <random>
#include <string>

#include "oracles.hpp"
#include "ssg/metrics.hpp"
#include "test_support.hpp"

using namespace ssg;
using ssg::testing::labels;
using ssg::testing::seq;

namespace {

TokenSeq text(std::string_view s) {
  TokenSeq t;
  for (char c : s) t.tokens.push_back(c - 'a');
  return t;
}

std::string random_string(std::mt19937_64& rng, std::size_t max_len, int alphabet) {
  std::string s(rng() % (max_len + 1), 'a');
  for (char& c : s) c = static_cast<char>('a' + rng() % alphabet);
  return s;
}

}  // namespace

TEST_CASE("f1_set examples") {
  CHECK(f1_set(std::vector<int>{3, 8}, std::vector<int>{3, 8}) == 1.0);
  CHECK(f1_set(std::vector<int>{3}, std::vector<int>{3, 8}) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(f1_set(std::vector<int>{}, std::vector<int>{3}) == 0.0);
  CHECK(f1_set(std::vector<int>{3}, std::vector<int>{}) == 0.0);
  CHECK(f1_set(std::vector<int>{}, std::vector<int>{}) == 1.0);
  CHECK(f1_set(std::vector<int>{1}, std::vector<int>{2}) == 0.0);
  CHECK(f1_set(TargetSet{labels({3})}, TargetSet{labels({3, 8})}) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("edit distance examples") {
  CHECK(edit_distance("ab", "ab") == 0);
  CHECK(edit_distance("ab", "abc") == 1);
  CHECK(edit_distance("10551", "2") == 5);
  CHECK(edit_distance("", "abc") == 3);
  CHECK(edit_distance("kitten", "sitting") == 3);
  CHECK(edit_distance(text("ab"), text("abc")) == 1);
}

TEST_CASE("mean edit distance examples") {
  CHECK(mean_edit_distance({text("x")}, {text("x")}) == 0.0);
  CHECK(mean_edit_distance({text("a"), text("bb")}, {text("a")}) == 1.0);
  const SequenceSet truth{seq({1, 0, 5, 5, 1}), seq({2})};
  CHECK(mean_edit_distance(truth, {}) == 3.0);
  CHECK(mean_edit_distance({}, truth) == 3.0);
  CHECK(mean_edit_distance({}, {}) == 0.0);
  // cross pairs: a perfect two-element prediction does not score 0
  CHECK(mean_edit_distance(truth, truth) == doctest::Approx((0 + 5 + 5 + 0) / 4.0));
}

TEST_CASE("f1 is symmetric on random sets") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 2000; ++i) {
    std::vector<int> a, b;
    for (int k = 0; k < 12; ++k) {
      if (rng() % 3 == 0) a.push_back(k);
      if (rng() % 3 == 0) b.push_back(k);
    }
    const double ab = f1_set(a, b);
    CHECK(ab == f1_set(b, a));
    CHECK((ab >= 0.0 && ab <= 1.0));
  }
}

TEST_CASE("edit distance is a metric on random strings") {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 10000; ++i) {
    const std::string a = random_string(rng, 8, 3);
    const std::string b = random_string(rng, 8, 3);
    const std::string c = random_string(rng, 8, 3);
    const std::size_t ab = edit_distance(a, b);
    CHECK(ab == edit_distance(b, a));
    CHECK(edit_distance(a, a) == 0);
    CHECK((ab == 0) == (a == b));
    CHECK(edit_distance(a, c) <= ab + edit_distance(b, c));
  }
}

TEST_CASE("edit distance matches the recursive definition") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 300; ++i) {
    const std::string a = random_string(rng, 6, 4);
    const std::string b = random_string(rng, 6, 4);
    CHECK(edit_distance(a, b) == oracle::edit_distance_recursive(a, b));
  }
}

TEST_CASE("evaluate aggregates by the arithmetic mean") {
  const Dataset d(TaskKind::labels, 4, 1, 1, {{Features{0.0}, labels({1})}, {Features{1.0}, labels({2, 3})}});
  const EvalReport perfect = evaluate({labels({1}), labels({2, 3})}, d, Metric::mf1);
  CHECK(perfect.aggregate == 1.0);
  CHECK(perfect.exact_match_rate == 1.0);

  const EvalReport half = evaluate({labels({1}), labels({0})}, d, Metric::mf1);
  CHECK(half.per_sample == std::vector<double>{1.0, 0.0});
  CHECK(half.aggregate == 0.5);
  CHECK(half.exact_match_rate == 0.5);
  CHECK_THROWS_AS((void)evaluate({labels({1})}, d, Metric::mf1), ValidationError);
}

TEST_CASE("mED evaluation strips end tokens and scores singletons at 0") {
  const Dataset d(TaskKind::sequences, 11, 11, kDigitVocab,
                  {{seq({1}), SequenceSet{seq({2, 10})}}, {seq({2}), SequenceSet{seq({1, 0, 5, 5, 1, 10}), seq({2, 10})}}});
  const EvalReport r = evaluate({SequenceSet{seq({2, 10})}, SequenceSet{}}, d, Metric::med);
  CHECK(r.per_sample[0] == 0.0);
  CHECK(r.per_sample[1] == 3.0);
  CHECK(r.aggregate == 1.5);
  CHECK_FALSE(higher_is_better(Metric::med));
  const std::vector<bool> trunc = {true, false};
  CHECK(evaluate({SequenceSet{seq({2, 10})}, SequenceSet{}}, d, Metric::med, &trunc).truncations == 1);
}

TEST_CASE("report counts both-empty samples and serialises") {
  const Dataset d(TaskKind::sequences, 11, 11, kDigitVocab, {{seq({1}), SequenceSet{}}, {seq({2}), SequenceSet{seq({3, 10})}}});
  const EvalReport r = evaluate({SequenceSet{}, SequenceSet{seq({3, 10})}}, d, Metric::mf1);
  CHECK(r.both_empty == 1);
  CHECK(r.aggregate == 1.0);
  const auto j = r.to_json();
  CHECK(j["metric"] == "mF1");
  CHECK(j["samples"] == 2);
  CHECK(EvalReport::csv_header().find("method") != std::string::npos);
  CHECK(r.csv_row("SSG-S").rfind("SSG-S,", 0) == 0);
  CHECK(metric_from_string("mED") == Metric::med);
  CHECK_THROWS_AS((void)metric_from_string("bleu"), ValidationError);
}
