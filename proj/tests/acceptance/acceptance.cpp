// Acceptance gate: one PASS/FAIL line per criterion.
//   ssg_acceptance [--only N]... [--work DIR]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "test_support.hpp"
#include "ssg/decoder.hpp"
#include "ssg/lambda.hpp"
#include "ssg/lambda_net.hpp"
#include "ssg/label_model.hpp"
#include "ssg/metrics.hpp"
#include "ssg/multilabel_baseline.hpp"
#include "ssg/pipeline.hpp"
#include "ssg/sequence_model.hpp"
#include "ssg/tasks.hpp"
#include "ssg/training.hpp"

using namespace ssg;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double budget_s;  // 0: no runtime bound
  std::function<Outcome()> run;
};

fs::path g_work;

LabelSet label_set(std::initializer_list<std::uint32_t> ids) {
  std::vector<Label> v;
  for (auto i : ids) v.push_back({i});
  return make_label_set(v);
}

std::string fmt(const char* f, double a, double b = 0.0) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

// 1-4 groups with 1-50 positives and 1-10 negatives each, posteriors normalised per
// group. With `clustered`, positives sit near a common level well above the negatives.
std::vector<MarginRecord> random_groups(std::mt19937_64& rng, bool clustered) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<MarginRecord> out;
  const std::size_t groups = 1 + rng() % 4;
  for (std::size_t gi = 0; gi < groups; ++gi) {
    const std::size_t npos = 1 + rng() % 50;
    const std::size_t nneg = 1 + rng() % 10;
    std::vector<double> p(npos + nneg);
    double z = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (!clustered) p[i] = u(rng);
      else p[i] = i < npos ? 1.0 + 0.05 * u(rng) : 0.3 * u(rng);
      z += p[i];
    }
    for (double& v : p) v /= z;
    const double pos_min = *std::min_element(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(npos));
    const double neg_max = *std::max_element(p.begin() + static_cast<std::ptrdiff_t>(npos), p.end());
    for (std::size_t i = 0; i < npos; ++i) out.push_back({p[i], pos_min, neg_max, (pos_min + neg_max) / 2.0});
  }
  return out;
}

// ---------------------------------------------------------------------------

Outcome c1_lambda_vs_grid() {
  std::mt19937_64 rng(101);
  int agree = 0, worse = 0, bad_disagreement = 0, feasible = 0;
  double worst = 0.0;
  constexpr int kSets = 200;
  for (int i = 0; i < kSets; ++i) {
    const auto rs = i % 3 == 0   ? oracle::random_records(rng, 1 + rng() % 50)
                    : i % 3 == 1 ? random_groups(rng, false)
                                 : random_groups(rng, true);
    const LambdaSolution s = solve_lambda(rs);
    const auto g = oracle::grid_lambda(rs);
    feasible += g.feasible;
    if (s.feasible == g.feasible) {
      ++agree;
      const double mine = s.feasible ? oracle::quadratic(rs, s.lambda) : oracle::hinge_penalised(rs, s.lambda);
      worst = std::max(worst, mine - g.objective);
      if (mine > g.objective + 1e-3) ++worse;
    } else if (s.interval.hi - s.interval.lo >= 2e-4) {
      ++bad_disagreement;
    }
  }
  const bool ok = agree >= 0.99 * kSets && worse == 0 && bad_disagreement == 0;
  return {ok, std::to_string(agree) + "/200 same feasibility, " + std::to_string(worse) +
                  " objectives above grid+1e-3 (max excess " + fmt("%.2e", worst) + "), " +
                  std::to_string(bad_disagreement) + " wide disagreements, " + std::to_string(feasible) +
                  " feasible"};
}

Outcome c2_label_exactness() {
  const Dataset d = generate(TaskSpec{TaskTag::threshold, 500, 202});
  const PosteriorFn posterior = [](const Input& x) {
    const auto y = threshold_truth(std::get<Features>(x)[0]).labels;
    std::vector<double> p(11, 0.0);
    for (const Label& l : y) p[l.id] = 1.0 / static_cast<double>(y.size());
    return p;
  };
  const LambdaSolution sol = solve_lambda(margin_stats(posterior, d).records);
  std::size_t exact = 0;
  for (const SetSample& s : d.samples()) {
    exact += decode_set(posterior(s.x), sol.lambda, 0.0).predicted == std::get<LabelSet>(s.y);
  }
  return {sol.feasible && exact == d.size(),
          std::to_string(exact) + "/500 exact, lambda " + fmt("%.4f", sol.lambda) +
              (sol.feasible ? " (feasible)" : " (infeasible)")};
}

Outcome c3_sequence_exactness() {
  const testing::FnScorer scorer(11, 11, [](const Input&, const TokenSeq&) { return std::vector<double>(11, 0.0); });
  const Dataset d = generate(TaskSpec{TaskTag::task2, 500, 303});
  std::size_t exact = 0;
  for (const SetSample& s : d.samples()) {
    const auto targets = task2_truth(digits_of(s.x));
    exact += decode_sequence_set(scorer, oracle_gate(targets), s.x, 11).predicted == targets;
  }
  const SequenceSet worked = task2_truth("00490000349172105519");
  std::set<std::string> names;
  for (const TokenSeq& t : worked) names.insert(format_tokens(t, kDigitOutputVocab));
  const bool worked_ok =
      names == std::set<std::string>{"2", "10551"} &&
      decode_sequence_set(scorer, oracle_gate(worked), d.samples()[0].x, 11).predicted == worked;
  return {exact == d.size() && worked_ok,
          std::to_string(exact) + "/500 exact, worked example " + (worked_ok ? "ok" : "wrong")};
}

Outcome c4_fixtures() {
  const bool a = task1_truth("33874") == label_set({3, 8});
  const bool b = threshold_truth(1.01).labels == label_set({2, 3, 4, 5, 6, 7, 8, 9, 10});
  const bool c = threshold_truth(9.5).labels == label_set({10});
  return {a && b && c, std::string("33874 ") + (a ? "ok" : "wrong") + ", 1.01 " + (b ? "ok" : "wrong") +
                           ", 9.5 " + (c ? "ok" : "wrong")};
}

Outcome c5_stopping() {
  std::mt19937_64 rng(505);
  std::exponential_distribution<double> e(1.0);
  std::uniform_real_distribution<double> u(0.0, 0.6);
  int identical = 0, kept = 0;
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> p(2 + rng() % 12);
    double z = 0.0;
    for (double& v : p) z += (v = e(rng));
    for (double& v : p) v /= z;
    const double lambda = u(rng);
    const auto a = decode_set(p, lambda, 0.0, 200);
    const auto b = decode_set(p, lambda, 0.5, 200);
    identical += a.trace == oracle::plain_decode_trace(p, lambda, 200);
    kept += std::includes(b.predicted.begin(), b.predicted.end(), a.predicted.begin(), a.predicted.end());
  }
  return {identical == 1000 && kept == 1000,
          std::to_string(identical) + "/1000 identical traces, " + std::to_string(kept) + "/1000 supersets"};
}

Outcome c6_gradients() {
  double worst = 0.0;
  const Features x{0.3, -1.2, 0.8};
  const LabelSet y = label_set({0, 3});
  const TokenSeq in{{1, 9, 2}};
  const TokenSeq out{{2, 0, 4}};
  LambdaNetExample ex;
  ex.logits = {0.4, -1.0, 2.2, 0.0, -0.3, 1.1, 0.7};
  ex.position = 2;
  ex.targets = {0, 0, 1, 0, 0, 1, 0};
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    LabelModel lm(3, {5, 4}, 6);
    lm.init(seed);
    worst = std::max(worst, gradient_check(lm, LabelExample{&x, 4}, 1e-4).max_rel_error);
    MultiLabelBaseline bm(3, {5}, 4);
    bm.init(seed);
    worst = std::max(worst, gradient_check(bm, MultiLabelExample{&x, &y}, 1e-4).max_rel_error);
    SequenceModel sm(SequenceShape{kDigitVocab, 5, 4}, 4, 5, 6);
    sm.init(seed);
    worst = std::max(worst, gradient_check(sm, SequenceExample{&in, &out}, 1e-4).max_rel_error);
    for (auto v : {LambdaNetVariant::windowed, LambdaNetVariant::recurrent}) {
      LambdaNetOptions o;
      o.variant = v;
      o.vocab = 7;
      o.max_len = 3;
      o.cell = 8;
      o.dense = {8, 4};
      LambdaNet net(o);
      net.init(seed);
      net.set_positive_weight(2.5);
      worst = std::max(worst, gradient_check(net, ex, 1e-4).max_rel_error);
    }
  }
  return {worst < 1e-4, "max relative error " + fmt("%.3e", worst) + " over 15 checks"};
}

Outcome reproduce(TaskTag task, const std::string& dir_name) {
  RunConfig cfg;
  cfg.task.task = task;
  cfg.task.n = 1000;
  cfg.out = (g_work / dir_name).string();
  std::ostringstream log;
  const ReproduceResult r = cmd_reproduce(task, cfg, log);
  std::string detail;
  for (const CriterionCheck& c : r.checks) {
    if (!detail.empty()) detail += "; ";
    detail += std::string(c.passed ? "" : "NOT ") + c.name + " (" + c.detail + ")";
  }
  return {r.passed(), detail};
}

Outcome c7_task1() { return reproduce(TaskTag::task1, "task1_n1000"); }
Outcome c8_task2() { return reproduce(TaskTag::task2, "task2_n1000"); }

Outcome c9_metrics() {
  int failures = 0;
  auto expect = [&](bool ok) { failures += !ok; };
  expect(f1_set(std::vector<int>{3, 8}, std::vector<int>{3, 8}) == 1.0);
  expect(std::abs(f1_set(std::vector<int>{3}, std::vector<int>{3, 8}) - 2.0 / 3.0) < 1e-12);
  expect(f1_set(std::vector<int>{}, std::vector<int>{3}) == 0.0);
  expect(f1_set(std::vector<int>{}, std::vector<int>{}) == 1.0);
  expect(edit_distance("ab", "ab") == 0);
  expect(edit_distance("ab", "abc") == 1);
  expect(edit_distance("10551", "2") == 5);
  const TokenSeq x{{0}}, a{{0}}, bb{{1, 1}};
  expect(mean_edit_distance({x}, {x}) == 0.0);
  expect(mean_edit_distance({a, bb}, {a}) == 1.0);

  std::mt19937_64 rng(909);
  auto rand_str = [&] {
    std::string s(rng() % 9, 'a');
    for (char& c : s) c = static_cast<char>('a' + rng() % 3);
    return s;
  };
  int property_failures = 0;
  for (int i = 0; i < 10000; ++i) {
    const std::string p = rand_str(), q = rand_str(), r = rand_str();
    const std::size_t pq = edit_distance(p, q);
    property_failures += pq != edit_distance(q, p);
    property_failures += (pq == 0) != (p == q);
    property_failures += edit_distance(p, r) > pq + edit_distance(q, r);
    std::vector<int> s1, s2;
    for (int k = 0; k < 10; ++k) {
      if (rng() % 3 == 0) s1.push_back(k);
      if (rng() % 3 == 0) s2.push_back(k);
    }
    property_failures += f1_set(s1, s2) != f1_set(s2, s1);
  }
  return {failures == 0 && property_failures == 0,
          std::to_string(failures) + " example failures, " + std::to_string(property_failures) +
              " property violations in 10000 cases"};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome c10_determinism() {
  std::vector<fs::path> roots;
  for (const char* name : {"det_a", "det_b"}) {
    RunConfig cfg;
    cfg.task.task = TaskTag::task1;
    cfg.task.n = 100;
    cfg.out = (g_work / name).string();
    std::ostringstream log;
    (void)cmd_reproduce(TaskTag::task1, cfg, log);
    roots.push_back(cfg.out);
  }
  std::size_t files = 0, differing = 0;
  for (const auto& entry : fs::recursive_directory_iterator(roots[0])) {
    if (!entry.is_regular_file()) continue;
    ++files;
    const fs::path rel = fs::relative(entry.path(), roots[0]);
    if (!fs::exists(roots[1] / rel) || slurp(entry.path()) != slurp(roots[1] / rel)) ++differing;
  }
  return {files > 0 && differing == 0,
          std::to_string(files) + " files compared, " + std::to_string(differing) + " differ"};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  g_work = fs::temp_directory_path() / ("ssg_acceptance_" + std::to_string(std::random_device{}()));
  for (int i = 1; i < argc; ++i) {
    if (!std::strcmp(argv[i], "--only") && i + 1 < argc) only.insert(std::atoi(argv[++i]));
    else if (!std::strcmp(argv[i], "--work") && i + 1 < argc) g_work = argv[++i];
    else {
      std::cerr << "usage: ssg_acceptance [--only N]... [--work DIR]\n";
      return 2;
    }
  }
  fs::remove_all(g_work);
  fs::create_directories(g_work);

  const std::vector<Criterion> criteria = {
      {1, "closed-form lambda vs grid oracle", 10, c1_lambda_vs_grid},
      {2, "label decoding exactness with oracle posterior", 5, c2_label_exactness},
      {3, "sequence decoding exactness with oracle candidates", 30, c3_sequence_exactness},
      {4, "worked-example fixtures", 0, c4_fixtures},
      {5, "stopping criterion reduction", 0, c5_stopping},
      {6, "gradient checks", 60, c6_gradients},
      {7, "task1 N=1000 learned lambda beats baseline and SSG-S", 1800, c7_task1},
      {8, "task2 N=1000 learned lambda beats SSG-S, baseline N/A", 2700, c8_task2},
      {9, "metric suite", 10, c9_metrics},
      {10, "reproduce determinism", 0, c10_determinism},
  };

  int failed = 0;
  for (const Criterion& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = c.budget_s == 0 || secs < c.budget_s;
    const bool ok = o.passed && in_time;
    failed += !ok;
    std::printf("%s criterion %d: %s -- %s [%.1fs%s]\n", ok ? "PASS" : "FAIL", c.id, c.name.c_str(),
                o.detail.c_str(), secs, in_time ? "" : fmt(", over %.0fs budget", c.budget_s).c_str());
    std::fflush(stdout);
  }
  std::error_code ec;
  fs::remove_all(g_work, ec);
  return failed == 0 ? 0 : 1;
}
