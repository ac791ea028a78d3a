#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "ssg/decoder.hpp"
#include "ssg/lambda.hpp"
#include "ssg/metrics.hpp"
#include "ssg/sequence_model.hpp"
#include "ssg/tasks.hpp"

namespace {

std::vector<ssg::MarginRecord> records(std::size_t n) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<ssg::MarginRecord> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double neg = 0.3 * u(rng);
    const double pos = neg + u(rng) * (1.0 - neg);
    out.push_back(ssg::make_record(pos + 0.1 * u(rng), pos, neg));
  }
  return out;
}

std::vector<double> probs(std::size_t n) {
  std::mt19937_64 rng(2);
  std::exponential_distribution<double> e(1.0);
  std::vector<double> p(n);
  double s = 0.0;
  for (double& v : p) s += (v = e(rng));
  for (double& v : p) v /= s;
  return p;
}

void BM_SolveLambda(benchmark::State& st) {
  const auto rs = records(static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(ssg::solve_lambda(rs));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}
BENCHMARK(BM_SolveLambda)->Range(16, 1 << 16);

void BM_DecodeSet(benchmark::State& st) {
  const auto p = probs(static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(ssg::decode_set(p, 0.5 / static_cast<double>(p.size()), 0.0));
}
BENCHMARK(BM_DecodeSet)->Range(8, 1024);

void BM_DecodeSequenceSetUntrained(benchmark::State& st) {
  ssg::SequenceModel m(ssg::SequenceShape{ssg::kDigitVocab, 11, 11}, 60, 60, 120);
  m.init(1);
  ssg::PenaltyParams pen;
  pen.variant = ssg::PenaltyParams::Variant::scalar;
  pen.lambdas = {0.3};
  const ssg::Dataset d = ssg::generate(ssg::TaskSpec{ssg::TaskTag::task2, 16, 1});
  std::size_t i = 0;
  for (auto _ : st) {
    benchmark::DoNotOptimize(ssg::decode_sequence_set(m, pen, d.samples()[i++ % d.size()].x, 11, 0.0));
  }
}
BENCHMARK(BM_DecodeSequenceSetUntrained)->Unit(benchmark::kMillisecond);

void BM_EditDistance(benchmark::State& st) {
  const std::string a = "10551092837465", b = "29384756102938";
  for (auto _ : st) benchmark::DoNotOptimize(ssg::edit_distance(a, b));
}
BENCHMARK(BM_EditDistance);

}  // namespace
BENCHMARK_MAIN();
