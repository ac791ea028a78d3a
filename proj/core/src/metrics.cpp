#include "ssg/metrics.hpp"

#include <cstdio>
#include <numeric>

namespace ssg {

double f1_set(const TargetSet& pred, const TargetSet& truth) {
  if (pred.index() != truth.index()) {
    throw ValidationError("[metrics] prediction and truth hold different element kinds");
  }
  if (const auto* p = std::get_if<LabelSet>(&pred)) return f1_set(*p, std::get<LabelSet>(truth));
  return f1_set(std::get<SequenceSet>(pred), std::get<SequenceSet>(truth));
}

std::size_t edit_distance(std::span<const Token> a, std::span<const Token> b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> row(b.size() + 1);
  std::iota(row.begin(), row.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

std::size_t edit_distance(const TokenSeq& a, const TokenSeq& b) {
  return edit_distance(std::span<const Token>(a.tokens), std::span<const Token>(b.tokens));
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<Token> ta(a.begin(), a.end()), tb(b.begin(), b.end());
  return edit_distance(std::span<const Token>(ta), std::span<const Token>(tb));
}

double mean_edit_distance(const SequenceSet& truth, const SequenceSet& pred) {
  static const SequenceSet empty_side{TokenSeq{}};
  const SequenceSet& g = truth.empty() ? empty_side : truth;
  const SequenceSet& p = pred.empty() ? empty_side : pred;
  double total = 0.0;
  for (const TokenSeq& a : g) {
    for (const TokenSeq& b : p) total += static_cast<double>(edit_distance(a, b));
  }
  return total / static_cast<double>(g.size() * p.size());
}

std::string_view to_string(Metric m) { return m == Metric::mf1 ? "mF1" : "mED"; }

Metric metric_from_string(std::string_view s) {
  if (s == "mF1" || s == "mf1" || s == "f1") return Metric::mf1;
  if (s == "mED" || s == "med" || s == "ed") return Metric::med;
  throw ValidationError("[metrics] unknown metric '" + std::string(s) + "'");
}

nlohmann::ordered_json EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["metric"] = std::string(to_string(metric));
  j["higher_is_better"] = higher_is_better(metric);
  j["aggregate"] = aggregate;
  j["exact_match_rate"] = exact_match_rate;
  j["samples"] = samples;
  j["truncations"] = truncations;
  j["both_empty"] = both_empty;
  j["per_sample"] = per_sample;
  return j;
}

std::string EvalReport::csv_header() {
  return "method,metric,aggregate,exact_match_rate,samples,truncations";
}

std::string EvalReport::csv_row(std::string_view method) const {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%.*s,%s,%.6f,%.6f,%zu,%zu", static_cast<int>(method.size()),
                method.data(), std::string(to_string(metric)).c_str(), aggregate, exact_match_rate,
                samples, truncations);
  return buf;
}

namespace {

SequenceSet without_end(const SequenceSet& s, Token end) {
  SequenceSet out;
  out.reserve(s.size());
  for (const TokenSeq& t : s) out.push_back(strip_end(t, end));
  return out;
}

}  // namespace

EvalReport evaluate(const std::vector<TargetSet>& predictions, const Dataset& dataset,
                    Metric metric, const std::vector<bool>* truncated) {
  if (predictions.size() != dataset.size()) {
    throw ValidationError("[metrics] " + std::to_string(predictions.size()) + " predictions for " +
                          std::to_string(dataset.size()) + " samples");
  }
  if (truncated && truncated->size() != dataset.size()) {
    throw ValidationError("[metrics] truncation flags do not match the sample count");
  }
  EvalReport r;
  r.metric = metric;
  r.samples = dataset.size();
  std::size_t exact = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const TargetSet& truth = dataset.samples()[i].y;
    const TargetSet& pred = predictions[i];
    if (pred.index() != truth.index()) {
      throw ValidationError("[metrics] prediction " + std::to_string(i) + " has the wrong element kind");
    }
    if (target_size(pred) == 0 && target_size(truth) == 0) ++r.both_empty;
    if (pred == truth) ++exact;
    if (metric == Metric::mf1) {
      r.per_sample.push_back(f1_set(pred, truth));
    } else {
      const auto* tseq = std::get_if<SequenceSet>(&truth);
      if (!tseq) throw ValidationError("[metrics] mED needs sequence targets");
      const Token end = dataset.end_token();
      r.per_sample.push_back(mean_edit_distance(without_end(*tseq, end),
                                                without_end(std::get<SequenceSet>(pred), end)));
    }
    if (truncated && (*truncated)[i]) ++r.truncations;
  }
  if (r.samples > 0) {
    r.aggregate = std::accumulate(r.per_sample.begin(), r.per_sample.end(), 0.0) /
                  static_cast<double>(r.samples);
    r.exact_match_rate = static_cast<double>(exact) / static_cast<double>(r.samples);
  }
  return r;
}

}  // namespace ssg
