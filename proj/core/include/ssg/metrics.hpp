#pragma once

#include <algorithm>
#include <iterator>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ssg/dataset.hpp"

namespace ssg {

/// F1 of two duplicate-free sets; 1 when both are empty, 0 when only one is.
template <class T>
[[nodiscard]] double f1_set(std::vector<T> pred, std::vector<T> truth) {
  if (pred.empty() && truth.empty()) return 1.0;
  if (pred.empty() || truth.empty()) return 0.0;
  std::sort(pred.begin(), pred.end());
  std::sort(truth.begin(), truth.end());
  std::vector<T> common;
  std::set_intersection(pred.begin(), pred.end(), truth.begin(), truth.end(),
                        std::back_inserter(common));
  if (common.empty()) return 0.0;
  const double p = static_cast<double>(common.size()) / static_cast<double>(pred.size());
  const double r = static_cast<double>(common.size()) / static_cast<double>(truth.size());
  return 2.0 * p * r / (p + r);
}

[[nodiscard]] double f1_set(const TargetSet& pred, const TargetSet& truth);

/// Levenshtein distance, unit costs.
[[nodiscard]] std::size_t edit_distance(std::span<const Token> a, std::span<const Token> b);
[[nodiscard]] std::size_t edit_distance(const TokenSeq& a, const TokenSeq& b);
[[nodiscard]] std::size_t edit_distance(std::string_view a, std::string_view b);

/// Mean distance over all (truth, pred) cross pairs. An empty side counts as
/// the single empty sequence. Note that a perfect prediction of a set with two
/// or more elements scores above 0, since off-diagonal pairs are included.
[[nodiscard]] double mean_edit_distance(const SequenceSet& truth, const SequenceSet& pred);

enum class Metric { mf1, med };

[[nodiscard]] std::string_view to_string(Metric m);
[[nodiscard]] Metric metric_from_string(std::string_view s);
[[nodiscard]] constexpr bool higher_is_better(Metric m) { return m == Metric::mf1; }

struct EvalReport {
  Metric metric = Metric::mf1;
  std::vector<double> per_sample;
  double aggregate = 0.0;
  double exact_match_rate = 0.0;
  std::size_t samples = 0;
  std::size_t truncations = 0;
  std::size_t both_empty = 0;

  [[nodiscard]] nlohmann::ordered_json to_json() const;
  [[nodiscard]] static std::string csv_header();
  [[nodiscard]] std::string csv_row(std::string_view method) const;
};

/// Scores predictions against the dataset's targets. Sequence elements are
/// compared with their end tokens removed for mED. `truncated` flags, when
/// given, are counted.
[[nodiscard]] EvalReport evaluate(const std::vector<TargetSet>& predictions, const Dataset& dataset,
                                  Metric metric, const std::vector<bool>* truncated = nullptr);

}  // namespace ssg
