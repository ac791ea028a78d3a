#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ssg/dataset.hpp"
#include "ssg/label_model.hpp"
#include "ssg/sequence_model.hpp"

namespace ssg {

/// Margin statistics of one positive (input, element) pair:
/// posterior of the element, smallest positive posterior of its group,
/// largest negative posterior of its group, and their midpoint.
struct MarginRecord {
  double p = 0.0;
  double l_pos_min = 0.0;
  double l_neg_max = 0.0;
  double p_hat = 0.0;
};

[[nodiscard]] MarginRecord make_record(double p, double l_pos_min, double l_neg_max);

/// Intersection of the per-record bounds p - l_pos_min <= lambda <= p - l_neg_max.
struct FeasibleInterval {
  double lo = 0.0;
  double hi = 0.0;
  bool empty = false;
};

enum class LambdaCandidate { boundary_low, boundary_high, interior, penalized_scan };

[[nodiscard]] std::string_view to_string(LambdaCandidate c);
[[nodiscard]] LambdaCandidate lambda_candidate_from_string(std::string_view s);

struct LambdaSolution {
  double lambda = 0.0;
  FeasibleInterval interval;
  LambdaCandidate candidate = LambdaCandidate::interior;
  bool feasible = true;
  /// Quadratic objective when feasible, hinge-penalised objective otherwise.
  double objective = 0.0;
};

/// Weight of the hinge terms used when the feasible interval is empty.
inline constexpr double kHingeWeight = 1e3;

[[nodiscard]] FeasibleInterval feasible_interval(std::span<const MarginRecord> records);
/// sum_i (p_i - p_hat_i - lambda)^2
[[nodiscard]] double lambda_objective(std::span<const MarginRecord> records, double lambda);
/// lambda_objective plus M * sum_i [max(0, lo_i - lambda) + max(0, lambda - hi_i)].
[[nodiscard]] double penalized_lambda_objective(std::span<const MarginRecord> records,
                                                double lambda);

/// Max-margin penalty. With a non-empty interval the optimum of the convex
/// quadratic is the interior minimiser mean(p - p_hat) when it lies inside,
/// otherwise the nearer boundary; candidates are compared by objective with
/// ties going to the smaller lambda. An empty interval falls back to a scan of
/// the hinge-penalised objective and is reported infeasible.
[[nodiscard]] LambdaSolution solve_lambda(std::span<const MarginRecord> records);

using PosteriorFn = std::function<std::vector<double>(const Input&)>;

struct MarginStats {
  std::vector<MarginRecord> records;
  /// Groups whose negative set is empty (positives cover the universe).
  std::vector<std::size_t> skipped_groups;
};

/// One record per flattened pair, in dataset order.
[[nodiscard]] MarginStats margin_stats(const PosteriorFn& posterior, const Dataset& dataset);
[[nodiscard]] MarginStats margin_stats(const LabelModel& model, const Dataset& dataset);

struct PositionCandidates {
  std::vector<Token> positives;
  std::vector<Token> negatives;
};

/// Tokens that continue `prefix` toward some target (the end token when the
/// prefix is itself a complete target) and the rest of the vocabulary.
[[nodiscard]] PositionCandidates position_candidates(const SequenceSet& targets,
                                                     const TokenSeq& prefix, std::size_t vocab);

struct PenaltyReportEntry {
  std::size_t position = 1;
  std::size_t records = 0;
  bool solved = false;
  bool feasible = false;
  bool carried = false;
  LambdaCandidate candidate = LambdaCandidate::interior;
  double lo = 0.0;
  double hi = 0.0;
};

struct LambdaNetHandle {
  std::string file;
  std::string hash;
  std::string variant;
};

/// Calibrated memory penalty plus its provenance.
struct PenaltyParams {
  enum class Variant { scalar, per_position, learned };
  Variant variant = Variant::scalar;
  std::vector<double> lambdas;  // one entry for scalar, max_len for per-position
  std::vector<PenaltyReportEntry> report;
  std::string model_hash;
  std::optional<LambdaNetHandle> lambda_net;

  [[nodiscard]] double lambda_at(std::size_t position) const;
};

[[nodiscard]] std::string_view to_string(PenaltyParams::Variant v);

[[nodiscard]] PenaltyParams scalar_penalty(const LambdaSolution& sol, std::size_t records);

/// Per-position max-margin penalties. Each distinct ground-truth prefix of a
/// sample is one group with a record per positive continuation, as in the
/// label case.
[[nodiscard]] PenaltyParams solve_lambda_per_position(const SequenceScorer& scorer,
                                                      const Dataset& dataset);
/// As above; rejects a model that has not been trained.
[[nodiscard]] PenaltyParams solve_lambda_per_position(const SequenceModel& model,
                                                      const Dataset& dataset);
/// Records at one position (1-based), exposed for inspection and tests.
[[nodiscard]] std::vector<MarginRecord> position_records(const SequenceScorer& scorer,
                                                         const Dataset& dataset,
                                                         std::size_t position);

[[nodiscard]] nlohmann::json to_json(const PenaltyParams& p);
[[nodiscard]] PenaltyParams penalty_from_json(const nlohmann::json& doc);

/// Throws unless `model_hash` matches the calibration hash or `override_hash`.
void check_penalty_hash(const PenaltyParams& p, const std::string& model_hash, bool override_hash);

}  // namespace ssg
