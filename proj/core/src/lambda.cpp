#include "ssg/lambda.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "ssg/nn.hpp"

namespace ssg {

MarginRecord make_record(double p, double l_pos_min, double l_neg_max) {
  return {p, l_pos_min, l_neg_max, (l_neg_max + l_pos_min) / 2.0};
}

std::string_view to_string(LambdaCandidate c) {
  switch (c) {
    case LambdaCandidate::boundary_low: return "boundary_low";
    case LambdaCandidate::boundary_high: return "boundary_high";
    case LambdaCandidate::interior: return "interior";
    case LambdaCandidate::penalized_scan: return "penalized_scan";
  }
  return "interior";
}

LambdaCandidate lambda_candidate_from_string(std::string_view s) {
  for (auto c : {LambdaCandidate::boundary_low, LambdaCandidate::boundary_high,
                 LambdaCandidate::interior, LambdaCandidate::penalized_scan}) {
    if (to_string(c) == s) return c;
  }
  throw ValidationError("[lambda] unknown candidate tag '" + std::string(s) + "'");
}

FeasibleInterval feasible_interval(std::span<const MarginRecord> records) {
  FeasibleInterval iv{-std::numeric_limits<double>::infinity(),
                      std::numeric_limits<double>::infinity(), false};
  for (const MarginRecord& r : records) {
    iv.lo = std::max(iv.lo, r.p - r.l_pos_min);
    iv.hi = std::min(iv.hi, r.p - r.l_neg_max);
  }
  iv.empty = iv.lo > iv.hi;
  return iv;
}

double lambda_objective(std::span<const MarginRecord> records, double lambda) {
  double total = 0.0;
  for (const MarginRecord& r : records) {
    const double d = r.p - r.p_hat - lambda;
    total += d * d;
  }
  return total;
}

double penalized_lambda_objective(std::span<const MarginRecord> records, double lambda) {
  double hinge = 0.0;
  for (const MarginRecord& r : records) {
    hinge += std::max(0.0, (r.p - r.l_pos_min) - lambda);
    hinge += std::max(0.0, lambda - (r.p - r.l_neg_max));
  }
  return lambda_objective(records, lambda) + kHingeWeight * hinge;
}

namespace {

double interior_minimiser(std::span<const MarginRecord> records) {
  double sum = 0.0;
  for (const MarginRecord& r : records) sum += r.p - r.p_hat;
  return sum / static_cast<double>(records.size());
}

// The penalised objective is convex: scan a bracket that contains every
// breakpoint and the quadratic's minimiser, then golden-section refine.
double minimise_penalized(std::span<const MarginRecord> records, double centre) {
  double a = centre;
  double b = centre;
  for (const MarginRecord& r : records) {
    a = std::min({a, r.p - r.l_pos_min, r.p - r.l_neg_max});
    b = std::max({b, r.p - r.l_pos_min, r.p - r.l_neg_max});
  }
  if (b - a < 1e-15) return a;
  constexpr int kScan = 2000;
  const double step = (b - a) / kScan;
  int best = 0;
  double best_val = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= kScan; ++k) {
    const double v = penalized_lambda_objective(records, a + step * k);
    if (v < best_val) {
      best_val = v;
      best = k;
    }
  }
  double lo = a + step * std::max(0, best - 1);
  double hi = a + step * std::min(kScan, best + 1);
  const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - ratio * (hi - lo);
  double x2 = lo + ratio * (hi - lo);
  double f1 = penalized_lambda_objective(records, x1);
  double f2 = penalized_lambda_objective(records, x2);
  for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - ratio * (hi - lo);
      f1 = penalized_lambda_objective(records, x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + ratio * (hi - lo);
      f2 = penalized_lambda_objective(records, x2);
    }
  }
  const double refined = (lo + hi) / 2.0;
  const double scanned = a + step * best;
  return penalized_lambda_objective(records, refined) <= best_val ? refined : scanned;
}

}  // namespace

LambdaSolution solve_lambda(std::span<const MarginRecord> records) {
  if (records.empty()) throw ValidationError("[lambda] solve_lambda needs at least one record");
  LambdaSolution sol;
  sol.interval = feasible_interval(records);
  const double centre = interior_minimiser(records);

  if (sol.interval.empty) {
    sol.feasible = false;
    sol.candidate = LambdaCandidate::penalized_scan;
    sol.lambda = minimise_penalized(records, centre);
    sol.objective = penalized_lambda_objective(records, sol.lambda);
    return sol;
  }

  struct Option {
    double lambda;
    LambdaCandidate tag;
  };
  std::vector<Option> options;
  if (centre >= sol.interval.lo && centre <= sol.interval.hi) {
    options.push_back({centre, LambdaCandidate::interior});
  }
  options.push_back({sol.interval.lo, LambdaCandidate::boundary_low});
  options.push_back({sol.interval.hi, LambdaCandidate::boundary_high});

  sol.feasible = true;
  sol.objective = std::numeric_limits<double>::infinity();
  for (const Option& o : options) {
    const double v = lambda_objective(records, o.lambda);
    if (v < sol.objective || (v == sol.objective && o.lambda < sol.lambda)) {
      sol.objective = v;
      sol.lambda = o.lambda;
      sol.candidate = o.tag;
    }
  }
  return sol;
}

MarginStats margin_stats(const PosteriorFn& posterior, const Dataset& dataset) {
  if (dataset.kind() != TaskKind::labels) {
    throw ValidationError("[lambda] margin_stats needs a label-task dataset");
  }
  MarginStats stats;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const SetSample& s = dataset.samples()[i];
    const auto& pos = std::get<LabelSet>(s.y);
    if (pos.size() >= dataset.universe()) {
      stats.skipped_groups.push_back(i);
      continue;
    }
    const auto probs = posterior(s.x);
    if (probs.size() != dataset.universe()) {
      throw ValidationError("[lambda] posterior size does not match the label universe");
    }
    double l_pos_min = std::numeric_limits<double>::infinity();
    for (const Label& l : pos) l_pos_min = std::min(l_pos_min, probs[l.id]);
    double l_neg_max = -std::numeric_limits<double>::infinity();
    for (std::uint32_t k = 0; k < probs.size(); ++k) {
      if (!std::binary_search(pos.begin(), pos.end(), Label{k})) {
        l_neg_max = std::max(l_neg_max, probs[k]);
      }
    }
    for (const Label& l : pos) stats.records.push_back(make_record(probs[l.id], l_pos_min, l_neg_max));
  }
  return stats;
}

MarginStats margin_stats(const LabelModel& model, const Dataset& dataset) {
  return margin_stats([&model](const Input& x) { return model.posterior(std::get<Features>(x)); },
                      dataset);
}

PositionCandidates position_candidates(const SequenceSet& targets, const TokenSeq& prefix,
                                       std::size_t vocab) {
  std::vector<bool> is_pos(vocab, false);
  bool matched = false;
  for (const TokenSeq& t : targets) {
    if (t.size() <= prefix.size()) continue;
    if (!std::equal(prefix.tokens.begin(), prefix.tokens.end(), t.tokens.begin())) continue;
    const Token next = t.tokens[prefix.size()];
    if (next < 0 || static_cast<std::size_t>(next) >= vocab) {
      throw ValidationError("[lambda] target token outside vocabulary");
    }
    is_pos[static_cast<std::size_t>(next)] = true;
    matched = true;
  }
  if (!matched) throw ValidationError("[lambda] prefix does not continue any target");
  PositionCandidates pc;
  for (std::size_t k = 0; k < vocab; ++k) {
    (is_pos[k] ? pc.positives : pc.negatives).push_back(static_cast<Token>(k));
  }
  return pc;
}

double PenaltyParams::lambda_at(std::size_t position) const {
  if (lambdas.empty()) throw ValidationError("[lambda] penalty has no lambda values");
  if (variant == Variant::scalar) return lambdas.front();
  if (position == 0 || position > lambdas.size()) {
    throw ValidationError("[lambda] no lambda for position " + std::to_string(position));
  }
  return lambdas[position - 1];
}

std::string_view to_string(PenaltyParams::Variant v) {
  switch (v) {
    case PenaltyParams::Variant::scalar: return "scalar";
    case PenaltyParams::Variant::per_position: return "per_position";
    case PenaltyParams::Variant::learned: return "learned";
  }
  return "scalar";
}

PenaltyParams scalar_penalty(const LambdaSolution& sol, std::size_t records) {
  PenaltyParams p;
  p.variant = PenaltyParams::Variant::scalar;
  p.lambdas = {sol.lambda};
  p.report.push_back(
      {1, records, true, sol.feasible, false, sol.candidate, sol.interval.lo, sol.interval.hi});
  return p;
}

namespace {

std::vector<std::vector<MarginRecord>> records_by_position(const SequenceScorer& scorer,
                                                           const Dataset& dataset) {
  if (dataset.kind() != TaskKind::sequences) {
    throw ValidationError("[lambda] per-position calibration needs a sequence-task dataset");
  }
  if (scorer.vocab() != dataset.universe()) {
    throw ValidationError("[lambda] model vocabulary does not match the dataset");
  }
  const std::size_t vocab = dataset.universe();
  std::vector<std::vector<MarginRecord>> buckets(dataset.max_len());
  for (const SetSample& s : dataset.samples()) {
    const auto& targets = std::get<SequenceSet>(s.y);
    if (targets.empty()) continue;
    // one group per distinct proper prefix, one record per positive continuation
    std::set<std::vector<Token>> prefixes;
    for (const TokenSeq& t : targets) {
      for (std::size_t j = 0; j < t.size() && j < dataset.max_len(); ++j) {
        prefixes.emplace(t.tokens.begin(), t.tokens.begin() + static_cast<std::ptrdiff_t>(j));
      }
    }
    auto session = scorer.open(s.x);
    for (const auto& tokens : prefixes) {
      const TokenSeq prefix{tokens};
      const PositionCandidates pc = position_candidates(targets, prefix, vocab);
      if (pc.negatives.empty()) continue;
      const auto z = session->logits(prefix);
      const nn::Vec probs =
          nn::softmax(nn::ConstVecView(z.data(), static_cast<Eigen::Index>(z.size())));
      double l_pos_min = std::numeric_limits<double>::infinity();
      for (Token k : pc.positives) l_pos_min = std::min(l_pos_min, probs[k]);
      double l_neg_max = -std::numeric_limits<double>::infinity();
      for (Token k : pc.negatives) l_neg_max = std::max(l_neg_max, probs[k]);
      for (Token k : pc.positives) {
        buckets[prefix.size()].push_back(make_record(probs[k], l_pos_min, l_neg_max));
      }
    }
  }
  return buckets;
}

}  // namespace

std::vector<MarginRecord> position_records(const SequenceScorer& scorer, const Dataset& dataset,
                                           std::size_t position) {
  if (position == 0 || position > dataset.max_len()) {
    throw ValidationError("[lambda] position out of range");
  }
  return records_by_position(scorer, dataset)[position - 1];
}

PenaltyParams solve_lambda_per_position(const SequenceScorer& scorer, const Dataset& dataset) {
  const auto buckets = records_by_position(scorer, dataset);
  PenaltyParams out;
  out.variant = PenaltyParams::Variant::per_position;
  double carry = 0.0;
  for (std::size_t j = 0; j < buckets.size(); ++j) {
    PenaltyReportEntry e;
    e.position = j + 1;
    e.records = buckets[j].size();
    if (buckets[j].empty()) {
      e.carried = true;
      out.lambdas.push_back(carry);
    } else {
      const LambdaSolution sol = solve_lambda(buckets[j]);
      e.solved = true;
      e.feasible = sol.feasible;
      e.candidate = sol.candidate;
      e.lo = sol.interval.lo;
      e.hi = sol.interval.hi;
      carry = sol.lambda;
      out.lambdas.push_back(sol.lambda);
    }
    out.report.push_back(e);
  }
  return out;
}

PenaltyParams solve_lambda_per_position(const SequenceModel& model, const Dataset& dataset) {
  if (!model.trained()) {
    throw ValidationError("[lambda] refusing to calibrate an untrained sequence model");
  }
  return solve_lambda_per_position(static_cast<const SequenceScorer&>(model), dataset);
}

nlohmann::json to_json(const PenaltyParams& p) {
  nlohmann::json doc;
  doc["variant"] = std::string(to_string(p.variant));
  doc["lambdas"] = p.lambdas;
  auto rep = nlohmann::json::array();
  for (const PenaltyReportEntry& e : p.report) {
    rep.push_back({{"position", e.position},
                   {"records", e.records},
                   {"solved", e.solved},
                   {"feasible", e.feasible},
                   {"carried", e.carried},
                   {"candidate", std::string(to_string(e.candidate))},
                   {"lo", e.lo},
                   {"hi", e.hi}});
  }
  doc["report"] = rep;
  doc["model_hash"] = p.model_hash;
  if (p.lambda_net) {
    doc["lambda_net"] = {{"file", p.lambda_net->file},
                         {"hash", p.lambda_net->hash},
                         {"variant", p.lambda_net->variant}};
  }
  return doc;
}

PenaltyParams penalty_from_json(const nlohmann::json& doc) {
  try {
    PenaltyParams p;
    const auto v = doc.at("variant").get<std::string>();
    if (v == "scalar") {
      p.variant = PenaltyParams::Variant::scalar;
    } else if (v == "per_position") {
      p.variant = PenaltyParams::Variant::per_position;
    } else if (v == "learned") {
      p.variant = PenaltyParams::Variant::learned;
    } else {
      throw ValidationError("[lambda] unknown penalty variant '" + v + "'");
    }
    p.lambdas = doc.at("lambdas").get<std::vector<double>>();
    for (double l : p.lambdas) {
      if (!std::isfinite(l)) throw ValidationError("[lambda] non-finite lambda in penalty file");
    }
    for (const auto& e : doc.at("report")) {
      p.report.push_back({e.at("position").get<std::size_t>(), e.at("records").get<std::size_t>(),
                          e.at("solved").get<bool>(), e.at("feasible").get<bool>(),
                          e.at("carried").get<bool>(),
                          lambda_candidate_from_string(e.at("candidate").get<std::string>()),
                          e.at("lo").get<double>(), e.at("hi").get<double>()});
    }
    p.model_hash = doc.at("model_hash").get<std::string>();
    if (doc.contains("lambda_net")) {
      const auto& n = doc.at("lambda_net");
      p.lambda_net = LambdaNetHandle{n.at("file").get<std::string>(), n.at("hash").get<std::string>(),
                                     n.at("variant").get<std::string>()};
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("[lambda] malformed penalty file: ") + e.what());
  }
}

void check_penalty_hash(const PenaltyParams& p, const std::string& model_hash,
                        bool override_hash) {
  if (p.model_hash != model_hash && !override_hash) {
    throw ValidationError("[lambda] penalty was calibrated against model " + p.model_hash +
                          ", not " + model_hash + " (pass the override flag to force)");
  }
}

}  // namespace ssg
