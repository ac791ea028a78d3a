#include "ssg/lambda_net.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "ssg/checkpoint.hpp"
#include "ssg/lambda.hpp"

namespace ssg {

namespace {

constexpr double kScoreFloor = -20.0;
constexpr double kScoreScale = 0.25;
constexpr double kWindowPad = -6.0;  // below any normalised score
constexpr std::size_t kKernel = 3;

double weighted_bce(double z, bool positive, double pos_weight, double* dz) {
  if (positive) {
    if (dz) *dz = pos_weight * (nn::sigmoid(z) - 1.0);
    return pos_weight * nn::softplus(-z);
  }
  if (dz) *dz = nn::sigmoid(z);
  return nn::softplus(z);
}

nn::Vec tanh_vec(const nn::Vec& v) { return v.array().tanh().matrix(); }

}  // namespace

std::string_view to_string(LambdaNetVariant v) {
  return v == LambdaNetVariant::recurrent ? "recurrent" : "windowed";
}

LambdaNetVariant lambda_net_variant_from_string(std::string_view s) {
  if (s == "recurrent") return LambdaNetVariant::recurrent;
  if (s == "windowed") return LambdaNetVariant::windowed;
  throw ValidationError("[lambda_net] unknown variant '" + std::string(s) + "'");
}

LambdaNet::LambdaNet(LambdaNetOptions opts) : opts_(std::move(opts)) {
  if (opts_.vocab < 2) throw ValidationError("[lambda_net] vocab must be at least 2");
  if (opts_.max_len == 0) throw ValidationError("[lambda_net] max_len must be positive");
  if (!(opts_.threshold > 0.0 && opts_.threshold < 1.0)) {
    throw ValidationError("[lambda_net] threshold must lie in (0,1)");
  }
  if (opts_.variant == LambdaNetVariant::windowed) {
    if (opts_.window_radius == 0) throw ValidationError("[lambda_net] window radius must be >= 1");
    if (opts_.filters == 0) throw ValidationError("[lambda_net] filters must be positive");
    if (opts_.dense.empty() || std::find(opts_.dense.begin(), opts_.dense.end(), 0u) != opts_.dense.end()) {
      throw ValidationError("[lambda_net] dense widths must be positive");
    }
    conv_w_ = params_.add("conv.w", opts_.filters, 2 * kKernel);
    conv_b_ = params_.add("conv.b", opts_.filters, 1);
    std::size_t in = opts_.filters + (2 * opts_.window_radius + 1) + opts_.vocab + opts_.max_len;
    for (std::size_t l = 0; l < opts_.dense.size(); ++l) {
      dense_.push_back(nn::Dense::create(params_, "dense" + std::to_string(l), in, opts_.dense[l]));
      in = opts_.dense[l];
    }
    dense_.push_back(nn::Dense::create(params_, "out", in, 1));
  } else {
    if (opts_.cell == 0) throw ValidationError("[lambda_net] cell width must be positive");
    const std::size_t in = 1 + opts_.max_len;
    enc_ = nn::Lstm::create(params_, "enc", in, opts_.cell);
    dec_ = nn::Lstm::create(params_, "dec", in, opts_.cell);
    head_ = nn::Dense::create(params_, "out", opts_.cell, 1);
  }
}

void LambdaNet::init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  params_.init_fan_in(rng);
  if (opts_.variant == LambdaNetVariant::recurrent) {
    enc_.init_forget_bias(params_);
    dec_.init_forget_bias(params_);
  }
}

std::vector<double> LambdaNet::normalise(std::span<const double> logits) const {
  if (logits.size() != opts_.vocab) {
    throw ValidationError("[lambda_net] expected " + std::to_string(opts_.vocab) + " scores, got " +
                          std::to_string(logits.size()));
  }
  double top = -std::numeric_limits<double>::infinity();
  for (double l : logits) top = std::max(top, l);
  if (!std::isfinite(top)) throw ValidationError("[lambda_net] scores have no finite maximum");
  std::vector<double> c(logits.size());
  for (std::size_t k = 0; k < logits.size(); ++k) {
    const double shifted = std::isnan(logits[k]) ? kScoreFloor : logits[k] - top;
    c[k] = std::max(shifted, kScoreFloor) * kScoreScale;
  }
  return c;
}

std::vector<double> LambdaNet::scores(std::span<const double> logits, std::size_t position) const {
  if (position == 0 || position > opts_.max_len) {
    throw ValidationError("[lambda_net] position must lie in [1, max_len]");
  }
  const auto c = normalise(logits);
  std::vector<double> out;
  if (opts_.variant == LambdaNetVariant::windowed) {
    windowed_pass(c, position, nullptr, {}, &out);
  } else {
    recurrent_pass(c, position, nullptr, {}, &out);
  }
  return out;
}

double LambdaNet::loss(const LambdaNetExample& ex, std::span<double> grad) const {
  if (ex.targets.size() != opts_.vocab) {
    throw ValidationError("[lambda_net] example targets must cover every token");
  }
  if (ex.position == 0 || ex.position > opts_.max_len) {
    throw ValidationError("[lambda_net] example position out of range");
  }
  const auto c = normalise(ex.logits);
  return opts_.variant == LambdaNetVariant::windowed
             ? windowed_pass(c, ex.position, &ex.targets, grad, nullptr)
             : recurrent_pass(c, ex.position, &ex.targets, grad, nullptr);
}

double LambdaNet::windowed_pass(const std::vector<double>& c, std::size_t position,
                                const std::vector<std::uint8_t>* targets, std::span<double> grad,
                                std::vector<double>* out) const {
  const std::size_t V = opts_.vocab;
  const std::size_t R = opts_.window_radius;
  const std::size_t width = 2 * R + 1;
  const std::size_t conv_positions = width - kKernel + 1;
  const std::size_t F = opts_.filters;
  const bool backprop = !grad.empty();

  std::vector<std::size_t> order(V);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return c[a] > c[b]; });
  std::vector<std::size_t> rank(V);
  for (std::size_t r = 0; r < V; ++r) rank[order[r]] = r;

  const auto convw = params_.mat(conv_w_);
  const auto convb = params_.vec(conv_b_);
  double total = 0.0;
  if (out) out->assign(V, 0.0);

  for (std::size_t k = 0; k < V; ++k) {
    // window rows: value, valid
    std::vector<double> val(width), valid(width);
    for (std::size_t m = 0; m < width; ++m) {
      const auto r = static_cast<std::ptrdiff_t>(rank[k]) + static_cast<std::ptrdiff_t>(m) -
                     static_cast<std::ptrdiff_t>(R);
      if (r >= 0 && r < static_cast<std::ptrdiff_t>(V)) {
        val[m] = c[order[static_cast<std::size_t>(r)]];
        valid[m] = 1.0;
      } else {
        val[m] = kWindowPad;
        valid[m] = 0.0;
      }
    }
    std::vector<nn::Vec> patches(conv_positions, nn::Vec(2 * kKernel));
    for (std::size_t p = 0; p < conv_positions; ++p) {
      for (std::size_t j = 0; j < kKernel; ++j) {
        patches[p][static_cast<Eigen::Index>(j)] = val[p + j];
        patches[p][static_cast<Eigen::Index>(kKernel + j)] = valid[p + j];
      }
    }
    nn::Vec pooled(static_cast<Eigen::Index>(F));
    std::vector<std::size_t> arg(F, 0);
    for (std::size_t f = 0; f < F; ++f) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t p = 0; p < conv_positions; ++p) {
        const double a = std::tanh(convw.row(static_cast<Eigen::Index>(f)).dot(patches[p]) +
                                   convb[static_cast<Eigen::Index>(f)]);
        if (a > best) {
          best = a;
          arg[f] = p;
        }
      }
      pooled[static_cast<Eigen::Index>(f)] = best;
    }

    nn::Vec feat = nn::Vec::Zero(static_cast<Eigen::Index>(F + width + V + opts_.max_len));
    feat.head(static_cast<Eigen::Index>(F)) = pooled;
    for (std::size_t m = 0; m < width; ++m) feat[static_cast<Eigen::Index>(F + m)] = val[m];
    feat[static_cast<Eigen::Index>(F + width + k)] = 1.0;
    feat[static_cast<Eigen::Index>(F + width + V + position - 1)] = 1.0;

    std::vector<nn::Vec> acts{feat};
    for (std::size_t l = 0; l + 1 < dense_.size(); ++l) {
      acts.push_back(tanh_vec(dense_[l].forward(params_, acts.back())));
    }
    const double z = dense_.back().forward(params_, acts.back())[0];
    if (out) (*out)[k] = nn::sigmoid(z);
    if (!targets) continue;

    double dz = 0.0;
    total += weighted_bce(z, (*targets)[k] != 0, pos_weight_, backprop ? &dz : nullptr);
    if (!backprop) continue;

    nn::Vec dy = nn::Vec::Constant(1, dz);
    nn::Vec dx;
    dense_.back().backward(params_, grad, acts.back(), dy, &dx);
    for (std::size_t l = dense_.size() - 1; l-- > 0;) {
      dy = dx.array() * (1.0 - acts[l + 1].array().square());
      dense_[l].backward(params_, grad, acts[l], dy, &dx);
    }
    auto gw = params_.grad_mat(grad, conv_w_);
    auto gb = params_.grad_vec(grad, conv_b_);
    for (std::size_t f = 0; f < F; ++f) {
      const double a = pooled[static_cast<Eigen::Index>(f)];
      const double dpre = dx[static_cast<Eigen::Index>(f)] * (1.0 - a * a);
      gw.row(static_cast<Eigen::Index>(f)) += dpre * patches[arg[f]].transpose();
      gb[static_cast<Eigen::Index>(f)] += dpre;
    }
  }
  return total;
}

double LambdaNet::recurrent_pass(const std::vector<double>& c, std::size_t position,
                                 const std::vector<std::uint8_t>* targets, std::span<double> grad,
                                 std::vector<double>* out) const {
  const std::size_t V = opts_.vocab;
  const auto H = static_cast<Eigen::Index>(opts_.cell);
  const bool backprop = !grad.empty() && targets;

  std::vector<nn::Vec> inputs(V, nn::Vec::Zero(static_cast<Eigen::Index>(1 + opts_.max_len)));
  for (std::size_t k = 0; k < V; ++k) {
    inputs[k][0] = c[k];
    inputs[k][static_cast<Eigen::Index>(position)] = 1.0;
  }

  nn::Vec h = nn::Vec::Zero(H), cell = nn::Vec::Zero(H);
  std::vector<nn::LstmStep> enc_steps, dec_steps;
  for (std::size_t k = 0; k < V; ++k) {
    if (backprop) {
      enc_steps.push_back(enc_.forward(params_, inputs[k], h, cell));
      h = enc_steps.back().h;
      cell = enc_steps.back().c;
    } else {
      enc_.advance(params_, inputs[k], h, cell);
    }
  }
  std::vector<double> z(V);
  for (std::size_t k = 0; k < V; ++k) {
    if (backprop) {
      dec_steps.push_back(dec_.forward(params_, inputs[k], h, cell));
      h = dec_steps.back().h;
      cell = dec_steps.back().c;
    } else {
      dec_.advance(params_, inputs[k], h, cell);
    }
    z[k] = head_.forward(params_, h)[0];
  }
  if (out) {
    out->resize(V);
    for (std::size_t k = 0; k < V; ++k) (*out)[k] = nn::sigmoid(z[k]);
  }
  if (!targets) return 0.0;

  double total = 0.0;
  std::vector<double> dz(V, 0.0);
  for (std::size_t k = 0; k < V; ++k) {
    total += weighted_bce(z[k], (*targets)[k] != 0, pos_weight_, backprop ? &dz[k] : nullptr);
  }
  if (!backprop) return total;

  nn::Vec dh = nn::Vec::Zero(H), dc = nn::Vec::Zero(H);
  nn::Vec dx, dh_prev, dc_prev;
  for (std::size_t k = V; k-- > 0;) {
    nn::Vec dhead;
    head_.backward(params_, grad, dec_steps[k].h, nn::Vec::Constant(1, dz[k]), &dhead);
    dh += dhead;
    dec_.backward(params_, grad, dec_steps[k], dh, dc, dx, dh_prev, dc_prev);
    dh = dh_prev;
    dc = dc_prev;
  }
  for (std::size_t k = V; k-- > 0;) {
    enc_.backward(params_, grad, enc_steps[k], dh, dc, dx, dh_prev, dc_prev);
    dh = dh_prev;
    dc = dc_prev;
  }
  return total;
}

LambdaTrainingSet build_lambda_training_set(const SequenceScorer& scorer, const Dataset& dataset) {
  if (dataset.kind() != TaskKind::sequences) {
    throw ValidationError("[lambda_net] sequence scorer needs a sequence dataset");
  }
  const std::size_t V = scorer.vocab();
  if (V != dataset.universe()) {
    throw ValidationError("[lambda_net] scorer vocabulary does not match the dataset");
  }
  LambdaTrainingSet set;
  for (const SetSample& s : dataset.samples()) {
    const auto& targets = std::get<SequenceSet>(s.y);
    auto session = scorer.open(s.x);
    std::set<TokenSeq> prefixes;
    for (const TokenSeq& t : targets) {
      for (std::size_t len = 0; len < t.size(); ++len) {
        prefixes.insert(TokenSeq{{t.tokens.begin(), t.tokens.begin() + static_cast<std::ptrdiff_t>(len)}});
      }
    }
    if (targets.empty()) prefixes.insert(TokenSeq{});
    for (const TokenSeq& prefix : prefixes) {
      LambdaNetExample ex;
      ex.logits = session->logits(prefix);
      ex.position = prefix.size() + 1;
      ex.targets.assign(V, 0);
      if (!targets.empty()) {
        for (Token t : position_candidates(targets, prefix, V).positives) {
          ex.targets[static_cast<std::size_t>(t)] = 1;
        }
      }
      const auto pos = static_cast<std::size_t>(std::count(ex.targets.begin(), ex.targets.end(), 1));
      set.positives += pos;
      set.negatives += V - pos;
      set.examples.push_back(std::move(ex));
    }
  }
  return set;
}

LambdaTrainingSet build_lambda_training_set(const LabelModel& model, const Dataset& dataset) {
  if (dataset.kind() != TaskKind::labels) {
    throw ValidationError("[lambda_net] label model needs a label dataset");
  }
  const std::size_t V = model.universe();
  LambdaTrainingSet set;
  for (const SetSample& s : dataset.samples()) {
    LambdaNetExample ex;
    ex.logits = model.logits(std::get<Features>(s.x));
    ex.position = 1;
    ex.targets.assign(V, 0);
    for (const Label& l : std::get<LabelSet>(s.y)) ex.targets.at(l.id) = 1;
    const auto pos = static_cast<std::size_t>(std::count(ex.targets.begin(), ex.targets.end(), 1));
    set.positives += pos;
    set.negatives += V - pos;
    set.examples.push_back(std::move(ex));
  }
  return set;
}

LambdaNet train_lambda_net(const LambdaTrainingSet& data, LambdaNetOptions opts,
                           const TrainConfig& cfg, TrainReport* report) {
  if (data.examples.empty()) throw ValidationError("[lambda_net] empty training set");
  if (opts.vocab == 0) opts.vocab = data.examples.front().logits.size();
  std::size_t pos = 0, neg = 0;
  for (const LambdaNetExample& ex : data.examples) {
    for (std::uint8_t t : ex.targets) (t ? pos : neg) += 1;
  }
  if (pos == 0 || neg == 0) {
    throw TrainingError("[lambda_net] training set has a single class (" + std::to_string(pos) +
                        " positive, " + std::to_string(neg) + " negative tokens)");
  }
  LambdaNet net(std::move(opts));
  net.init(cfg.seed);
  net.set_positive_weight(static_cast<double>(neg) / static_cast<double>(pos));
  TrainReport r = fit(net, std::span<const LambdaNetExample>(data.examples), cfg, "lambda_net");
  if (report) *report = std::move(r);
  return net;
}

std::vector<Token> classify_positives(const LambdaNet& net, std::span<const double> logits,
                                      std::size_t position) {
  const auto s = net.scores(logits, position);
  std::vector<Token> out;
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (s[k] >= net.options().threshold) out.push_back(static_cast<Token>(k));
  }
  return out;
}

TokenGate lambda_gate(const LambdaNet& net) {
  return [&net](const Input&, const TokenSeq&, std::span<const double> logits,
                std::size_t position) { return classify_positives(net, logits, position); };
}

LambdaNetAccuracy evaluate_lambda_net(const LambdaNet& net,
                                      std::span<const LambdaNetExample> examples) {
  LambdaNetAccuracy acc;
  if (examples.empty()) return acc;
  std::size_t right = 0, tokens = 0, exact = 0;
  for (const LambdaNetExample& ex : examples) {
    const auto s = net.scores(ex.logits, ex.position);
    bool all = true;
    for (std::size_t k = 0; k < s.size(); ++k) {
      const bool hit = (s[k] >= net.options().threshold) == (ex.targets.at(k) != 0);
      right += hit;
      all = all && hit;
    }
    tokens += s.size();
    exact += all;
  }
  acc.token_accuracy = static_cast<double>(right) / static_cast<double>(tokens);
  acc.exact_set_rate = static_cast<double>(exact) / static_cast<double>(examples.size());
  return acc;
}

nlohmann::json to_json(const LambdaNet& net) {
  const auto& o = net.options();
  nlohmann::json doc;
  doc["format_version"] = kCheckpointVersion;
  doc["family"] = "lambda_net";
  doc["variant"] = std::string(to_string(o.variant));
  doc["arch"] = {{"vocab", o.vocab},       {"max_len", o.max_len}, {"window_radius", o.window_radius},
                 {"filters", o.filters},   {"cell", o.cell},       {"dense", o.dense}};
  doc["threshold"] = o.threshold;
  doc["positive_weight"] = net.positive_weight();
  doc["params"] = params_to_json(net.params());
  return doc;
}

LambdaNet lambda_net_from_json(const nlohmann::json& doc) {
  check_header(doc, "lambda_net");
  try {
    LambdaNetOptions o;
    o.variant = lambda_net_variant_from_string(doc.at("variant").get<std::string>());
    const auto& a = doc.at("arch");
    o.vocab = a.at("vocab").get<std::size_t>();
    o.max_len = a.at("max_len").get<std::size_t>();
    o.window_radius = a.at("window_radius").get<std::size_t>();
    o.filters = a.at("filters").get<std::size_t>();
    o.cell = a.at("cell").get<std::size_t>();
    o.dense = a.at("dense").get<std::vector<std::size_t>>();
    o.threshold = doc.at("threshold").get<double>();
    LambdaNet net(o);
    net.set_positive_weight(doc.at("positive_weight").get<double>());
    params_from_json(doc.at("params"), net.params());
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("[lambda_net] malformed checkpoint: ") + e.what());
  }
}

}  // namespace ssg
