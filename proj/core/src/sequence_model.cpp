#include "ssg/sequence_model.hpp"

#include <cmath>
#include <random>

namespace ssg {

SequenceModel::SequenceModel(SequenceShape shape, std::size_t embedding,
                             std::size_t encoder_hidden, std::size_t decoder_hidden)
    : shape_(shape), embedding_(embedding) {
  if (shape_.vocab < 2 || shape_.max_len == 0 || shape_.input_vocab == 0) {
    throw ValidationError("[models] invalid sequence model shape");
  }
  if (embedding == 0 || encoder_hidden == 0 || decoder_hidden == 0) {
    throw ValidationError("[models] sequence model sizes must be positive");
  }
  enc_embed_ = params_.add("enc_embed", shape_.input_vocab, embedding);
  enc_ = nn::Lstm::create(params_, "encoder", embedding, encoder_hidden);
  bridge_h_ = nn::Dense::create(params_, "bridge_h", encoder_hidden, decoder_hidden);
  bridge_c_ = nn::Dense::create(params_, "bridge_c", encoder_hidden, decoder_hidden);
  // Row `vocab` is the start token.
  dec_embed_ = params_.add("dec_embed", shape_.vocab + 1, embedding);
  dec_ = nn::Lstm::create(params_, "decoder", embedding, decoder_hidden);
  out_ = nn::Dense::create(params_, "out", decoder_hidden, shape_.vocab);
}

void SequenceModel::init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  params_.init_fan_in(rng);
  enc_.init_forget_bias(params_);
  dec_.init_forget_bias(params_);
}

nn::Vec SequenceModel::embed(std::size_t table, Token t) const {
  return params_.mat(table).row(t).transpose();
}

SequenceModel::Context SequenceModel::start(const TokenSeq& x) const {
  nn::Vec h = nn::Vec::Zero(static_cast<Eigen::Index>(enc_.hidden));
  nn::Vec c = nn::Vec::Zero(static_cast<Eigen::Index>(enc_.hidden));
  for (Token t : x.tokens) {
    if (t < 0 || static_cast<std::size_t>(t) >= shape_.input_vocab) {
      throw ValidationError("[models] input token outside input vocabulary");
    }
    enc_.advance(params_, embed(enc_embed_, t), h, c);
  }
  Context ctx;
  ctx.h = bridge_h_.forward(params_, h).array().tanh();
  ctx.c = bridge_c_.forward(params_, c);
  return ctx;
}

void SequenceModel::feed(Context& ctx, Token t) const {
  dec_.advance(params_, embed(dec_embed_, t), ctx.h, ctx.c);
}

std::vector<double> SequenceModel::context_logits(const Context& ctx) const {
  const nn::Vec z = out_.forward(params_, ctx.h);
  return {z.data(), z.data() + z.size()};
}

void SequenceModel::check_prefix(const TokenSeq& prefix) const {
  if (prefix.size() >= shape_.max_len) {
    throw ValidationError("[models] prefix length " + std::to_string(prefix.size()) +
                          " leaves no position below max_len " + std::to_string(shape_.max_len));
  }
  for (Token t : prefix.tokens) {
    if (t == end_token()) throw ValidationError("[models] prefix contains the end token");
    if (t < 0 || static_cast<std::size_t>(t) >= shape_.vocab) {
      throw ValidationError("[models] prefix token outside vocabulary");
    }
  }
}

std::vector<double> SequenceModel::step_logits(const TokenSeq& x, const TokenSeq& prefix) const {
  check_prefix(prefix);
  Context ctx = start(x);
  feed(ctx, start_token());
  for (Token t : prefix.tokens) feed(ctx, t);
  return context_logits(ctx);
}

std::vector<double> SequenceModel::step_posterior(const TokenSeq& x,
                                                  const TokenSeq& prefix) const {
  const auto z = step_logits(x, prefix);
  const nn::Vec p = nn::softmax(nn::ConstVecView(z.data(), static_cast<Eigen::Index>(z.size())));
  return {p.data(), p.data() + p.size()};
}

namespace {

class ModelSession final : public SequenceScorer::Session {
 public:
  ModelSession(const SequenceModel& model, const TokenSeq& x)
      : model_(model), root_(model.start(x)) {}

  std::vector<double> logits(const TokenSeq& prefix) override {
    model_.check_prefix(prefix);
    return model_.context_logits(context(prefix));
  }

 private:
  const SequenceModel::Context& context(const TokenSeq& prefix) {
    if (auto it = cache_.find(prefix); it != cache_.end()) return it->second;
    SequenceModel::Context ctx;
    if (prefix.empty()) {
      ctx = root_;
      model_.feed(ctx, static_cast<Token>(model_.vocab()));
    } else {
      TokenSeq parent = prefix;
      parent.tokens.pop_back();
      ctx = context(parent);
      model_.feed(ctx, prefix.tokens.back());
    }
    return cache_.emplace(prefix, std::move(ctx)).first->second;
  }

  const SequenceModel& model_;
  SequenceModel::Context root_;
  std::map<TokenSeq, SequenceModel::Context> cache_;
};

}  // namespace

std::unique_ptr<SequenceScorer::Session> SequenceModel::open(const Input& x) const {
  const auto* seq = std::get_if<TokenSeq>(&x);
  if (seq == nullptr) throw ValidationError("[models] sequence model needs a token input");
  return std::make_unique<ModelSession>(*this, *seq);
}

double SequenceModel::loss(const SequenceExample& ex, std::span<double> grad) const {
  const TokenSeq& x = *ex.x;
  const TokenSeq& y = *ex.y;
  const auto he = static_cast<Eigen::Index>(enc_.hidden);

  std::vector<nn::LstmStep> enc_steps;
  enc_steps.reserve(x.size());
  nn::Vec h = nn::Vec::Zero(he);
  nn::Vec c = nn::Vec::Zero(he);
  for (Token t : x.tokens) {
    enc_steps.push_back(enc_.forward(params_, embed(enc_embed_, t), h, c));
    h = enc_steps.back().h;
    c = enc_steps.back().c;
  }
  const nn::Vec h_enc = h;
  const nn::Vec c_enc = c;
  const nn::Vec h0 = bridge_h_.forward(params_, h_enc).array().tanh();
  const nn::Vec c0 = bridge_c_.forward(params_, c_enc);

  const double floor = std::log(nn::kProbFloor);
  std::vector<nn::LstmStep> dec_steps;
  std::vector<nn::Vec> logits;
  std::vector<bool> clipped;
  dec_steps.reserve(y.size());
  double total = 0.0;
  h = h0;
  c = c0;
  for (std::size_t t = 0; t < y.size(); ++t) {
    const Token in = t == 0 ? start_token() : y.tokens[t - 1];
    dec_steps.push_back(dec_.forward(params_, embed(dec_embed_, in), h, c));
    h = dec_steps.back().h;
    c = dec_steps.back().c;
    logits.push_back(out_.forward(params_, h));
    const double log_p = logits.back()[y.tokens[t]] - nn::log_sum_exp(logits.back());
    clipped.push_back(log_p < floor);
    total += -std::max(log_p, floor);
  }
  if (grad.empty()) return total;

  const auto hd = static_cast<Eigen::Index>(dec_.hidden);
  nn::Vec dh_next = nn::Vec::Zero(hd);
  nn::Vec dc_next = nn::Vec::Zero(hd);
  nn::Vec dx, dh_prev, dc_prev, dh_out;
  auto dec_embed_grad = params_.grad_mat(grad, dec_embed_);
  for (std::size_t t = y.size(); t-- > 0;) {
    nn::Vec dh = dh_next;
    if (!clipped[t]) {
      nn::Vec dz = nn::softmax(logits[t]);
      dz[y.tokens[t]] -= 1.0;
      out_.backward(params_, grad, dec_steps[t].h, dz, &dh_out);
      dh += dh_out;
    }
    dec_.backward(params_, grad, dec_steps[t], dh, dc_next, dx, dh_prev, dc_prev);
    const Token in = t == 0 ? start_token() : y.tokens[t - 1];
    dec_embed_grad.row(in) += dx.transpose();
    dh_next = dh_prev;
    dc_next = dc_prev;
  }

  const nn::Vec dpre_h = dh_next.array() * (1.0 - h0.array().square());
  nn::Vec dh_enc, dc_enc;
  bridge_h_.backward(params_, grad, h_enc, dpre_h, &dh_enc);
  bridge_c_.backward(params_, grad, c_enc, dc_next, &dc_enc);

  auto enc_embed_grad = params_.grad_mat(grad, enc_embed_);
  for (std::size_t t = x.size(); t-- > 0;) {
    enc_.backward(params_, grad, enc_steps[t], dh_enc, dc_enc, dx, dh_prev, dc_prev);
    enc_embed_grad.row(x.tokens[t]) += dx.transpose();
    dh_enc = dh_prev;
    dc_enc = dc_prev;
  }
  return total;
}

std::vector<SequenceExample> sequence_examples(const std::vector<FlatPair>& flat) {
  std::vector<SequenceExample> out;
  out.reserve(flat.size());
  for (const FlatPair& p : flat) {
    const auto* x = std::get_if<TokenSeq>(&p.x);
    const auto* y = std::get_if<TokenSeq>(&p.y);
    if (x == nullptr || y == nullptr) {
      throw ValidationError("[models] sequence model needs token inputs and sequence targets");
    }
    out.push_back({x, y});
  }
  return out;
}

SequenceModel train_sequence_model(const std::vector<FlatPair>& flat, const SequenceShape& shape,
                                   const TrainConfig& cfg, TrainReport* report) {
  if (flat.empty()) throw ValidationError("[models] empty training set");
  const auto examples = sequence_examples(flat);
  const auto end = static_cast<Token>(shape.vocab - 1);
  for (const SequenceExample& ex : examples) {
    if (ex.y->empty() || ex.y->tokens.back() != end) {
      throw ValidationError("[models] training target lacks the end token");
    }
    if (ex.y->size() > shape.max_len) {
      throw ValidationError("[models] training target longer than max_len " +
                            std::to_string(shape.max_len));
    }
  }
  SequenceModel model(shape, cfg.embedding, cfg.encoder_hidden, cfg.decoder_hidden);
  model.init(cfg.seed);
  auto rep = fit(model, std::span<const SequenceExample>(examples), cfg, "models");
  model.set_trained(true);
  if (report != nullptr) *report = std::move(rep);
  return model;
}

TokenSeq greedy_decode(const SequenceModel& model, const TokenSeq& x) {
  SequenceModel::Context ctx = model.start(x);
  model.feed(ctx, static_cast<Token>(model.vocab()));
  TokenSeq out;
  while (out.size() < model.max_len()) {
    const auto z = model.context_logits(ctx);
    const auto best = static_cast<Token>(std::max_element(z.begin(), z.end()) - z.begin());
    out.tokens.push_back(best);
    if (best == model.end_token()) break;
    model.feed(ctx, best);
  }
  return out;
}

}  // namespace ssg
