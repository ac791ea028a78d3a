#pragma once

#include <map>
#include <memory>
#include <span>
#include <vector>

#include "ssg/dataset.hpp"
#include "ssg/nn.hpp"
#include "ssg/training.hpp"

namespace ssg {

/// Source of next-token scores for sequence decoding. A session is bound to
/// one input and may cache work across prefixes of that input.
class SequenceScorer {
 public:
  class Session {
   public:
    virtual ~Session() = default;
    /// Pre-softmax scores over the V tokens following `prefix`. Entries of
    /// -infinity denote zero probability.
    virtual std::vector<double> logits(const TokenSeq& prefix) = 0;
  };

  virtual ~SequenceScorer() = default;
  [[nodiscard]] virtual std::size_t vocab() const = 0;
  [[nodiscard]] virtual std::size_t max_len() const = 0;
  [[nodiscard]] virtual std::unique_ptr<Session> open(const Input& x) const = 0;
};

struct SequenceShape {
  std::size_t input_vocab = kDigitVocab;
  std::size_t vocab = 0;    // output tokens, end token included (id vocab-1)
  std::size_t max_len = 0;  // complete-sequence bound, end token included
};

struct SequenceExample {
  const TokenSeq* x = nullptr;
  const TokenSeq* y = nullptr;  // complete target, ends with the end token
};

/// Encoder-decoder over digit inputs: embedding, LSTM encoder, a bridge
/// mapping the final encoder state to the decoder's initial state, LSTM
/// decoder fed the previous token (a dedicated start token first), and a
/// linear projection to V scores.
///
///   h0 = tanh(Bh h_enc + bh),  c0 = Bc c_enc + bc
class SequenceModel final : public SequenceScorer {
 public:
  SequenceModel(SequenceShape shape, std::size_t embedding, std::size_t encoder_hidden,
                std::size_t decoder_hidden);

  [[nodiscard]] const SequenceShape& shape() const noexcept { return shape_; }
  [[nodiscard]] std::size_t embedding() const noexcept { return embedding_; }
  [[nodiscard]] std::size_t encoder_hidden() const noexcept { return enc_.hidden; }
  [[nodiscard]] std::size_t decoder_hidden() const noexcept { return dec_.hidden; }
  [[nodiscard]] std::size_t vocab() const override { return shape_.vocab; }
  [[nodiscard]] std::size_t max_len() const override { return shape_.max_len; }
  [[nodiscard]] Token end_token() const noexcept { return static_cast<Token>(shape_.vocab - 1); }

  [[nodiscard]] nn::ParamSet& params() noexcept { return params_; }
  [[nodiscard]] const nn::ParamSet& params() const noexcept { return params_; }
  [[nodiscard]] bool trained() const noexcept { return trained_; }
  void set_trained(bool v) noexcept { trained_ = v; }

  void init(std::uint64_t seed);

  /// Decoder state after consuming some prefix.
  struct Context {
    nn::Vec h;
    nn::Vec c;
  };
  [[nodiscard]] Context start(const TokenSeq& x) const;
  void feed(Context& ctx, Token t) const;
  [[nodiscard]] std::vector<double> context_logits(const Context& ctx) const;

  [[nodiscard]] std::vector<double> step_logits(const TokenSeq& x, const TokenSeq& prefix) const;
  [[nodiscard]] std::vector<double> step_posterior(const TokenSeq& x, const TokenSeq& prefix) const;

  [[nodiscard]] std::unique_ptr<Session> open(const Input& x) const override;

  /// Teacher-forced loss: summed per-position cross-entropy of the target.
  double loss(const SequenceExample& ex, std::span<double> grad) const;

  void check_prefix(const TokenSeq& prefix) const;

 private:
  SequenceShape shape_;
  std::size_t embedding_;
  nn::ParamSet params_;
  std::size_t enc_embed_ = 0;
  std::size_t dec_embed_ = 0;
  nn::Lstm enc_;
  nn::Lstm dec_;
  nn::Dense bridge_h_;
  nn::Dense bridge_c_;
  nn::Dense out_;
  bool trained_ = false;

  [[nodiscard]] Token start_token() const noexcept { return static_cast<Token>(shape_.vocab); }
  [[nodiscard]] nn::Vec embed(std::size_t table, Token t) const;
};

[[nodiscard]] std::vector<SequenceExample> sequence_examples(const std::vector<FlatPair>& flat);

[[nodiscard]] SequenceModel train_sequence_model(const std::vector<FlatPair>& flat,
                                                 const SequenceShape& shape,
                                                 const TrainConfig& cfg,
                                                 TrainReport* report = nullptr);

/// Greedy decode until the end token or max_len; the result includes the end
/// token when one was produced.
[[nodiscard]] TokenSeq greedy_decode(const SequenceModel& model, const TokenSeq& x);

}  // namespace ssg
