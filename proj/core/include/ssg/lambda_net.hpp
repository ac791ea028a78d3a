#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ssg/dataset.hpp"
#include "ssg/decoder.hpp"
#include "ssg/label_model.hpp"
#include "ssg/nn.hpp"
#include "ssg/sequence_model.hpp"
#include "ssg/training.hpp"

namespace ssg {

/// Base-model scores at one decode position with the positive-continuation
/// mask as target.
struct LambdaNetExample {
  std::vector<double> logits;
  std::size_t position = 1;  // 1-based
  std::vector<std::uint8_t> targets;
};

struct LambdaTrainingSet {
  std::vector<LambdaNetExample> examples;
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

enum class LambdaNetVariant { recurrent, windowed };

[[nodiscard]] std::string_view to_string(LambdaNetVariant v);
[[nodiscard]] LambdaNetVariant lambda_net_variant_from_string(std::string_view s);

struct LambdaNetOptions {
  LambdaNetVariant variant = LambdaNetVariant::windowed;
  std::size_t vocab = 0;
  std::size_t max_len = 1;
  std::size_t window_radius = 2;
  std::size_t filters = 8;
  std::size_t cell = 32;               // recurrent cell width
  std::vector<std::size_t> dense = {32, 16};  // windowed dense stack
  double threshold = 0.5;
};

/// Binary token classifier replacing lambda: scores every vocabulary token at
/// a position as emit (positive) or suppress.
///
/// Inputs are the logits shifted so their maximum is 0, floored at -20 and
/// scaled by 1/4, so the net sees the same representation for any softmax-
/// equivalent score vector.
///
/// windowed: for token k at rank r (descending score), the scores at ranks
///   r-R..r+R (plus a validity channel) go through one 1-D convolution
///   (kernel 3, tanh) and a max-pool over positions; the pooled filters, the
///   raw window, one-hot k and one-hot position feed a tanh dense stack and a
///   sigmoid unit.
/// recurrent: an LSTM encoder reads (score_k, one-hot position) for
///   k = 0..V-1; an LSTM decoder starting from the encoder's final state reads
///   the same sequence and emits one sigmoid score per token.
class LambdaNet {
 public:
  explicit LambdaNet(LambdaNetOptions opts);

  [[nodiscard]] const LambdaNetOptions& options() const noexcept { return opts_; }
  [[nodiscard]] nn::ParamSet& params() noexcept { return params_; }
  [[nodiscard]] const nn::ParamSet& params() const noexcept { return params_; }
  [[nodiscard]] double positive_weight() const noexcept { return pos_weight_; }
  void set_positive_weight(double w) noexcept { pos_weight_ = w; }

  void init(std::uint64_t seed);

  /// Per-token probability of being a positive continuation.
  [[nodiscard]] std::vector<double> scores(std::span<const double> logits,
                                           std::size_t position) const;

  /// Weighted binary cross-entropy summed over tokens.
  double loss(const LambdaNetExample& ex, std::span<double> grad) const;

 private:
  LambdaNetOptions opts_;
  nn::ParamSet params_;
  double pos_weight_ = 1.0;
  // windowed
  std::size_t conv_w_ = 0;
  std::size_t conv_b_ = 0;
  std::vector<nn::Dense> dense_;
  // recurrent
  nn::Lstm enc_;
  nn::Lstm dec_;
  nn::Dense head_;

  [[nodiscard]] std::vector<double> normalise(std::span<const double> logits) const;
  double windowed_pass(const std::vector<double>& c, std::size_t position,
                       const std::vector<std::uint8_t>* targets, std::span<double> grad,
                       std::vector<double>* out) const;
  double recurrent_pass(const std::vector<double>& c, std::size_t position,
                        const std::vector<std::uint8_t>* targets, std::span<double> grad,
                        std::vector<double>* out) const;
};

/// One example per (sample, distinct ground-truth prefix); a sample with an
/// empty target set contributes its empty prefix with no positives.
[[nodiscard]] LambdaTrainingSet build_lambda_training_set(const SequenceScorer& scorer,
                                                          const Dataset& dataset);
/// Label tasks: one position-1 example per sample.
[[nodiscard]] LambdaTrainingSet build_lambda_training_set(const LabelModel& model,
                                                          const Dataset& dataset);

/// Positive class weighted by #neg/#pos of the training set.
[[nodiscard]] LambdaNet train_lambda_net(const LambdaTrainingSet& data, LambdaNetOptions opts,
                                         const TrainConfig& cfg, TrainReport* report = nullptr);

/// Tokens scoring at or above the net's threshold.
[[nodiscard]] std::vector<Token> classify_positives(const LambdaNet& net,
                                                    std::span<const double> logits,
                                                    std::size_t position);

[[nodiscard]] TokenGate lambda_gate(const LambdaNet& net);

struct LambdaNetAccuracy {
  double token_accuracy = 0.0;
  double exact_set_rate = 0.0;  // examples whose positive set is reproduced exactly
};
[[nodiscard]] LambdaNetAccuracy evaluate_lambda_net(const LambdaNet& net,
                                                    std::span<const LambdaNetExample> examples);

[[nodiscard]] nlohmann::json to_json(const LambdaNet& net);
[[nodiscard]] LambdaNet lambda_net_from_json(const nlohmann::json& doc);

}  // namespace ssg
