#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ssg/dataset.hpp"
#include "ssg/nn.hpp"
#include "ssg/training.hpp"

namespace ssg {

/// One (features, label) training target.
struct LabelExample {
  const Features* x = nullptr;
  std::uint32_t label = 0;
};

/// Softmax classifier f_theta over a finite label universe: a tanh MLP with
/// `hidden` layers (possibly none) followed by a linear output head.
///
/// Inputs are standardised with a per-feature shift/scale fixed at training
/// time; these are part of the checkpoint but not trained.
class LabelModel {
 public:
  LabelModel(std::size_t input_dim, std::vector<std::size_t> hidden, std::size_t universe);

  [[nodiscard]] std::size_t input_dim() const noexcept { return input_dim_; }
  [[nodiscard]] std::size_t universe() const noexcept { return universe_; }
  [[nodiscard]] const std::vector<std::size_t>& hidden() const noexcept { return hidden_; }

  [[nodiscard]] nn::ParamSet& params() noexcept { return params_; }
  [[nodiscard]] const nn::ParamSet& params() const noexcept { return params_; }
  [[nodiscard]] std::vector<double>& input_shift() noexcept { return shift_; }
  [[nodiscard]] std::vector<double>& input_scale() noexcept { return scale_; }
  [[nodiscard]] const std::vector<double>& input_shift() const noexcept { return shift_; }
  [[nodiscard]] const std::vector<double>& input_scale() const noexcept { return scale_; }
  [[nodiscard]] bool trained() const noexcept { return trained_; }
  void set_trained(bool v) noexcept { trained_ = v; }

  void init(std::uint64_t seed);

  [[nodiscard]] std::vector<double> logits(const Features& x) const;
  [[nodiscard]] std::vector<double> posterior(const Features& x) const;

  /// Cross-entropy of one example; accumulates into `grad` when non-empty.
  double loss(const LabelExample& ex, std::span<double> grad) const;

 private:
  std::size_t input_dim_;
  std::vector<std::size_t> hidden_;
  std::size_t universe_;
  nn::ParamSet params_;
  std::vector<nn::Dense> layers_;
  std::vector<double> shift_;
  std::vector<double> scale_;
  bool trained_ = false;

  [[nodiscard]] nn::Vec standardise(const Features& x) const;
};

/// Mean/stddev standardisation fitted on the given inputs; constant features
/// keep scale 1.
void fit_standardisation(std::span<const Features* const> xs, std::vector<double>& shift,
                         std::vector<double>& scale);

[[nodiscard]] std::vector<LabelExample> label_examples(const std::vector<FlatPair>& flat);

/// Trains on flattened pairs: each positive element is its own target, so a
/// multi-element set drives the posterior toward mass split across it.
[[nodiscard]] LabelModel train_label_model(const std::vector<FlatPair>& flat, std::size_t universe,
                                           const TrainConfig& cfg, TrainReport* report = nullptr);

}  // namespace ssg
