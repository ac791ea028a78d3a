#pragma once

#include <span>
#include <vector>

#include "ssg/dataset.hpp"
#include "ssg/nn.hpp"
#include "ssg/training.hpp"

namespace ssg {

struct MultiLabelExample {
  const Features* x = nullptr;
  const LabelSet* y = nullptr;
};

/// Sigmoid network: one independent binary output per label, trained with
/// summed binary cross-entropy. predict(x) keeps labels scoring >= threshold.
class MultiLabelBaseline {
 public:
  MultiLabelBaseline(std::size_t input_dim, std::vector<std::size_t> hidden, std::size_t universe,
                     double threshold = 0.5);

  [[nodiscard]] std::size_t input_dim() const noexcept { return input_dim_; }
  [[nodiscard]] std::size_t universe() const noexcept { return universe_; }
  [[nodiscard]] const std::vector<std::size_t>& hidden() const noexcept { return hidden_; }
  [[nodiscard]] double threshold() const noexcept { return threshold_; }
  void set_threshold(double t);

  [[nodiscard]] nn::ParamSet& params() noexcept { return params_; }
  [[nodiscard]] const nn::ParamSet& params() const noexcept { return params_; }
  [[nodiscard]] std::vector<double>& input_shift() noexcept { return shift_; }
  [[nodiscard]] std::vector<double>& input_scale() noexcept { return scale_; }
  [[nodiscard]] const std::vector<double>& input_shift() const noexcept { return shift_; }
  [[nodiscard]] const std::vector<double>& input_scale() const noexcept { return scale_; }

  void init(std::uint64_t seed);

  [[nodiscard]] std::vector<double> outputs(const Features& x) const;
  [[nodiscard]] LabelSet predict(const Features& x) const;

  double loss(const MultiLabelExample& ex, std::span<double> grad) const;

 private:
  std::size_t input_dim_;
  std::vector<std::size_t> hidden_;
  std::size_t universe_;
  double threshold_;
  nn::ParamSet params_;
  std::vector<nn::Dense> layers_;
  std::vector<double> shift_;
  std::vector<double> scale_;

  [[nodiscard]] nn::Vec standardise(const Features& x) const;
};

/// Applies a threshold to per-label outputs.
[[nodiscard]] LabelSet threshold_outputs(std::span<const double> outputs, double threshold);

[[nodiscard]] MultiLabelBaseline train_multilabel_baseline(const Dataset& dataset,
                                                           const TrainConfig& cfg,
                                                           TrainReport* report = nullptr);

}  // namespace ssg
