#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "ssg/nn.hpp"
#include "ssg/types.hpp"

namespace ssg {

/// Optimisation settings shared by every trainable family.
///
/// `hidden` holds the dense hidden widths (label model, multi-label baseline,
/// lambda-net dense stack). The sequence model reads `embedding`,
/// `encoder_hidden` and `decoder_hidden`; the recurrent lambda-net reads
/// `encoder_hidden` as its cell width.
struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 15;
  std::size_t epochs = 200;
  nn::OptimizerKind optimizer = nn::OptimizerKind::adam;
  std::uint64_t seed = 1;
  std::vector<std::size_t> hidden = {32};
  std::size_t embedding = 60;
  std::size_t encoder_hidden = 60;
  std::size_t decoder_hidden = 120;

  void validate() const;
};

struct TrainReport {
  std::vector<double> epoch_loss;
};

/// Stream used for minibatch shuffling; parameter init uses `seed` directly.
[[nodiscard]] inline std::mt19937_64 shuffle_rng(std::uint64_t seed) {
  return std::mt19937_64(seed ^ 0x9E3779B97F4A7C15ULL);
}

/// Minibatch training loop. `Model` exposes `params()` and
/// `double loss(const Example&, std::span<double> grad) const`, where an empty
/// grad span means forward only. The batch gradient is the mean over the batch.
template <class Model, class Example>
TrainReport fit(Model& model, std::span<const Example> data, const TrainConfig& cfg,
                const std::string& module) {
  cfg.validate();
  if (data.empty()) throw ValidationError("[" + module + "] empty training set");
  nn::ParamSet& ps = model.params();
  nn::Optimizer opt(cfg.optimizer, ps.size(), cfg.learning_rate);
  std::vector<double> grad(ps.size(), 0.0);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto rng = shuffle_rng(cfg.seed);

  TrainReport report;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t k = start; k < stop; ++k) total += model.loss(data[order[k]], grad);
      const double inv = 1.0 / static_cast<double>(stop - start);
      for (double& g : grad) g *= inv;
      opt.step(ps.values(), grad);
    }
    const double mean = total / static_cast<double>(data.size());
    // the probability floor can hide a blow-up from the loss; the weights cannot
    const auto values = ps.values();
    const bool finite_params =
        std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
    if (!std::isfinite(mean) || !finite_params) {
      std::ostringstream msg;
      msg << "[" << module << "] diverged (non-finite loss or weights) at epoch " << epoch + 1
          << " (learning rate " << cfg.learning_rate << ")";
      throw TrainingError(msg.str());
    }
    report.epoch_loss.push_back(mean);
  }
  return report;
}

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t parameters = 0;
};

/// Relative error |g_a - g_fd| / max(|g_a|, |g_fd|, 1e-8) against central
/// differences, maximised over every parameter.
template <class Model, class Example>
GradCheckResult gradient_check(Model& model, const Example& example, double eps) {
  if (!(eps >= 1e-6 && eps <= 1e-3)) {
    throw ValidationError("[models] gradient_check step must lie in [1e-6, 1e-3]");
  }
  nn::ParamSet& ps = model.params();
  std::vector<double> analytic(ps.size(), 0.0);
  model.loss(example, analytic);
  std::span<double> theta = ps.values();
  GradCheckResult res;
  res.parameters = theta.size();
  for (std::size_t k = 0; k < theta.size(); ++k) {
    const double saved = theta[k];
    theta[k] = saved + eps;
    const double up = model.loss(example, std::span<double>{});
    theta[k] = saved - eps;
    const double down = model.loss(example, std::span<double>{});
    theta[k] = saved;
    const double fd = (up - down) / (2.0 * eps);
    const double denom = std::max({std::abs(analytic[k]), std::abs(fd), 1e-8});
    const double err = std::abs(analytic[k] - fd) / denom;
    if (err > res.max_rel_error) {
      res.max_rel_error = err;
      res.worst_index = k;
    }
  }
  return res;
}

}  // namespace ssg
