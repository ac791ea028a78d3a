#include "ssg/multilabel_baseline.hpp"

#include <random>

#include "ssg/label_model.hpp"

namespace ssg {

MultiLabelBaseline::MultiLabelBaseline(std::size_t input_dim, std::vector<std::size_t> hidden,
                                       std::size_t universe, double threshold)
    : input_dim_(input_dim), hidden_(std::move(hidden)), universe_(universe) {
  if (input_dim_ == 0 || universe_ == 0) {
    throw ValidationError("[models] baseline needs positive input and output sizes");
  }
  set_threshold(threshold);
  std::size_t in = input_dim_;
  for (std::size_t l = 0; l < hidden_.size(); ++l) {
    layers_.push_back(nn::Dense::create(params_, "hidden" + std::to_string(l), in, hidden_[l]));
    in = hidden_[l];
  }
  layers_.push_back(nn::Dense::create(params_, "out", in, universe_));
  shift_.assign(input_dim_, 0.0);
  scale_.assign(input_dim_, 1.0);
}

void MultiLabelBaseline::set_threshold(double t) {
  if (!(t > 0.0 && t < 1.0)) throw ValidationError("[models] threshold must lie in (0,1)");
  threshold_ = t;
}

void MultiLabelBaseline::init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  params_.init_fan_in(rng);
}

nn::Vec MultiLabelBaseline::standardise(const Features& x) const {
  if (x.size() != input_dim_) {
    throw ValidationError("[models] input dimension " + std::to_string(x.size()) +
                          " does not match baseline dimension " + std::to_string(input_dim_));
  }
  nn::Vec z(static_cast<Eigen::Index>(input_dim_));
  for (std::size_t k = 0; k < input_dim_; ++k) {
    z[static_cast<Eigen::Index>(k)] = (x[k] - shift_[k]) * scale_[k];
  }
  return z;
}

std::vector<double> MultiLabelBaseline::outputs(const Features& x) const {
  nn::Vec a = standardise(x);
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
    a = layers_[l].forward(params_, a).array().tanh();
  }
  const nn::Vec s = nn::sigmoid(layers_.back().forward(params_, a));
  return {s.data(), s.data() + s.size()};
}

LabelSet threshold_outputs(std::span<const double> outputs, double threshold) {
  LabelSet out;
  for (std::size_t k = 0; k < outputs.size(); ++k) {
    if (outputs[k] >= threshold) out.push_back({static_cast<std::uint32_t>(k)});
  }
  return out;
}

LabelSet MultiLabelBaseline::predict(const Features& x) const {
  const auto s = outputs(x);
  return threshold_outputs(s, threshold_);
}

double MultiLabelBaseline::loss(const MultiLabelExample& ex, std::span<double> grad) const {
  std::vector<nn::Vec> acts;
  acts.push_back(standardise(*ex.x));
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
    acts.push_back(layers_[l].forward(params_, acts.back()).array().tanh());
  }
  const nn::Vec z = layers_.back().forward(params_, acts.back());
  nn::Vec target = nn::Vec::Zero(z.size());
  for (const Label& l : *ex.y) target[static_cast<Eigen::Index>(l.id)] = 1.0;
  double total = 0.0;
  for (Eigen::Index k = 0; k < z.size(); ++k) {
    total += nn::softplus(z[k]) - target[k] * z[k];
  }
  if (grad.empty()) return total;

  const nn::Vec dz = nn::sigmoid(z) - target;
  nn::Vec da;
  layers_.back().backward(params_, grad, acts.back(), dz, layers_.size() > 1 ? &da : nullptr);
  for (std::size_t l = layers_.size() - 1; l-- > 0;) {
    const nn::Vec& h = acts[l + 1];
    const nn::Vec dpre = da.array() * (1.0 - h.array().square());
    layers_[l].backward(params_, grad, acts[l], dpre, l > 0 ? &da : nullptr);
  }
  return total;
}

MultiLabelBaseline train_multilabel_baseline(const Dataset& dataset, const TrainConfig& cfg,
                                             TrainReport* report) {
  if (dataset.kind() != TaskKind::labels) {
    throw ValidationError("[models] the multi-label baseline needs a label-task dataset");
  }
  if (dataset.empty()) throw ValidationError("[models] empty training set");
  std::vector<MultiLabelExample> examples;
  std::vector<const Features*> xs;
  for (const SetSample& s : dataset.samples()) {
    examples.push_back({&std::get<Features>(s.x), &std::get<LabelSet>(s.y)});
    xs.push_back(examples.back().x);
  }
  MultiLabelBaseline model(dataset.input_dim(), cfg.hidden, dataset.universe());
  model.init(cfg.seed);
  fit_standardisation(xs, model.input_shift(), model.input_scale());
  auto rep = fit(model, std::span<const MultiLabelExample>(examples), cfg, "models");
  if (report != nullptr) *report = std::move(rep);
  return model;
}

}  // namespace ssg
