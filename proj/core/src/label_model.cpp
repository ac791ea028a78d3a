#include "ssg/label_model.hpp"

#include <cmath>
#include <random>

namespace ssg {

LabelModel::LabelModel(std::size_t input_dim, std::vector<std::size_t> hidden,
                       std::size_t universe)
    : input_dim_(input_dim), hidden_(std::move(hidden)), universe_(universe) {
  if (input_dim_ == 0 || universe_ == 0) {
    throw ValidationError("[models] label model needs positive input and output sizes");
  }
  std::size_t in = input_dim_;
  for (std::size_t l = 0; l < hidden_.size(); ++l) {
    layers_.push_back(nn::Dense::create(params_, "hidden" + std::to_string(l), in, hidden_[l]));
    in = hidden_[l];
  }
  layers_.push_back(nn::Dense::create(params_, "out", in, universe_));
  shift_.assign(input_dim_, 0.0);
  scale_.assign(input_dim_, 1.0);
}

void LabelModel::init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  params_.init_fan_in(rng);
}

nn::Vec LabelModel::standardise(const Features& x) const {
  if (x.size() != input_dim_) {
    throw ValidationError("[models] input dimension " + std::to_string(x.size()) +
                          " does not match model dimension " + std::to_string(input_dim_));
  }
  nn::Vec z(static_cast<Eigen::Index>(input_dim_));
  for (std::size_t k = 0; k < input_dim_; ++k) {
    z[static_cast<Eigen::Index>(k)] = (x[k] - shift_[k]) * scale_[k];
  }
  return z;
}

std::vector<double> LabelModel::logits(const Features& x) const {
  nn::Vec a = standardise(x);
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
    a = layers_[l].forward(params_, a).array().tanh();
  }
  const nn::Vec z = layers_.back().forward(params_, a);
  return {z.data(), z.data() + z.size()};
}

std::vector<double> LabelModel::posterior(const Features& x) const {
  const auto z = logits(x);
  const nn::Vec p = nn::softmax(nn::ConstVecView(z.data(), static_cast<Eigen::Index>(z.size())));
  return {p.data(), p.data() + p.size()};
}

double LabelModel::loss(const LabelExample& ex, std::span<double> grad) const {
  std::vector<nn::Vec> acts;
  acts.push_back(standardise(*ex.x));
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
    acts.push_back(layers_[l].forward(params_, acts.back()).array().tanh());
  }
  const nn::Vec z = layers_.back().forward(params_, acts.back());
  const auto y = static_cast<Eigen::Index>(ex.label);
  const double log_p = z[y] - nn::log_sum_exp(z);
  const double floor = std::log(nn::kProbFloor);
  if (grad.empty()) return -std::max(log_p, floor);
  if (log_p < floor) return -floor;

  nn::Vec dz = nn::softmax(z);
  dz[y] -= 1.0;
  nn::Vec da;
  layers_.back().backward(params_, grad, acts.back(), dz, layers_.size() > 1 ? &da : nullptr);
  for (std::size_t l = layers_.size() - 1; l-- > 0;) {
    const nn::Vec& h = acts[l + 1];
    const nn::Vec dpre = da.array() * (1.0 - h.array().square());
    layers_[l].backward(params_, grad, acts[l], dpre, l > 0 ? &da : nullptr);
  }
  return -log_p;
}

void fit_standardisation(std::span<const Features* const> xs, std::vector<double>& shift,
                         std::vector<double>& scale) {
  if (xs.empty()) return;
  const std::size_t d = xs.front()->size();
  shift.assign(d, 0.0);
  scale.assign(d, 1.0);
  const auto n = static_cast<double>(xs.size());
  for (const Features* x : xs) {
    for (std::size_t k = 0; k < d; ++k) shift[k] += (*x)[k] / n;
  }
  std::vector<double> var(d, 0.0);
  for (const Features* x : xs) {
    for (std::size_t k = 0; k < d; ++k) {
      const double c = (*x)[k] - shift[k];
      var[k] += c * c / n;
    }
  }
  for (std::size_t k = 0; k < d; ++k) {
    scale[k] = var[k] > 1e-12 ? 1.0 / std::sqrt(var[k]) : 1.0;
  }
}

std::vector<LabelExample> label_examples(const std::vector<FlatPair>& flat) {
  std::vector<LabelExample> out;
  out.reserve(flat.size());
  for (const FlatPair& p : flat) {
    const auto* x = std::get_if<Features>(&p.x);
    const auto* y = std::get_if<Label>(&p.y);
    if (x == nullptr || y == nullptr) {
      throw ValidationError("[models] label model needs feature inputs and label targets");
    }
    out.push_back({x, y->id});
  }
  return out;
}

LabelModel train_label_model(const std::vector<FlatPair>& flat, std::size_t universe,
                             const TrainConfig& cfg, TrainReport* report) {
  if (flat.empty()) throw ValidationError("[models] empty training set");
  auto examples = label_examples(flat);
  for (const LabelExample& ex : examples) {
    if (ex.label >= universe) throw ValidationError("[models] label outside universe");
  }
  LabelModel model(examples.front().x->size(), cfg.hidden, universe);
  model.init(cfg.seed);
  std::vector<const Features*> xs;
  for (const LabelExample& ex : examples) xs.push_back(ex.x);
  fit_standardisation(xs, model.input_shift(), model.input_scale());
  auto rep = fit(model, std::span<const LabelExample>(examples), cfg, "models");
  model.set_trained(true);
  if (report != nullptr) *report = std::move(rep);
  return model;
}

}  // namespace ssg
