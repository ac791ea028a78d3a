#include "ssg/nn.hpp"

#include <cmath>
#include <stdexcept>

#include "ssg/types.hpp"

namespace ssg::nn {

std::size_t ParamSet::add(std::string name, std::size_t rows, std::size_t cols) {
  blocks_.push_back({std::move(name), rows, cols, data_.size()});
  data_.resize(data_.size() + rows * cols, 0.0);
  return blocks_.size() - 1;
}

std::size_t ParamSet::find(std::string_view name) const {
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    if (blocks_[i].name == name) return i;
  }
  throw ValidationError("[models] no parameter block named '" + std::string(name) + "'");
}

void ParamSet::init_fan_in(std::mt19937_64& rng) {
  for (const ParamBlock& b : blocks_) {
    const bool bias = b.name.size() >= 2 && b.name.compare(b.name.size() - 2, 2, ".b") == 0;
    if (bias) {
      std::fill_n(data_.begin() + static_cast<std::ptrdiff_t>(b.offset), b.size(), 0.0);
      continue;
    }
    const double scale = std::sqrt(3.0 / static_cast<double>(std::max<std::size_t>(b.cols, 1)));
    std::uniform_real_distribution<double> dist(-scale, scale);
    for (std::size_t k = 0; k < b.size(); ++k) data_[b.offset + k] = dist(rng);
  }
}

void ParamSet::zero() { std::fill(data_.begin(), data_.end(), 0.0); }

Dense Dense::create(ParamSet& ps, const std::string& name, std::size_t in, std::size_t out) {
  Dense d;
  d.in = in;
  d.out = out;
  d.w = ps.add(name + ".w", out, in);
  d.b = ps.add(name + ".b", out, 1);
  return d;
}

Vec Dense::forward(const ParamSet& ps, const Vec& x) const {
  return ps.mat(w) * x + ps.vec(b);
}

void Dense::backward(const ParamSet& ps, std::span<double> grad, const Vec& x, const Vec& dy,
                     Vec* dx) const {
  ps.grad_mat(grad, w).noalias() += dy * x.transpose();
  ps.grad_vec(grad, b) += dy;
  if (dx != nullptr) *dx = ps.mat(w).transpose() * dy;
}

Lstm Lstm::create(ParamSet& ps, const std::string& name, std::size_t input, std::size_t hidden) {
  Lstm l;
  l.input = input;
  l.hidden = hidden;
  l.w = ps.add(name + ".w", 4 * hidden, input + hidden);
  l.b = ps.add(name + ".b", 4 * hidden, 1);
  return l;
}

void Lstm::init_forget_bias(ParamSet& ps) const {
  ps.vec(b).segment(static_cast<Eigen::Index>(hidden), static_cast<Eigen::Index>(hidden))
      .setOnes();
}

namespace {

void gates(const Vec& z, Eigen::Index h, Vec& i, Vec& f, Vec& g, Vec& o) {
  i = sigmoid(Vec(z.segment(0, h)));
  f = sigmoid(Vec(z.segment(h, h)));
  g = z.segment(2 * h, h).array().tanh();
  o = sigmoid(Vec(z.segment(3 * h, h)));
}

}  // namespace

LstmStep Lstm::forward(const ParamSet& ps, const Vec& x, const Vec& h_prev,
                       const Vec& c_prev) const {
  const auto hd = static_cast<Eigen::Index>(hidden);
  LstmStep s;
  s.xh.resize(static_cast<Eigen::Index>(input + hidden));
  s.xh << x, h_prev;
  const Vec z = ps.mat(w) * s.xh + ps.vec(b);
  gates(z, hd, s.i, s.f, s.g, s.o);
  s.c_prev = c_prev;
  s.c = s.f.cwiseProduct(c_prev) + s.i.cwiseProduct(s.g);
  s.tanh_c = s.c.array().tanh();
  s.h = s.o.cwiseProduct(s.tanh_c);
  return s;
}

void Lstm::advance(const ParamSet& ps, const Vec& x, Vec& h, Vec& c) const {
  const auto hd = static_cast<Eigen::Index>(hidden);
  Vec xh(static_cast<Eigen::Index>(input + hidden));
  xh << x, h;
  const Vec z = ps.mat(w) * xh + ps.vec(b);
  Vec i, f, g, o;
  gates(z, hd, i, f, g, o);
  c = f.cwiseProduct(c) + i.cwiseProduct(g);
  h = o.cwiseProduct(Vec(c.array().tanh()));
}

void Lstm::backward(const ParamSet& ps, std::span<double> grad, const LstmStep& s, const Vec& dh,
                    const Vec& dc_in, Vec& dx, Vec& dh_prev, Vec& dc_prev) const {
  const auto hd = static_cast<Eigen::Index>(hidden);
  const auto xd = static_cast<Eigen::Index>(input);
  const Vec d_o = dh.cwiseProduct(s.tanh_c);
  const Vec dc =
      dc_in + dh.cwiseProduct(s.o).cwiseProduct((1.0 - s.tanh_c.array().square()).matrix());
  Vec dz(4 * hd);
  dz.segment(0, hd) = dc.cwiseProduct(s.g).array() * s.i.array() * (1.0 - s.i.array());
  dz.segment(hd, hd) = dc.cwiseProduct(s.c_prev).array() * s.f.array() * (1.0 - s.f.array());
  dz.segment(2 * hd, hd) = dc.cwiseProduct(s.i).array() * (1.0 - s.g.array().square());
  dz.segment(3 * hd, hd) = d_o.array() * s.o.array() * (1.0 - s.o.array());
  dc_prev = dc.cwiseProduct(s.f);

  ps.grad_mat(grad, w).noalias() += dz * s.xh.transpose();
  ps.grad_vec(grad, b) += dz;
  const Vec dxh = ps.mat(w).transpose() * dz;
  dx = dxh.segment(0, xd);
  dh_prev = dxh.segment(xd, hd);
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Vec sigmoid(const Vec& z) {
  Vec out(z.size());
  for (Eigen::Index k = 0; k < z.size(); ++k) out[k] = sigmoid(z[k]);
  return out;
}

double softplus(double z) {
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

double log_sum_exp(const Vec& z) {
  const double m = z.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((z.array() - m).exp().sum());
}

Vec softmax(const Vec& z) {
  const double m = z.maxCoeff();
  Vec e = (z.array() - m).exp();
  return e / e.sum();
}

Optimizer::Optimizer(OptimizerKind kind, std::size_t n, double learning_rate)
    : kind_(kind), lr_(learning_rate) {
  if (kind_ == OptimizerKind::adam) {
    m_.assign(n, 0.0);
    v_.assign(n, 0.0);
  }
}

void Optimizer::step(std::span<double> params, std::span<const double> grad) {
  if (kind_ == OptimizerKind::sgd) {
    for (std::size_t k = 0; k < params.size(); ++k) params[k] -= lr_ * grad[k];
    return;
  }
  constexpr double beta1 = 0.9;
  constexpr double beta2 = 0.999;
  constexpr double eps = 1e-8;
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    m_[k] = beta1 * m_[k] + (1.0 - beta1) * grad[k];
    v_[k] = beta2 * v_[k] + (1.0 - beta2) * grad[k] * grad[k];
    params[k] -= lr_ * (m_[k] / bc1) / (std::sqrt(v_[k] / bc2) + eps);
  }
}

}  // namespace ssg::nn
