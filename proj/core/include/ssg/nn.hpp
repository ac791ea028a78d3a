#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace ssg::nn {

using Vec = Eigen::VectorXd;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatView = Eigen::Map<RowMat>;
using ConstMatView = Eigen::Map<const RowMat>;
using VecView = Eigen::Map<Vec>;
using ConstVecView = Eigen::Map<const Vec>;

struct ParamBlock {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t offset = 0;
  [[nodiscard]] std::size_t size() const noexcept { return rows * cols; }
};

/// Named row-major blocks packed into one contiguous buffer. Gradients use a
/// second buffer of identical layout, viewed through the same block table.
class ParamSet {
 public:
  std::size_t add(std::string name, std::size_t rows, std::size_t cols);

  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
  [[nodiscard]] std::span<double> values() noexcept { return data_; }
  [[nodiscard]] std::span<const double> values() const noexcept { return data_; }
  [[nodiscard]] const std::vector<ParamBlock>& blocks() const noexcept { return blocks_; }
  [[nodiscard]] const ParamBlock& block(std::size_t i) const { return blocks_.at(i); }
  [[nodiscard]] std::size_t find(std::string_view name) const;

  [[nodiscard]] MatView mat(std::size_t i) { return view(std::span<double>(data_), blocks_[i]); }
  [[nodiscard]] ConstMatView mat(std::size_t i) const {
    return view(std::span<const double>(data_), blocks_[i]);
  }
  [[nodiscard]] VecView vec(std::size_t i) { return vview(std::span<double>(data_), blocks_[i]); }
  [[nodiscard]] ConstVecView vec(std::size_t i) const {
    return vview(std::span<const double>(data_), blocks_[i]);
  }

  [[nodiscard]] MatView grad_mat(std::span<double> grad, std::size_t i) const {
    return view(grad, blocks_[i]);
  }
  [[nodiscard]] VecView grad_vec(std::span<double> grad, std::size_t i) const {
    return vview(grad, blocks_[i]);
  }

  /// Weights uniform in +-sqrt(3/cols), i.e. variance 1/fan-in; blocks named "*.b" zero.
  void init_fan_in(std::mt19937_64& rng);
  void zero();

 private:
  static MatView view(std::span<double> buf, const ParamBlock& b) {
    return {buf.data() + b.offset, static_cast<Eigen::Index>(b.rows),
            static_cast<Eigen::Index>(b.cols)};
  }
  static ConstMatView view(std::span<const double> buf, const ParamBlock& b) {
    return {buf.data() + b.offset, static_cast<Eigen::Index>(b.rows),
            static_cast<Eigen::Index>(b.cols)};
  }
  static VecView vview(std::span<double> buf, const ParamBlock& b) {
    return {buf.data() + b.offset, static_cast<Eigen::Index>(b.size())};
  }
  static ConstVecView vview(std::span<const double> buf, const ParamBlock& b) {
    return {buf.data() + b.offset, static_cast<Eigen::Index>(b.size())};
  }

  std::vector<ParamBlock> blocks_;
  std::vector<double> data_;
};

/// Affine layer y = W x + b with W of shape (out, in).
struct Dense {
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t w = 0;
  std::size_t b = 0;

  static Dense create(ParamSet& ps, const std::string& name, std::size_t in, std::size_t out);
  [[nodiscard]] Vec forward(const ParamSet& ps, const Vec& x) const;
  /// Accumulates dW, db; writes dx when non-null.
  void backward(const ParamSet& ps, std::span<double> grad, const Vec& x, const Vec& dy,
                Vec* dx) const;
};

/// Cached activations of one LSTM step, needed for the backward pass.
struct LstmStep {
  Vec xh;      // [x; h_prev]
  Vec i, f, g, o;
  Vec c_prev;
  Vec c;
  Vec tanh_c;
  Vec h;
};

/// Single-layer LSTM cell. Gates are stacked (i, f, g, o) in one matrix:
///   z = W [x; h_prev] + b
///   i = sigmoid(z_i), f = sigmoid(z_f), g = tanh(z_g), o = sigmoid(z_o)
///   c = f * c_prev + i * g
///   h = o * tanh(c)
/// No peepholes. The forget-gate bias is initialised to 1.
struct Lstm {
  std::size_t input = 0;
  std::size_t hidden = 0;
  std::size_t w = 0;
  std::size_t b = 0;

  static Lstm create(ParamSet& ps, const std::string& name, std::size_t input, std::size_t hidden);
  void init_forget_bias(ParamSet& ps) const;

  [[nodiscard]] LstmStep forward(const ParamSet& ps, const Vec& x, const Vec& h_prev,
                                 const Vec& c_prev) const;
  /// Forward without caching; updates h and c in place.
  void advance(const ParamSet& ps, const Vec& x, Vec& h, Vec& c) const;
  /// dh and dc are the gradients flowing into this step's outputs. Accumulates
  /// parameter gradients and writes the gradients for x, h_prev and c_prev.
  void backward(const ParamSet& ps, std::span<double> grad, const LstmStep& step, const Vec& dh,
                const Vec& dc, Vec& dx, Vec& dh_prev, Vec& dc_prev) const;
};

[[nodiscard]] double sigmoid(double z);
[[nodiscard]] Vec sigmoid(const Vec& z);
/// log(1 + exp(z)) without overflow.
[[nodiscard]] double softplus(double z);
[[nodiscard]] double log_sum_exp(const Vec& z);
[[nodiscard]] Vec softmax(const Vec& z);

/// Probabilities are floored here before logs.
inline constexpr double kProbFloor = 1e-12;

enum class OptimizerKind { sgd, adam };

/// Plain SGD or Adam (beta1 0.9, beta2 0.999, eps 1e-8) on a flat buffer.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, std::size_t n, double learning_rate);
  void step(std::span<double> params, std::span<const double> grad);

 private:
  OptimizerKind kind_;
  double lr_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::uint64_t t_ = 0;
};

}  // namespace ssg::nn
