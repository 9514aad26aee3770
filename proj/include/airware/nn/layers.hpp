#pragma once

// Layers operate on batch matrices [N, D] whose rows are row-major flattened
// per-sample tensors: 1D activations are [T, C], 2D activations [H, W, C].

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "airware/error.hpp"
#include "airware/nn/tensor.hpp"
#include "airware/random.hpp"

namespace airware::nn {

template <typename S>
struct Param {
  std::string name;
  Mat<S> value;
  Mat<S> grad;
  double l2 = 0.0;  // weight-decay coefficient applied to this parameter

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

template <typename S>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Mat<S> forward(const Mat<S>& x, bool train, Rng* rng) = 0;
  /// Accumulates parameter gradients and returns d(loss)/d(input).
  virtual Mat<S> backward(const Mat<S>& dy) = 0;
  virtual std::vector<Param<S>*> params() { return {}; }
  virtual std::size_t in_dim() const = 0;
  virtual std::size_t out_dim() const = 0;
  virtual std::string kind() const = 0;
};

namespace detail {
inline std::size_t pooled(std::size_t n) { return (n + 1) / 2; }  // window 2, stride 2, partial last window
}  // namespace detail

/// 'same'-padded 1D convolution over time; channels-last. Weights [K*Cin, Cout].
template <typename S>
class Conv1D : public Layer<S> {
 public:
  Conv1D(std::size_t frames, std::size_t in_ch, std::size_t out_ch, std::size_t kernel)
      : T_(frames), cin_(in_ch), cout_(out_ch), k_(kernel) {
    require(frames >= 1 && in_ch >= 1 && out_ch >= 1 && kernel >= 1, ErrorCode::InvalidArgument, "bad conv1d shape");
    w_.name = "conv1d.w";
    w_.value = Mat<S>::Zero(static_cast<Eigen::Index>(k_ * cin_), static_cast<Eigen::Index>(cout_));
    b_.name = "conv1d.b";
    b_.value = Mat<S>::Zero(1, static_cast<Eigen::Index>(cout_));
  }

  Mat<S> forward(const Mat<S>& x, bool, Rng*) override {
    require(static_cast<std::size_t>(x.cols()) == in_dim(), ErrorCode::ShapeMismatch, "conv1d input width mismatch");
    n_ = static_cast<std::size_t>(x.rows());
    im2col(x);
    Mat<S> y(static_cast<Eigen::Index>(n_ * T_), static_cast<Eigen::Index>(cout_));
    y.noalias() = cols_ * w_.value;
    y.rowwise() += b_.value.row(0);
    return reshape(y, n_, T_ * cout_);
  }

  Mat<S> backward(const Mat<S>& dy) override {
    const Mat<S> g = reshape(dy, n_ * T_, cout_);
    w_.grad.noalias() += cols_.transpose() * g;
    b_.grad += g.colwise().sum();
    const Mat<S> dcols = g * w_.value.transpose();
    Mat<S> dx = Mat<S>::Zero(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(in_dim()));
    const long pad = static_cast<long>((k_ - 1) / 2);
    for (std::size_t n = 0; n < n_; ++n)
      for (std::size_t t = 0; t < T_; ++t)
        for (std::size_t k = 0; k < k_; ++k) {
          const long src = static_cast<long>(t + k) - pad;
          if (src < 0 || src >= static_cast<long>(T_)) continue;
          dx.row(static_cast<Eigen::Index>(n))
              .segment(src * static_cast<long>(cin_), static_cast<Eigen::Index>(cin_)) +=
              dcols.row(static_cast<Eigen::Index>(n * T_ + t))
                  .segment(static_cast<Eigen::Index>(k * cin_), static_cast<Eigen::Index>(cin_));
        }
    return dx;
  }

  std::vector<Param<S>*> params() override { return {&w_, &b_}; }
  std::size_t in_dim() const override { return T_ * cin_; }
  std::size_t out_dim() const override { return T_ * cout_; }
  std::string kind() const override { return "conv1d"; }
  Param<S>& weight() { return w_; }
  Param<S>& bias() { return b_; }

 private:
  static Mat<S> reshape(const Mat<S>& m, std::size_t rows, std::size_t cols) {
    return Eigen::Map<const Mat<S>>(m.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  }

  void im2col(const Mat<S>& x) {
    cols_.setZero(static_cast<Eigen::Index>(n_ * T_), static_cast<Eigen::Index>(k_ * cin_));
    const long pad = static_cast<long>((k_ - 1) / 2);
    for (std::size_t n = 0; n < n_; ++n)
      for (std::size_t t = 0; t < T_; ++t)
        for (std::size_t k = 0; k < k_; ++k) {
          const long src = static_cast<long>(t + k) - pad;
          if (src < 0 || src >= static_cast<long>(T_)) continue;
          cols_.row(static_cast<Eigen::Index>(n * T_ + t))
              .segment(static_cast<Eigen::Index>(k * cin_), static_cast<Eigen::Index>(cin_)) =
              x.row(static_cast<Eigen::Index>(n)).segment(src * static_cast<long>(cin_), static_cast<Eigen::Index>(cin_));
        }
  }

  std::size_t T_, cin_, cout_, k_;
  std::size_t n_ = 0;
  Param<S> w_, b_;
  Mat<S> cols_;
};

/// 'same'-padded square-kernel 2D convolution; input [H, W, Cin]. Weights [K*K*Cin, Cout].
template <typename S>
class Conv2D : public Layer<S> {
 public:
  Conv2D(std::size_t height, std::size_t width, std::size_t in_ch, std::size_t out_ch, std::size_t kernel)
      : H_(height), W_(width), cin_(in_ch), cout_(out_ch), k_(kernel) {
    require(height >= 1 && width >= 1 && in_ch >= 1 && out_ch >= 1 && kernel >= 1, ErrorCode::InvalidArgument,
            "bad conv2d shape");
    w_.name = "conv2d.w";
    w_.value = Mat<S>::Zero(static_cast<Eigen::Index>(k_ * k_ * cin_), static_cast<Eigen::Index>(cout_));
    b_.name = "conv2d.b";
    b_.value = Mat<S>::Zero(1, static_cast<Eigen::Index>(cout_));
  }

  Mat<S> forward(const Mat<S>& x, bool, Rng*) override {
    require(static_cast<std::size_t>(x.cols()) == in_dim(), ErrorCode::ShapeMismatch, "conv2d input width mismatch");
    n_ = static_cast<std::size_t>(x.rows());
    cols_.setZero(static_cast<Eigen::Index>(n_ * H_ * W_), static_cast<Eigen::Index>(k_ * k_ * cin_));
    visit([&](Eigen::Index row, Eigen::Index col, std::size_t n, Eigen::Index src) {
      cols_.row(row).segment(col, static_cast<Eigen::Index>(cin_)) =
          x.row(static_cast<Eigen::Index>(n)).segment(src, static_cast<Eigen::Index>(cin_));
    });
    Mat<S> y(static_cast<Eigen::Index>(n_ * H_ * W_), static_cast<Eigen::Index>(cout_));
    y.noalias() = cols_ * w_.value;
    y.rowwise() += b_.value.row(0);
    return Eigen::Map<const Mat<S>>(y.data(), static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(out_dim()));
  }

  Mat<S> backward(const Mat<S>& dy) override {
    const Mat<S> g = Eigen::Map<const Mat<S>>(dy.data(), static_cast<Eigen::Index>(n_ * H_ * W_),
                                              static_cast<Eigen::Index>(cout_));
    w_.grad.noalias() += cols_.transpose() * g;
    b_.grad += g.colwise().sum();
    const Mat<S> dcols = g * w_.value.transpose();
    Mat<S> dx = Mat<S>::Zero(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(in_dim()));
    visit([&](Eigen::Index row, Eigen::Index col, std::size_t n, Eigen::Index src) {
      dx.row(static_cast<Eigen::Index>(n)).segment(src, static_cast<Eigen::Index>(cin_)) +=
          dcols.row(row).segment(col, static_cast<Eigen::Index>(cin_));
    });
    return dx;
  }

  std::vector<Param<S>*> params() override { return {&w_, &b_}; }
  std::size_t in_dim() const override { return H_ * W_ * cin_; }
  std::size_t out_dim() const override { return H_ * W_ * cout_; }
  std::string kind() const override { return "conv2d"; }

 private:
  // Calls fn(col_row, col_offset, sample, input_offset) for every valid tap.
  template <typename Fn>
  void visit(Fn&& fn) const {
    const long pad = static_cast<long>((k_ - 1) / 2);
    const long H = static_cast<long>(H_), W = static_cast<long>(W_);
    for (std::size_t n = 0; n < n_; ++n)
      for (long h = 0; h < H; ++h)
        for (long w = 0; w < W; ++w) {
          const auto row = static_cast<Eigen::Index>((static_cast<long>(n) * H + h) * W + w);
          for (long kh = 0; kh < static_cast<long>(k_); ++kh) {
            const long sh = h + kh - pad;
            if (sh < 0 || sh >= H) continue;
            for (long kw = 0; kw < static_cast<long>(k_); ++kw) {
              const long sw = w + kw - pad;
              if (sw < 0 || sw >= W) continue;
              fn(row, static_cast<Eigen::Index>((kh * static_cast<long>(k_) + kw) * static_cast<long>(cin_)), n,
                 static_cast<Eigen::Index>((sh * W + sw) * static_cast<long>(cin_)));
            }
          }
        }
  }

  std::size_t H_, W_, cin_, cout_, k_;
  std::size_t n_ = 0;
  Param<S> w_, b_;
  Mat<S> cols_;
};

/// Max over non-overlapping windows of 2 along time; a trailing odd frame
/// forms its own window.
template <typename S>
class MaxPool1D : public Layer<S> {
 public:
  MaxPool1D(std::size_t frames, std::size_t channels) : T_(frames), C_(channels) {}

  Mat<S> forward(const Mat<S>& x, bool, Rng*) override {
    require(static_cast<std::size_t>(x.cols()) == in_dim(), ErrorCode::ShapeMismatch, "maxpool1d input width mismatch");
    const std::size_t To = detail::pooled(T_);
    Mat<S> y(x.rows(), static_cast<Eigen::Index>(To * C_));
    arg_.resize(static_cast<std::size_t>(x.rows()) * To * C_);
    n_ = static_cast<std::size_t>(x.rows());
    for (std::size_t n = 0; n < n_; ++n)
      for (std::size_t t = 0; t < To; ++t)
        for (std::size_t c = 0; c < C_; ++c) {
          std::size_t best = (2 * t) * C_ + c;
          if (2 * t + 1 < T_) {
            const std::size_t other = (2 * t + 1) * C_ + c;
            if (x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(other)) >
                x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(best)))
              best = other;
          }
          const std::size_t o = t * C_ + c;
          arg_[n * To * C_ + o] = best;
          y(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(o)) =
              x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(best));
        }
    return y;
  }

  Mat<S> backward(const Mat<S>& dy) override {
    Mat<S> dx = Mat<S>::Zero(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(in_dim()));
    const std::size_t out = out_dim();
    for (std::size_t n = 0; n < n_; ++n)
      for (std::size_t o = 0; o < out; ++o)
        dx(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(arg_[n * out + o])) +=
            dy(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(o));
    return dx;
  }

  std::size_t in_dim() const override { return T_ * C_; }
  std::size_t out_dim() const override { return detail::pooled(T_) * C_; }
  std::string kind() const override { return "maxpool1d"; }

 private:
  std::size_t T_, C_;
  std::size_t n_ = 0;
  std::vector<std::size_t> arg_;
};

/// 2x2 max pooling with stride 2 on [H, W, C].
template <typename S>
class MaxPool2D : public Layer<S> {
 public:
  MaxPool2D(std::size_t height, std::size_t width, std::size_t channels) : H_(height), W_(width), C_(channels) {}

  Mat<S> forward(const Mat<S>& x, bool, Rng*) override {
    require(static_cast<std::size_t>(x.cols()) == in_dim(), ErrorCode::ShapeMismatch, "maxpool2d input width mismatch");
    const std::size_t Ho = detail::pooled(H_), Wo = detail::pooled(W_);
    n_ = static_cast<std::size_t>(x.rows());
    const std::size_t out = Ho * Wo * C_;
    Mat<S> y(x.rows(), static_cast<Eigen::Index>(out));
    arg_.resize(n_ * out);
    for (std::size_t n = 0; n < n_; ++n) {
      const auto row = x.row(static_cast<Eigen::Index>(n));
      for (std::size_t h = 0; h < Ho; ++h)
        for (std::size_t w = 0; w < Wo; ++w)
          for (std::size_t c = 0; c < C_; ++c) {
            std::size_t best = ((2 * h) * W_ + 2 * w) * C_ + c;
            for (std::size_t dh = 0; dh < 2; ++dh)
              for (std::size_t dw = 0; dw < 2; ++dw) {
                if (2 * h + dh >= H_ || 2 * w + dw >= W_) continue;
                const std::size_t idx = ((2 * h + dh) * W_ + 2 * w + dw) * C_ + c;
                if (row(static_cast<Eigen::Index>(idx)) > row(static_cast<Eigen::Index>(best))) best = idx;
              }
            const std::size_t o = (h * Wo + w) * C_ + c;
            arg_[n * out + o] = best;
            y(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(o)) = row(static_cast<Eigen::Index>(best));
          }
    }
    return y;
  }

  Mat<S> backward(const Mat<S>& dy) override {
    Mat<S> dx = Mat<S>::Zero(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(in_dim()));
    const std::size_t out = out_dim();
    for (std::size_t n = 0; n < n_; ++n)
      for (std::size_t o = 0; o < out; ++o)
        dx(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(arg_[n * out + o])) +=
            dy(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(o));
    return dx;
  }

  std::size_t in_dim() const override { return H_ * W_ * C_; }
  std::size_t out_dim() const override { return detail::pooled(H_) * detail::pooled(W_) * C_; }
  std::string kind() const override { return "maxpool2d"; }

 private:
  std::size_t H_, W_, C_;
  std::size_t n_ = 0;
  std::vector<std::size_t> arg_;
};

template <typename S>
class Dense : public Layer<S> {
 public:
  Dense(std::size_t in, std::size_t out) : in_(in), out_(out) {
    require(in >= 1 && out >= 1, ErrorCode::InvalidArgument, "bad dense shape");
    w_.name = "dense.w";
    w_.value = Mat<S>::Zero(static_cast<Eigen::Index>(in), static_cast<Eigen::Index>(out));
    b_.name = "dense.b";
    b_.value = Mat<S>::Zero(1, static_cast<Eigen::Index>(out));
  }

  Mat<S> forward(const Mat<S>& x, bool, Rng*) override {
    require(static_cast<std::size_t>(x.cols()) == in_, ErrorCode::ShapeMismatch, "dense input width mismatch");
    x_ = x;
    Mat<S> y(x.rows(), static_cast<Eigen::Index>(out_));
    y.noalias() = x * w_.value;
    y.rowwise() += b_.value.row(0);
    return y;
  }

  Mat<S> backward(const Mat<S>& dy) override {
    w_.grad.noalias() += x_.transpose() * dy;
    b_.grad += dy.colwise().sum();
    return dy * w_.value.transpose();
  }

  std::vector<Param<S>*> params() override { return {&w_, &b_}; }
  std::size_t in_dim() const override { return in_; }
  std::size_t out_dim() const override { return out_; }
  std::string kind() const override { return "dense"; }

 private:
  std::size_t in_, out_;
  Param<S> w_, b_;
  Mat<S> x_;
};

template <typename S>
class ReLU : public Layer<S> {
 public:
  explicit ReLU(std::size_t dim) : dim_(dim) {}
  Mat<S> forward(const Mat<S>& x, bool, Rng*) override {
    mask_ = (x.array() > S(0)).template cast<S>();
    return x.cwiseMax(S(0));
  }
  Mat<S> backward(const Mat<S>& dy) override { return dy.cwiseProduct(mask_); }
  std::size_t in_dim() const override { return dim_; }
  std::size_t out_dim() const override { return dim_; }
  std::string kind() const override { return "relu"; }

 private:
  std::size_t dim_;
  Mat<S> mask_;
};

template <typename S>
class Tanh : public Layer<S> {
 public:
  explicit Tanh(std::size_t dim) : dim_(dim) {}
  Mat<S> forward(const Mat<S>& x, bool, Rng*) override {
    y_ = x.array().tanh().matrix();
    return y_;
  }
  Mat<S> backward(const Mat<S>& dy) override { return (dy.array() * (S(1) - y_.array().square())).matrix(); }
  std::size_t in_dim() const override { return dim_; }
  std::size_t out_dim() const override { return dim_; }
  std::string kind() const override { return "tanh"; }

 private:
  std::size_t dim_;
  Mat<S> y_;
};

/// Inverted dropout: surviving units are scaled by 1/(1-p) during training;
/// evaluation is the identity.
template <typename S>
class Dropout : public Layer<S> {
 public:
  Dropout(std::size_t dim, double p) : dim_(dim), p_(p) {
    require(p >= 0.0 && p < 1.0, ErrorCode::InvalidArgument, "dropout probability must lie in [0, 1)");
  }
  Mat<S> forward(const Mat<S>& x, bool train, Rng* rng) override {
    active_ = train && p_ > 0.0;
    if (!active_) return x;
    require(rng != nullptr, ErrorCode::InvalidArgument, "dropout in training mode needs an rng");
    const S keep = static_cast<S>(1.0 / (1.0 - p_));
    mask_.resize(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < mask_.size(); ++i) mask_.data()[i] = rng->uniform() < p_ ? S(0) : keep;
    return x.cwiseProduct(mask_);
  }
  Mat<S> backward(const Mat<S>& dy) override { return active_ ? Mat<S>(dy.cwiseProduct(mask_)) : dy; }
  std::size_t in_dim() const override { return dim_; }
  std::size_t out_dim() const override { return dim_; }
  std::string kind() const override { return "dropout"; }
  const Mat<S>& mask() const { return mask_; }

 private:
  std::size_t dim_;
  double p_;
  bool active_ = false;
  Mat<S> mask_;
};

/// Layers applied in order. An empty sequence is the identity.
template <typename S>
class Sequential {
 public:
  explicit Sequential(std::size_t in_dim = 0) : in_(in_dim) {}

  template <typename L, typename... Args>
  L& add(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    require(layer->in_dim() == out_dim(), ErrorCode::ShapeMismatch,
            "layer " + layer->kind() + " expects width " + std::to_string(layer->in_dim()) + ", got " +
                std::to_string(out_dim()));
    L& ref = *layer;
    layers_.push_back(std::move(layer));
    return ref;
  }

  Mat<S> forward(Mat<S> x, bool train, Rng* rng) {
    for (auto& l : layers_) x = l->forward(x, train, rng);
    return x;
  }
  Mat<S> backward(Mat<S> dy) {
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) dy = (*it)->backward(dy);
    return dy;
  }
  std::vector<Param<S>*> params() {
    std::vector<Param<S>*> out;
    for (auto& l : layers_)
      for (auto* p : l->params()) out.push_back(p);
    return out;
  }
  std::size_t in_dim() const { return in_; }
  std::size_t out_dim() const { return layers_.empty() ? in_ : layers_.back()->out_dim(); }
  std::size_t size() const { return layers_.size(); }
  Layer<S>& layer(std::size_t i) { return *layers_.at(i); }

 private:
  std::size_t in_;
  std::vector<std::unique_ptr<Layer<S>>> layers_;
};

/// Row-wise softmax with max subtraction.
template <typename S>
Mat<S> softmax(const Mat<S>& logits) {
  Mat<S> p = logits;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const S m = p.row(i).maxCoeff();
    p.row(i) = (p.row(i).array() - m).exp().matrix();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

/// Mean cross-entropy of softmax(logits); writes d(loss)/d(logits).
template <typename S>
double softmax_cross_entropy(const Mat<S>& logits, const std::vector<int>& labels, Mat<S>* dlogits = nullptr) {
  require(static_cast<std::size_t>(logits.rows()) == labels.size() && !labels.empty(), ErrorCode::ShapeMismatch,
          "label count does not match batch size");
  const auto N = static_cast<double>(labels.size());
  double loss = 0.0;
  Mat<S> p = softmax(logits);
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    require(y >= 0 && y < p.cols(), ErrorCode::InvalidArgument, "label outside class range");
    // log-softmax computed directly for accuracy near one-hot outputs
    const S m = logits.row(i).maxCoeff();
    const double lse = static_cast<double>(m) + std::log(static_cast<double>((logits.row(i).array() - m).exp().sum()));
    loss += lse - static_cast<double>(logits(i, y));
  }
  if (dlogits) {
    *dlogits = p;
    for (Eigen::Index i = 0; i < p.rows(); ++i) (*dlogits)(i, labels[static_cast<std::size_t>(i)]) -= S(1);
    *dlogits /= static_cast<S>(N);
  }
  return loss / N;
}

}  // namespace airware::nn
