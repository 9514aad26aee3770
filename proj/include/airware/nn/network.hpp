#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "airware/error.hpp"
#include "airware/nn/layers.hpp"
#include "airware/nn/tensor.hpp"
#include "airware/random.hpp"

namespace airware::nn {

struct HyperParams {
  double l2 = 0.001;
  int lr_exponent = -2;  // learning rate 10^x
  std::size_t n_filters = 16;
  std::size_t kernel_size = 3;
  double dropout = 0.2;
  std::size_t hidden_units = 64;
  Initializer initializer = Initializer::HeNormal;

  double learning_rate() const { return std::pow(10.0, lr_exponent); }
  bool operator==(const HyperParams&) const = default;
};

inline constexpr std::array<std::size_t, 4> kFilterChoices = {8, 16, 32, 64};
inline constexpr std::array<std::size_t, 3> kKernelChoices = {2, 3, 5};
inline constexpr std::array<std::size_t, 5> kHiddenChoices = {32, 64, 128, 256, 512};

inline void validate_hparams(const HyperParams& h) {
  auto in = [](auto v, const auto& set) { return std::find(set.begin(), set.end(), v) != set.end(); };
  require(h.l2 >= 0.0, ErrorCode::InvalidArgument, "l2 must be non-negative");
  require(h.lr_exponent >= -6 && h.lr_exponent <= 0, ErrorCode::InvalidArgument, "lr_exponent must lie in [-6, 0]");
  require(in(h.n_filters, kFilterChoices), ErrorCode::InvalidArgument, "n_filters must be one of 8, 16, 32, 64");
  require(in(h.kernel_size, kKernelChoices), ErrorCode::InvalidArgument, "kernel_size must be one of 2, 3, 5");
  require(h.dropout >= 0.0 && h.dropout <= 0.99, ErrorCode::InvalidArgument, "dropout must lie in [0, 0.99]");
  require(in(h.hidden_units, kHiddenChoices), ErrorCode::InvalidArgument,
          "hidden_units must be one of 32, 64, 128, 256, 512");
}

enum class ModelId { M1, M2, M3, M4, Mlp };

inline constexpr std::string_view kModelNames[] = {"m1", "m2", "m3", "m4", "mlp"};
constexpr std::string_view to_string(ModelId m) { return kModelNames[static_cast<int>(m)]; }
inline std::optional<ModelId> parse_model_id(std::string_view s) {
  for (int i = 0; i < 5; ++i)
    if (kModelNames[i] == s) return static_cast<ModelId>(i);
  return std::nullopt;
}

struct Architecture {
  bool conv2d = false;
  int spectro_convs = 2;
  int dense_layers = 2;  // hidden dense layers before the softmax output
};

inline Architecture architecture(ModelId m) {
  switch (m) {
    case ModelId::M1: return {false, 2, 2};
    case ModelId::M2: return {false, 2, 4};
    case ModelId::M3: return {false, 3, 4};
    case ModelId::M4: return {true, 2, 2};
    case ModelId::Mlp: return {false, 0, 2};
  }
  return {};
}

inline constexpr std::size_t kIrFilters = 2;
inline constexpr std::size_t kIrKernel = 2;
inline constexpr std::size_t kIrChannels = 2;

/// Declarative network description. For the conv models the two inputs are
/// the Doppler band [frames x bins] and the IR channels [frames x 2]; the MLP
/// takes one flat vector of `bins` features (frames = 1).
struct NetworkSpec {
  ModelId model = ModelId::M1;
  std::size_t frames = 57;
  std::size_t bins = 32;
  std::size_t n_classes = 21;
  bool use_doppler = true;
  bool use_ir = true;
  HyperParams hp;
  // MLP head
  std::vector<std::size_t> mlp_hidden = {500, 250};
  double mlp_l2 = 0.01;

  bool operator==(const NetworkSpec&) const = default;
};

inline void validate_spec(const NetworkSpec& s) {
  require(s.n_classes >= 2, ErrorCode::InvalidArgument, "need at least 2 classes");
  require(s.frames >= 1 && s.bins >= 1, ErrorCode::InvalidArgument, "input dims must be positive");
  if (s.model == ModelId::Mlp) {
    require(!s.mlp_hidden.empty(), ErrorCode::InvalidArgument, "mlp needs at least one hidden layer");
    return;
  }
  require(s.use_doppler || s.use_ir, ErrorCode::InvalidArgument, "at least one input branch must be enabled");
  validate_hparams(s.hp);
}

template <typename S>
class Network {
 public:
  explicit Network(NetworkSpec spec) : spec_(std::move(spec)) {}
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  const NetworkSpec& spec() const { return spec_; }

  std::size_t doppler_dim() const { return spec_.model == ModelId::Mlp ? spec_.bins : spec_.frames * spec_.bins; }
  std::size_t ir_dim() const { return spec_.frames * kIrChannels; }

  /// Logits for a batch. `xd` is ignored when the Doppler branch is off and
  /// `xi` when the IR branch is off (either may then be empty).
  Mat<S> logits(const Mat<S>& xd, const Mat<S>& xi, bool train, Rng* rng) {
    const bool d = spec_.use_doppler || spec_.model == ModelId::Mlp;
    const bool i = spec_.use_ir && spec_.model != ModelId::Mlp;
    Eigen::Index n = d ? xd.rows() : xi.rows();
    require(n > 0, ErrorCode::ShapeMismatch, "empty batch");
    if (d) require(static_cast<std::size_t>(xd.cols()) == doppler_dim(), ErrorCode::ShapeMismatch,
                   "doppler input width " + std::to_string(xd.cols()) + ", expected " + std::to_string(doppler_dim()));
    if (i) require(static_cast<std::size_t>(xi.cols()) == ir_dim() && xi.rows() == n, ErrorCode::ShapeMismatch,
                   "ir input shape mismatch");
    Mat<S> a, b;
    if (d) a = spectro_.forward(xd, train, rng);
    if (i) b = ir_.forward(xi, train, rng);
    split_ = static_cast<Eigen::Index>(d ? spectro_.out_dim() : 0);
    Mat<S> joined(n, static_cast<Eigen::Index>((d ? spectro_.out_dim() : 0) + (i ? ir_.out_dim() : 0)));
    if (d) joined.leftCols(a.cols()) = a;
    if (i) joined.rightCols(b.cols()) = b;
    return head_.forward(std::move(joined), train, rng);
  }

  Mat<S> probabilities(const Mat<S>& xd, const Mat<S>& xi) { return softmax(logits(xd, xi, false, nullptr)); }

  void backward(const Mat<S>& dlogits) {
    Mat<S> g = head_.backward(dlogits);
    const bool d = spec_.use_doppler || spec_.model == ModelId::Mlp;
    const bool i = spec_.use_ir && spec_.model != ModelId::Mlp;
    if (d) spectro_.backward(g.leftCols(split_));
    if (i) ir_.backward(g.rightCols(g.cols() - split_));
  }

  /// Stable order: Doppler branch, IR branch, head.
  std::vector<Param<S>*> params() {
    std::vector<Param<S>*> out = spectro_.params();
    for (auto* p : ir_.params()) out.push_back(p);
    for (auto* p : head_.params()) out.push_back(p);
    return out;
  }

  void zero_grad() {
    for (auto* p : params()) p->zero_grad();
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    for (auto* p : params()) n += static_cast<std::size_t>(p->value.size());
    return n;
  }

  Sequential<S>& spectro() { return spectro_; }
  Sequential<S>& ir() { return ir_; }
  Sequential<S>& head() { return head_; }

 private:
  template <typename T>
  friend Network<T> build_network(const NetworkSpec&, Rng&);

  NetworkSpec spec_;
  Sequential<S> spectro_, ir_, head_;
  Eigen::Index split_ = 0;
};

namespace detail {

template <typename S>
void init_param(Param<S>& p, Initializer init, std::vector<std::size_t> shape, Rng& rng) {
  const auto t = init_weights<S>(init, shape, rng);
  require(t.size() == static_cast<std::size_t>(p.value.size()), ErrorCode::ShapeMismatch, "initializer shape mismatch");
  std::copy(t.data.begin(), t.data.end(), p.value.data());
}

}  // namespace detail

/// Builds the layers for `spec` and initializes weights (biases start at 0).
template <typename S>
Network<S> build_network(const NetworkSpec& spec, Rng& rng) {
  validate_spec(spec);
  Network<S> net(spec);
  const auto& hp = spec.hp;

  if (spec.model == ModelId::Mlp) {
    net.spectro_ = Sequential<S>(spec.bins);
    std::size_t width = spec.bins;
    net.head_ = Sequential<S>(width);
    for (auto h : spec.mlp_hidden) {
      auto& d = net.head_.template add<Dense<S>>(width, h);
      d.params()[0]->l2 = spec.mlp_l2;
      detail::init_param(*d.params()[0], Initializer::GlorotUniform, {width, h}, rng);
      net.head_.template add<Tanh<S>>(h);
      width = h;
    }
    auto& out = net.head_.template add<Dense<S>>(width, spec.n_classes);
    out.params()[0]->l2 = spec.mlp_l2;
    detail::init_param(*out.params()[0], Initializer::GlorotUniform, {width, spec.n_classes}, rng);
    return net;
  }

  const Architecture arch = architecture(spec.model);
  std::size_t joined = 0;
  if (spec.use_doppler) {
    auto& seq = net.spectro_ = Sequential<S>(spec.frames * spec.bins);
    if (arch.conv2d) {
      std::size_t H = spec.frames, W = spec.bins, C = 1;
      for (int l = 0; l < arch.spectro_convs; ++l) {
        auto& conv = seq.template add<Conv2D<S>>(H, W, C, hp.n_filters, hp.kernel_size);
        conv.params()[0]->l2 = hp.l2;
        detail::init_param(*conv.params()[0], hp.initializer, {hp.kernel_size, hp.kernel_size, C, hp.n_filters}, rng);
        C = hp.n_filters;
        seq.template add<ReLU<S>>(H * W * C);
        seq.template add<MaxPool2D<S>>(H, W, C);
        H = detail::pooled(H);
        W = detail::pooled(W);
      }
    } else {
      std::size_t T = spec.frames, C = spec.bins;
      for (int l = 0; l < arch.spectro_convs; ++l) {
        auto& conv = seq.template add<Conv1D<S>>(T, C, hp.n_filters, hp.kernel_size);
        conv.params()[0]->l2 = hp.l2;
        detail::init_param(*conv.params()[0], hp.initializer, {hp.kernel_size, C, hp.n_filters}, rng);
        C = hp.n_filters;
        seq.template add<ReLU<S>>(T * C);
        seq.template add<MaxPool1D<S>>(T, C);
        T = detail::pooled(T);
      }
    }
    joined += seq.out_dim();
  }
  if (spec.use_ir) {
    auto& seq = net.ir_ = Sequential<S>(spec.frames * kIrChannels);
    auto& conv = seq.template add<Conv1D<S>>(spec.frames, kIrChannels, kIrFilters, kIrKernel);
    conv.params()[0]->l2 = hp.l2;
    detail::init_param(*conv.params()[0], hp.initializer, {kIrKernel, kIrChannels, kIrFilters}, rng);
    seq.template add<ReLU<S>>(spec.frames * kIrFilters);
    seq.template add<MaxPool1D<S>>(spec.frames, kIrFilters);
    joined += seq.out_dim();
  }

  net.head_ = Sequential<S>(joined);
  std::size_t width = joined;
  for (int l = 0; l < arch.dense_layers; ++l) {
    auto& d = net.head_.template add<Dense<S>>(width, hp.hidden_units);
    detail::init_param(*d.params()[0], hp.initializer, {width, hp.hidden_units}, rng);
    width = hp.hidden_units;
    net.head_.template add<ReLU<S>>(width);
    if (hp.dropout > 0.0) net.head_.template add<Dropout<S>>(width, hp.dropout);
  }
  auto& out = net.head_.template add<Dense<S>>(width, spec.n_classes);
  detail::init_param(*out.params()[0], hp.initializer, {width, spec.n_classes}, rng);
  return net;
}

/// Closed-form parameter count, independent of the layer objects.
inline std::size_t parameter_count(const NetworkSpec& spec) {
  if (spec.model == ModelId::Mlp) {
    std::size_t n = 0, width = spec.bins;
    for (auto h : spec.mlp_hidden) {
      n += width * h + h;
      width = h;
    }
    return n + width * spec.n_classes + spec.n_classes;
  }
  const Architecture arch = architecture(spec.model);
  const auto& hp = spec.hp;
  std::size_t n = 0, joined = 0;
  if (spec.use_doppler) {
    std::size_t H = spec.frames, W = spec.bins, C = arch.conv2d ? 1 : spec.bins;
    for (int l = 0; l < arch.spectro_convs; ++l) {
      const std::size_t taps = arch.conv2d ? hp.kernel_size * hp.kernel_size : hp.kernel_size;
      n += taps * C * hp.n_filters + hp.n_filters;
      C = hp.n_filters;
      H = detail::pooled(H);
      if (arch.conv2d) W = detail::pooled(W);
    }
    joined += arch.conv2d ? H * W * C : H * C;
  }
  if (spec.use_ir) {
    n += kIrKernel * kIrChannels * kIrFilters + kIrFilters;
    joined += detail::pooled(spec.frames) * kIrFilters;
  }
  std::size_t width = joined;
  for (int l = 0; l < arch.dense_layers; ++l) {
    n += width * hp.hidden_units + hp.hidden_units;
    width = hp.hidden_units;
  }
  return n + width * spec.n_classes + spec.n_classes;
}

/// Data loss plus sum of l2 * ||W||^2 over decayed parameters. Gradients of
/// both terms are written into the parameters' grad fields.
template <typename S>
double loss_and_grads(Network<S>& net, const Mat<S>& xd, const Mat<S>& xi, const std::vector<int>& labels,
                      bool train = false, Rng* rng = nullptr) {
  net.zero_grad();
  Mat<S> dlogits;
  const Mat<S> z = net.logits(xd, xi, train, rng);
  require(static_cast<std::size_t>(z.cols()) == net.spec().n_classes, ErrorCode::ShapeMismatch, "logit width");
  double loss = softmax_cross_entropy(z, labels, &dlogits);
  net.backward(dlogits);
  for (auto* p : net.params()) {
    if (p->l2 <= 0.0) continue;
    loss += p->l2 * static_cast<double>(p->value.squaredNorm());
    p->grad += static_cast<S>(2.0 * p->l2) * p->value;
  }
  return loss;
}

}  // namespace airware::nn
