#pragma once

#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "airware/dataset.hpp"
#include "airware/error.hpp"
#include "airware/nn/network.hpp"
#include "airware/random.hpp"

namespace airware::nn {

/// Largest frame offset augment_shift may draw.
inline long max_shift_frames(std::size_t frames, double max_frac) {
  return static_cast<long>(std::floor(max_frac * static_cast<double>(frames) + 1e-9));
}

/// Moves row t to row t + offset; vacated rows become zero.
template <typename M>
M roll_rows(const M& m, long offset) {
  M out = M::Zero(m.rows(), m.cols());
  const long rows = static_cast<long>(m.rows());
  for (long t = 0; t < rows; ++t) {
    const long dst = t + offset;
    if (dst >= 0 && dst < rows) out.row(dst) = m.row(t);
  }
  return out;
}

/// Temporal shift augmentation; the Doppler and IR matrices get independent
/// offsets drawn uniformly from [-floor(max_frac F), floor(max_frac F)].
inline FeatureTensor augment_shift(const FeatureTensor& ft, double max_frac, Rng& rng, long* doppler_offset = nullptr,
                                   long* ir_offset = nullptr) {
  require(max_frac >= 0.0 && max_frac < 1.0, ErrorCode::InvalidArgument, "max_frac must lie in [0, 1)");
  const long lim = max_shift_frames(ft.frames(), max_frac);
  const long od = lim > 0 ? rng.uniform_int(-lim, lim) : 0;
  const long oi = lim > 0 ? rng.uniform_int(-lim, lim) : 0;
  if (doppler_offset) *doppler_offset = od;
  if (ir_offset) *ir_offset = oi;
  return {roll_rows(ft.doppler, od), roll_rows(ft.ir, oi)};
}

/// Flattened model inputs. Row i of `doppler` is sample i's band matrix in
/// row-major order (frames x bins); row i of `ir` likewise (frames x 2).
struct TrainSet {
  Matrix doppler;
  Matrix ir;
  std::vector<int> labels;
  std::size_t frames = 0;

  std::size_t size() const { return labels.size(); }
};

inline TrainSet make_train_set(const std::vector<const FeatureTensor*>& feats, const std::vector<int>& labels) {
  require(feats.size() == labels.size(), ErrorCode::ShapeMismatch, "feature/label count mismatch");
  TrainSet ts;
  ts.labels = labels;
  if (feats.empty()) return ts;
  const auto F = feats.front()->doppler.rows();
  const auto B = feats.front()->doppler.cols();
  ts.frames = static_cast<std::size_t>(F);
  ts.doppler.resize(static_cast<Eigen::Index>(feats.size()), F * B);
  ts.ir.resize(static_cast<Eigen::Index>(feats.size()), F * 2);
  for (std::size_t i = 0; i < feats.size(); ++i) {
    const auto& f = *feats[i];
    require(f.doppler.rows() == F && f.doppler.cols() == B && f.ir.rows() == F && f.ir.cols() == 2,
            ErrorCode::ShapeMismatch, "feature dims differ between samples");
    ts.doppler.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::RowVectorXd>(f.doppler.data(), F * B);
    ts.ir.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::RowVectorXd>(f.ir.data(), F * 2);
  }
  return ts;
}

struct TrainConfig {
  int max_epochs = 100;
  std::size_t batch_size = 32;
  int patience = 15;
  double val_frac = 0.1;   // 0 disables the validation slice and early stopping
  double shift_frac = 0.1;  // temporal augmentation; 0 disables
  std::optional<double> learning_rate;  // overrides 10^lr_exponent
};

struct TrainedModel {
  NetworkSpec spec;
  std::vector<Mat<float>> params;  // in Network::params() order
  int epochs_run = 0;
  int best_epoch = 0;
  double best_val_loss = std::numeric_limits<double>::quiet_NaN();
  double final_train_loss = std::numeric_limits<double>::quiet_NaN();
};

template <typename S>
void load_params(Network<S>& net, const std::vector<Mat<float>>& values) {
  auto ps = net.params();
  require(ps.size() == values.size(), ErrorCode::ShapeMismatch, "parameter count mismatch");
  for (std::size_t i = 0; i < ps.size(); ++i) {
    require(ps[i]->value.rows() == values[i].rows() && ps[i]->value.cols() == values[i].cols(),
            ErrorCode::ShapeMismatch, "parameter shape mismatch for " + ps[i]->name);
    ps[i]->value = values[i].template cast<S>();
  }
}

template <typename S>
std::vector<Mat<float>> snapshot(Network<S>& net) {
  std::vector<Mat<float>> out;
  for (auto* p : net.params()) out.push_back(p->value.template cast<float>());
  return out;
}

namespace detail {

inline void gather(const TrainSet& ts, const std::vector<std::size_t>& idx, std::size_t from, std::size_t to,
                   Mat<float>& xd, Mat<float>& xi, std::vector<int>& y, double shift_frac, Rng* rng) {
  const auto n = static_cast<Eigen::Index>(to - from);
  xd.resize(n, ts.doppler.cols());
  xi.resize(n, ts.ir.cols());
  y.resize(static_cast<std::size_t>(n));
  const long F = static_cast<long>(ts.frames);
  const long B = F > 0 ? static_cast<long>(ts.doppler.cols()) / F : 0;
  const long lim = (rng && shift_frac > 0.0 && F > 1) ? max_shift_frames(ts.frames, shift_frac) : 0;
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto src = static_cast<Eigen::Index>(idx[from + static_cast<std::size_t>(r)]);
    y[static_cast<std::size_t>(r)] = ts.labels[static_cast<std::size_t>(src)];
    if (lim == 0) {
      xd.row(r) = ts.doppler.row(src).cast<float>();
      xi.row(r) = ts.ir.row(src).cast<float>();
      continue;
    }
    const long od = rng->uniform_int(-lim, lim);
    const long oi = rng->uniform_int(-lim, lim);
    xd.row(r).setZero();
    xi.row(r).setZero();
    for (long t = 0; t < F; ++t) {
      const long dd = t + od, di = t + oi;
      if (dd >= 0 && dd < F) xd.row(r).segment(dd * B, B) = ts.doppler.row(src).segment(t * B, B).cast<float>();
      if (di >= 0 && di < F) xi.row(r).segment(di * 2, 2) = ts.ir.row(src).segment(t * 2, 2).cast<float>();
    }
  }
}

inline double mean_loss(Network<float>& net, const TrainSet& ts, const std::vector<std::size_t>& idx) {
  if (idx.empty()) return std::numeric_limits<double>::quiet_NaN();
  Mat<float> xd, xi;
  std::vector<int> y;
  double total = 0.0;
  constexpr std::size_t kChunk = 256;
  for (std::size_t from = 0; from < idx.size(); from += kChunk) {
    const auto to = std::min(idx.size(), from + kChunk);
    gather(ts, idx, from, to, xd, xi, y, 0.0, nullptr);
    total += softmax_cross_entropy(net.logits(xd, xi, false, nullptr), y) * static_cast<double>(to - from);
  }
  return total / static_cast<double>(idx.size());
}

}  // namespace detail

/// Minibatch SGD. L2 decay is applied as a proximal step
/// w <- (w - lr g) / (1 + 2 lr l2), which stays stable for large lr*l2.
/// With a validation slice, training stops after `patience` epochs without
/// improvement and the best-validation parameters are returned.
inline TrainedModel train(const NetworkSpec& spec, const TrainSet& data, const TrainConfig& cfg, Rng& rng) {
  require(data.size() > 0, ErrorCode::InvalidArgument, "training set is empty");
  require(cfg.batch_size >= 1 && cfg.max_epochs >= 1, ErrorCode::InvalidArgument, "bad training config");
  Rng init_rng = rng.split(1);
  Rng order_rng = rng.split(2);
  Rng noise_rng = rng.split(3);
  Network<float> net = build_network<float>(spec, init_rng);
  const double lr = cfg.learning_rate.value_or(spec.hp.learning_rate());
  require(lr > 0.0, ErrorCode::InvalidArgument, "learning rate must be positive");

  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), 0);
  order_rng.shuffle(all.begin(), all.end());
  std::size_t n_val = static_cast<std::size_t>(std::lround(cfg.val_frac * static_cast<double>(all.size())));
  if (n_val >= all.size()) n_val = 0;
  const std::vector<std::size_t> val(all.begin(), all.begin() + static_cast<long>(n_val));
  std::vector<std::size_t> tr(all.begin() + static_cast<long>(n_val), all.end());

  TrainedModel out;
  out.spec = spec;
  double best = std::numeric_limits<double>::infinity();
  int stale = 0;
  Mat<float> xd, xi;
  std::vector<int> y, logits_labels;
  auto params = net.params();

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    order_rng.shuffle(tr.begin(), tr.end());
    double epoch_loss = 0.0;
    for (std::size_t from = 0; from < tr.size(); from += cfg.batch_size) {
      const auto to = std::min(tr.size(), from + cfg.batch_size);
      detail::gather(data, tr, from, to, xd, xi, y, cfg.shift_frac, &noise_rng);
      net.zero_grad();
      Mat<float> dlogits;
      const double loss = softmax_cross_entropy(net.logits(xd, xi, true, &noise_rng), y, &dlogits);
      if (!std::isfinite(loss))
        fail(ErrorCode::DivergenceError, "training loss became non-finite in epoch " + std::to_string(epoch));
      net.backward(dlogits);
      for (auto* p : params) {
        p->value -= static_cast<float>(lr) * p->grad;
        if (p->l2 > 0.0) p->value /= static_cast<float>(1.0 + 2.0 * lr * p->l2);
        if (!p->value.allFinite())
          fail(ErrorCode::DivergenceError, "parameters became non-finite in epoch " + std::to_string(epoch));
      }
      epoch_loss += loss * static_cast<double>(to - from);
    }
    out.final_train_loss = epoch_loss / static_cast<double>(tr.size());
    out.epochs_run = epoch;
    if (val.empty()) continue;
    const double vl = detail::mean_loss(net, data, val);
    if (!std::isfinite(vl))
      fail(ErrorCode::DivergenceError, "validation loss became non-finite in epoch " + std::to_string(epoch));
    if (vl < best - 1e-6) {
      best = vl;
      out.best_epoch = epoch;
      out.best_val_loss = vl;
      out.params = snapshot(net);
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }
  if (val.empty()) {
    out.params = snapshot(net);
    out.best_epoch = out.epochs_run;
  }
  return out;
}

/// Class probabilities [N x n_classes] in evaluation mode.
inline Eigen::MatrixXd predict_proba(const TrainedModel& model, const Matrix& doppler, const Matrix& ir) {
  Rng unused(0);
  Network<float> net = build_network<float>(model.spec, unused);
  load_params(net, model.params);
  const Eigen::Index n = model.spec.use_doppler || model.spec.model == ModelId::Mlp ? doppler.rows() : ir.rows();
  Eigen::MatrixXd out(n, static_cast<Eigen::Index>(model.spec.n_classes));
  constexpr Eigen::Index kChunk = 256;
  for (Eigen::Index from = 0; from < n; from += kChunk) {
    const Eigen::Index m = std::min(kChunk, n - from);
    Mat<float> xd, xi;
    if (doppler.rows() > 0) xd = doppler.middleRows(from, m).cast<float>();
    if (ir.rows() > 0) xi = ir.middleRows(from, m).cast<float>();
    out.middleRows(from, m) = net.probabilities(xd, xi).cast<double>();
  }
  return out;
}

inline std::vector<int> predict(const TrainedModel& model, const Matrix& doppler, const Matrix& ir) {
  const auto p = predict_proba(model, doppler, ir);
  std::vector<int> out(static_cast<std::size_t>(p.rows()));
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    Eigen::Index best = 0;
    p.row(i).maxCoeff(&best);
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

}  // namespace airware::nn
