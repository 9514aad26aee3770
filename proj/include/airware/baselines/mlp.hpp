#pragma once

#include <vector>

#include "airware/dataset.hpp"
#include "airware/nn/train.hpp"
#include "airware/random.hpp"

namespace airware::baselines {

struct MlpConfig {
  std::vector<std::size_t> hidden = {500, 250};
  double l2 = 0.01;
  nn::TrainConfig train{.max_epochs = 200, .batch_size = 32, .patience = 15, .val_frac = 0.1, .shift_frac = 0.0,
                        .learning_rate = 0.01};
};

struct MlpModel {
  nn::TrainedModel net;
};

/// tanh MLP trained with the nn machinery (softmax output, SGD, L2 on all
/// weights, early stopping on a validation slice).
inline MlpModel mlp_train(const Matrix& X, const std::vector<int>& y, const MlpConfig& cfg, Rng& rng) {
  require(static_cast<std::size_t>(X.rows()) == y.size() && !y.empty(), ErrorCode::ShapeMismatch,
          "mlp: feature/label count mismatch");
  nn::NetworkSpec spec;
  spec.model = nn::ModelId::Mlp;
  spec.frames = 1;
  spec.bins = static_cast<std::size_t>(X.cols());
  spec.n_classes = static_cast<std::size_t>(*std::max_element(y.begin(), y.end()) + 1);
  spec.mlp_hidden = cfg.hidden;
  spec.mlp_l2 = cfg.l2;
  nn::TrainSet ts;
  ts.doppler = X;
  ts.ir = Matrix(X.rows(), 0);
  ts.labels = y;
  ts.frames = 1;
  return {nn::train(spec, ts, cfg.train, rng)};
}

inline Eigen::MatrixXd mlp_proba(const MlpModel& m, const Matrix& X) {
  return nn::predict_proba(m.net, X, Matrix(X.rows(), 0));
}

inline std::vector<int> mlp_predict(const MlpModel& m, const Matrix& X) {
  return nn::predict(m.net, X, Matrix(X.rows(), 0));
}

/// Squared Frobenius norm of all weight matrices (biases excluded).
inline double mlp_weight_norm(const MlpModel& m) {
  double s = 0.0;
  for (std::size_t i = 0; i < m.net.params.size(); i += 2) s += static_cast<double>(m.net.params[i].squaredNorm());
  return s;
}

}  // namespace airware::baselines
