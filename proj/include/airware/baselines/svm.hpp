#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "airware/dataset.hpp"
#include "airware/error.hpp"

namespace airware::baselines {

struct SvmConfig {
  double C = 10.0;
  int max_iter = 2000;
  double tol = 1e-4;  // relative objective decrease counted as progress
  int patience = 50;  // iterations without progress before declaring convergence
};

struct BinarySvm {
  Eigen::VectorXd w;
  double b = 0.0;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;

  double decision(const double* x, Eigen::Index d) const {
    return Eigen::Map<const Eigen::VectorXd>(x, d).dot(w) + b;
  }
};

/// Primal objective (1/2)(||w||^2 + b^2) + C sum max(0, 1 - y (w.x + b)).
inline double svm_objective(const Matrix& X, const std::vector<int>& y_pm, const Eigen::VectorXd& w, double b,
                            double C) {
  const Eigen::VectorXd margin = X * w;
  double hinge = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    hinge += std::max(0.0, 1.0 - y_pm[static_cast<std::size_t>(i)] * (margin(i) + b));
  return 0.5 * (w.squaredNorm() + b * b) + C * hinge;
}

/// Full-batch subgradient descent on the primal with Pegasos step sizes
/// (lambda = 1/(C n), eta_t = 1/(lambda t)) and projection onto the ball
/// that must contain the optimum. The bias is an extra constant-1 feature,
/// so it is regularized like the weights. Returns the best iterate seen.
inline BinarySvm svm_train_binary(const Matrix& X, const std::vector<int>& y_pm, const SvmConfig& cfg) {
  const auto n = X.rows(), d = X.cols();
  require(n >= 1 && static_cast<std::size_t>(n) == y_pm.size(), ErrorCode::ShapeMismatch, "svm: bad shapes");
  require(cfg.C > 0.0, ErrorCode::InvalidArgument, "svm: C must be positive");
  const double lambda = 1.0 / (cfg.C * static_cast<double>(n));
  const double radius = 1.0 / std::sqrt(lambda);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  double b = 0.0;
  BinarySvm best;
  best.w = w;
  best.objective = svm_objective(X, y_pm, w, b, cfg.C);
  int stale = 0;
  double reference = best.objective;
  Eigen::VectorXd g(d);
  for (int t = 1; t <= cfg.max_iter; ++t) {
    const Eigen::VectorXd margin = X * w;
    g.setZero();
    double gb = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double yi = y_pm[static_cast<std::size_t>(i)];
      if (yi * (margin(i) + b) < 1.0) {
        g.noalias() -= yi * X.row(i).transpose();
        gb -= yi;
      }
    }
    const double eta = 1.0 / (lambda * static_cast<double>(t));
    const double shrink = 1.0 - eta * lambda;
    w = shrink * w - (eta / static_cast<double>(n)) * g;
    b = shrink * b - (eta / static_cast<double>(n)) * gb;
    const double norm = std::sqrt(w.squaredNorm() + b * b);
    if (norm > radius) {
      w *= radius / norm;
      b *= radius / norm;
    }

    const double obj = svm_objective(X, y_pm, w, b, cfg.C);
    best.iterations = t;
    if (obj < best.objective) {
      best.objective = obj;
      best.w = w;
      best.b = b;
    }
    if (best.objective < reference - cfg.tol * std::max(1.0, std::abs(reference))) {
      reference = best.objective;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      best.converged = true;
      break;
    }
  }
  return best;
}

struct LinearSvmModel {
  std::vector<BinarySvm> machines;  // one per class, one-vs-rest
  std::vector<std::string> warnings;
};

inline LinearSvmModel svm_train(const Matrix& X, const std::vector<int>& y, const SvmConfig& cfg = {}) {
  require(static_cast<std::size_t>(X.rows()) == y.size() && !y.empty(), ErrorCode::ShapeMismatch,
          "svm: feature/label count mismatch");
  const int C = *std::max_element(y.begin(), y.end()) + 1;
  require(C >= 2, ErrorCode::InvalidArgument, "svm needs at least 2 classes");
  LinearSvmModel m;
  std::vector<int> pm(y.size());
  for (int c = 0; c < C; ++c) {
    for (std::size_t i = 0; i < y.size(); ++i) pm[i] = y[i] == c ? 1 : -1;
    m.machines.push_back(svm_train_binary(X, pm, cfg));
    if (!m.machines.back().converged)
      m.warnings.push_back("NonConvergence: class " + std::to_string(c) + " stopped after " +
                           std::to_string(cfg.max_iter) + " iterations; best iterate kept");
  }
  return m;
}

/// Highest one-vs-rest decision value; ties go to the lowest class.
inline std::vector<int> svm_predict(const LinearSvmModel& m, const Matrix& X) {
  std::vector<int> out(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < m.machines.size(); ++c) {
      const double v = m.machines[c].decision(X.data() + i * X.cols(), X.cols());
      if (v > best) {
        best = v;
        out[static_cast<std::size_t>(i)] = static_cast<int>(c);
      }
    }
  }
  return out;
}

}  // namespace airware::baselines
