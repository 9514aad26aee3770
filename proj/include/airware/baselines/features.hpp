#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <vector>

#include "airware/baselines/pca.hpp"
#include "airware/dataset.hpp"
#include "airware/dsp.hpp"
#include "airware/error.hpp"

namespace airware::baselines {

/// Per-channel mean over frames: (mean speed, mean angle).
inline Eigen::Vector2d ir_summary(const Matrix& ir) {
  require(ir.cols() == 2, ErrorCode::ShapeMismatch, "ir matrix must have 2 channels");
  if (ir.rows() == 0) return Eigen::Vector2d::Zero();
  return ir.colwise().mean().transpose();
}

inline Eigen::RowVectorXd flatten(const Matrix& m) { return Eigen::Map<const Eigen::RowVectorXd>(m.data(), m.size()); }

/// Stacks flattened Doppler matrices, one row per record.
inline Matrix doppler_rows(const std::vector<const SampleRecord*>& recs) {
  require(!recs.empty(), ErrorCode::InvalidArgument, "no records");
  const auto d = recs.front()->features.doppler.size();
  Matrix X(static_cast<Eigen::Index>(recs.size()), d);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    require(recs[i]->features.doppler.size() == d, ErrorCode::ShapeMismatch, "doppler dims differ between records");
    X.row(static_cast<Eigen::Index>(i)) = flatten(recs[i]->features.doppler);
  }
  return X;
}

/// PCA on the training records' flattened Doppler band; the fitted keys are
/// kept for leakage checks.
inline PcaModel fit_baseline_pca(const std::vector<const SampleRecord*>& train, std::size_t k, std::uint64_t seed = 0) {
  PcaModel m = pca_fit(doppler_rows(train), k, seed);
  for (const auto* r : train) m.fitted_on.push_back(dsp::record_key(*r));
  std::sort(m.fitted_on.begin(), m.fitted_on.end());
  return m;
}

/// concat(PCA(flattened Doppler), ir_summary) -> length k + 2.
inline Eigen::RowVectorXd baseline_featurize(const SampleRecord& r, const PcaModel& pca) {
  const auto d = r.features.doppler.size();
  require(d == pca.mean.size(), ErrorCode::ShapeMismatch, "doppler size does not match the PCA model");
  Eigen::RowVectorXd out(static_cast<Eigen::Index>(pca.k() + 2));
  out.head(static_cast<Eigen::Index>(pca.k())) = (flatten(r.features.doppler) - pca.mean) * pca.components.transpose();
  out.tail(2) = ir_summary(r.features.ir).transpose();
  return out;
}

/// Column z-scoring fitted on training features (for the gradient-trained
/// baselines, which are scale sensitive).
struct Standardizer {
  Eigen::RowVectorXd mean, scale;

  static Standardizer fit(const Matrix& X) {
    Standardizer s;
    s.mean = X.colwise().mean();
    s.scale = ((X.rowwise() - s.mean).array().square().colwise().sum() / static_cast<double>(std::max<Eigen::Index>(X.rows(), 1)))
                  .sqrt()
                  .matrix();
    for (Eigen::Index j = 0; j < s.scale.size(); ++j)
      if (s.scale(j) < 1e-12) s.scale(j) = 1.0;
    return s;
  }
  Matrix apply(const Matrix& X) const {
    return ((X.rowwise() - mean).array().rowwise() / scale.array()).matrix();
  }
};

}  // namespace airware::baselines
