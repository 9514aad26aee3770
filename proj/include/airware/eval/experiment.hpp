#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "airware/baselines/features.hpp"
#include "airware/baselines/forest.hpp"
#include "airware/baselines/mlp.hpp"
#include "airware/baselines/svm.hpp"
#include "airware/dataset.hpp"
#include "airware/dsp.hpp"
#include "airware/eval/metrics.hpp"
#include "airware/eval/splits.hpp"
#include "airware/nn/train.hpp"
#include "airware/parallel.hpp"

namespace airware::eval {

enum class Strategy { Loso, Personalized, UserCalibrated };
enum class Modality { IrOnly, DopplerOnly, Fused };
enum class Family { M1, M2, M3, M4, Rf, Svm, Mlp };

constexpr std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::Loso: return "loso";
    case Strategy::Personalized: return "personalized";
    case Strategy::UserCalibrated: return "user-calibrated";
  }
  return "loso";
}
constexpr std::string_view to_string(Modality m) {
  switch (m) {
    case Modality::IrOnly: return "ir-only";
    case Modality::DopplerOnly: return "doppler-only";
    case Modality::Fused: return "fused";
  }
  return "fused";
}
constexpr std::string_view to_string(Family f) {
  constexpr std::string_view names[] = {"m1", "m2", "m3", "m4", "rf", "svm", "mlp"};
  return names[static_cast<int>(f)];
}

template <typename E>
std::optional<E> parse_enum(std::string_view s, std::initializer_list<E> all) {
  for (E e : all)
    if (to_string(e) == s) return e;
  return std::nullopt;
}
inline std::optional<Strategy> parse_strategy(std::string_view s) {
  return parse_enum(s, {Strategy::Loso, Strategy::Personalized, Strategy::UserCalibrated});
}
inline std::optional<Modality> parse_modality(std::string_view s) {
  return parse_enum(s, {Modality::IrOnly, Modality::DopplerOnly, Modality::Fused});
}
inline std::optional<Family> parse_family(std::string_view s) {
  return parse_enum(s, {Family::M1, Family::M2, Family::M3, Family::M4, Family::Rf, Family::Svm, Family::Mlp});
}

constexpr bool is_cnn(Family f) { return f == Family::M1 || f == Family::M2 || f == Family::M3 || f == Family::M4; }

inline nn::ModelId cnn_model(Family f) {
  require(is_cnn(f), ErrorCode::InvalidArgument, "not a convolutional family: " + std::string(to_string(f)));
  return static_cast<nn::ModelId>(static_cast<int>(f));
}

struct ExperimentConfig {
  nn::HyperParams hp;
  nn::TrainConfig train;
  baselines::ForestConfig forest;
  baselines::SvmConfig svm;
  baselines::MlpConfig mlp;
  std::size_t pca_components = 100;
  int iterations = 5;
  double train_frac = 0.6;
  bool pool_iterations = false;  // per-user confusion pooled over iterations instead of averaging macros
  std::size_t jobs = 1;
};

struct FoldResult {
  int user = 0;
  int iteration = 0;
  std::size_t n_train = 0, n_test = 0;
  ConfusionMatrix confusion;
  double macro = 0.0;
  bool failed = false;
  std::string error;
  std::vector<std::string> warnings;
};

struct UserResult {
  int user = 0;
  double macro = 0.0;
  ConfusionMatrix confusion;  // summed over the user's folds
  int folds = 0;
};

struct EvalReport {
  Strategy strategy = Strategy::Loso;
  Modality modality = Modality::Fused;
  Family family = Family::M3;
  std::vector<int> classes;
  std::vector<FoldResult> folds;
  std::vector<UserResult> per_user;
  double overall_mean = 0.0;
  double std_error = 0.0;
  bool complete = true;
  std::vector<std::string> warnings;

  std::vector<double> user_scores() const {
    std::vector<double> v;
    for (const auto& u : per_user) v.push_back(u.macro);
    return v;
  }
};

namespace detail {

inline std::vector<int> class_codes(const Dataset& ds) {
  std::vector<int> out;
  for (auto g : ds.classes()) out.push_back(code(g));
  return out;
}

inline std::vector<int> labels_of(const Dataset& ds, const std::vector<int>& classes) {
  std::vector<int> y;
  y.reserve(ds.records.size());
  for (const auto& r : ds.records) {
    const auto it = std::lower_bound(classes.begin(), classes.end(), code(r.gesture));
    require(it != classes.end() && *it == code(r.gesture), ErrorCode::InvalidArgument, "record class outside the label set");
    y.push_back(static_cast<int>(it - classes.begin()));
  }
  return y;
}

inline std::vector<const SampleRecord*> pointers(const Dataset& ds) {
  std::vector<const SampleRecord*> p;
  for (const auto& r : ds.records) p.push_back(&r);
  return p;
}

/// Rows of baseline features for the chosen modality.
inline Matrix baseline_matrix(const Dataset& ds, Modality modality, const baselines::PcaModel* pca) {
  const auto n = static_cast<Eigen::Index>(ds.records.size());
  if (modality == Modality::IrOnly) {
    Matrix X(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) X.row(i) = baselines::ir_summary(ds.records[static_cast<std::size_t>(i)].features.ir).transpose();
    return X;
  }
  const auto k = static_cast<Eigen::Index>(pca->k());
  Matrix X(n, modality == Modality::Fused ? k + 2 : k);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto f = baselines::baseline_featurize(ds.records[static_cast<std::size_t>(i)], *pca);
    X.row(i) = f.head(X.cols());
  }
  return X;
}

}  // namespace detail

/// Everything fitted on a training set: normalization, optional PCA and
/// standardization, and one trained model.
struct FittedPipeline {
  Family family = Family::M3;
  Modality modality = Modality::Fused;
  std::vector<int> classes;
  dsp::NormStats norm;
  std::optional<baselines::PcaModel> pca;
  std::optional<baselines::Standardizer> scaler;
  std::optional<nn::TrainedModel> net;  // CNN families and the MLP
  std::optional<baselines::ForestModel> forest;
  std::optional<baselines::LinearSvmModel> svm;
  std::vector<std::string> warnings;
};

inline FittedPipeline fit_pipeline(const Dataset& train_raw, const std::vector<int>& classes, Family family,
                                   Modality modality, const ExperimentConfig& cfg, const Rng& rng) {
  FittedPipeline p;
  p.family = family;
  p.modality = modality;
  p.classes = classes;
  auto [train, stats] = dsp::normalize_dataset(train_raw);
  p.norm = std::move(stats);
  p.warnings = p.norm.warnings;
  const auto y = detail::labels_of(train, classes);

  if (is_cnn(family)) {
    nn::NetworkSpec spec;
    spec.model = cnn_model(family);
    spec.frames = train.config.frames_per_segment();
    spec.bins = 2 * train.config.band_half_width;
    spec.n_classes = classes.size();
    spec.use_doppler = modality != Modality::IrOnly;
    spec.use_ir = modality != Modality::DopplerOnly;
    spec.hp = cfg.hp;
    std::vector<const FeatureTensor*> feats;
    for (const auto& r : train.records) feats.push_back(&r.features);
    Rng train_rng = rng.split(1);
    p.net = nn::train(spec, nn::make_train_set(feats, y), cfg.train, train_rng);
    return p;
  }

  if (modality != Modality::IrOnly) {
    p.pca = baselines::fit_baseline_pca(detail::pointers(train), cfg.pca_components, rng.split(2).seed());
    p.warnings.insert(p.warnings.end(), p.pca->warnings.begin(), p.pca->warnings.end());
  }
  Matrix X = detail::baseline_matrix(train, modality, p.pca ? &*p.pca : nullptr);
  switch (family) {
    case Family::Rf:
      p.forest = baselines::forest_train(X, y, cfg.forest, rng.split(3));
      break;
    case Family::Svm:
      p.scaler = baselines::Standardizer::fit(X);
      p.svm = baselines::svm_train(p.scaler->apply(X), y, cfg.svm);
      p.warnings.insert(p.warnings.end(), p.svm->warnings.begin(), p.svm->warnings.end());
      break;
    case Family::Mlp: {
      p.scaler = baselines::Standardizer::fit(X);
      Rng r = rng.split(4);
      p.net = baselines::mlp_train(p.scaler->apply(X), y, cfg.mlp, r).net;
      break;
    }
    default:
      fail(ErrorCode::InvalidArgument, "unhandled family");
  }
  return p;
}

/// Label indices (into p.classes). Raises Leakage if any test record
/// contributed to a fitted stage.
inline std::vector<int> predict_pipeline(const FittedPipeline& p, const Dataset& test_raw) {
  for (const auto& r : test_raw.records) {
    const auto key = dsp::record_key(r);
    require(!p.norm.was_fitted_on(key), ErrorCode::Leakage, "normalization statistics saw a test record");
    if (p.pca) require(!p.pca->was_fitted_on(key), ErrorCode::Leakage, "PCA saw a test record");
  }
  auto [test, unused] = dsp::normalize_dataset(test_raw, p.norm);
  if (is_cnn(p.family)) {
    std::vector<const FeatureTensor*> tf;
    for (const auto& r : test.records) tf.push_back(&r.features);
    const auto ts = nn::make_train_set(tf, std::vector<int>(tf.size(), 0));
    return nn::predict(*p.net, ts.doppler, ts.ir);
  }
  Matrix X = detail::baseline_matrix(test, p.modality, p.pca ? &*p.pca : nullptr);
  if (p.scaler) X = p.scaler->apply(X);
  switch (p.family) {
    case Family::Rf: return baselines::forest_predict(*p.forest, X);
    case Family::Svm: return baselines::svm_predict(*p.svm, X);
    case Family::Mlp: return baselines::mlp_predict(baselines::MlpModel{*p.net}, X);
    default: fail(ErrorCode::InvalidArgument, "unhandled family");
  }
}

inline FoldResult run_fold(const Dataset& ds, const Fold& fold, const std::vector<int>& classes, Family family,
                           Modality modality, const ExperimentConfig& cfg, const Rng& rng) {
  FoldResult out;
  out.user = fold.user;
  out.iteration = fold.iteration;
  out.n_train = fold.train.size();
  out.n_test = fold.test.size();
  out.confusion = ConfusionMatrix(classes);
  try {
    const Dataset train = ds.subset(fold.train);
    const Dataset test = ds.subset(fold.test);
    const auto p = fit_pipeline(train, classes, family, modality, cfg, rng);
    out.warnings = p.warnings;
    const auto pred = predict_pipeline(p, test);
    const auto truth = detail::labels_of(test, classes);
    for (std::size_t i = 0; i < truth.size(); ++i)
      out.confusion.add(static_cast<std::size_t>(truth[i]), static_cast<std::size_t>(pred[i]));
    const auto tpr = per_class_tpr(out.confusion);
    out.macro = tpr.macro;
    out.warnings.insert(out.warnings.end(), tpr.warnings.begin(), tpr.warnings.end());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Leakage) throw;
    out.failed = true;
    out.error = e.what();
  }
  return out;
}

inline std::vector<Fold> make_folds(const Dataset& ds, Strategy strategy, const ExperimentConfig& cfg, const Rng& rng) {
  switch (strategy) {
    case Strategy::Loso: return split_loso(ds);
    case Strategy::Personalized: return split_personalized(ds, rng, cfg.iterations, cfg.train_frac);
    case Strategy::UserCalibrated: return split_user_calibrated(ds, rng, cfg.iterations, cfg.train_frac);
  }
  return {};
}

/// Folds run in parallel with per-fold streams; users are scored from their
/// folds (macro averaged over iterations unless pooling), then averaged.
inline EvalReport run_experiment(const Dataset& ds, Family family, Strategy strategy, Modality modality,
                                 const ExperimentConfig& cfg, const Rng& rng) {
  require(!ds.records.empty(), ErrorCode::InvalidArgument, "empty dataset");
  EvalReport rep;
  rep.strategy = strategy;
  rep.modality = modality;
  rep.family = family;
  rep.classes = detail::class_codes(ds);
  const auto folds = make_folds(ds, strategy, cfg, rng.split(0));
  rep.folds.resize(folds.size());
  ExperimentConfig inner = cfg;
  if (cfg.jobs > 1 && folds.size() > 1) inner.forest.jobs = 1;
  parallel_for(folds.size(), cfg.jobs, [&](std::size_t i) {
    rep.folds[i] = run_fold(ds, folds[i], rep.classes, family, modality, inner, rng.split(1000 + i));
  });

  std::map<int, std::vector<const FoldResult*>> by_user;
  for (const auto& f : rep.folds) {
    if (f.failed) {
      rep.complete = false;
      rep.warnings.push_back("fold (user " + std::to_string(f.user) + ", iteration " + std::to_string(f.iteration) +
                             ") failed: " + f.error);
      continue;
    }
    by_user[f.user].push_back(&f);
  }
  for (const auto& [user, fs] : by_user) {
    UserResult u;
    u.user = user;
    u.confusion = ConfusionMatrix(rep.classes);
    double sum = 0.0;
    for (const auto* f : fs) {
      u.confusion += f->confusion;
      sum += f->macro;
    }
    u.folds = static_cast<int>(fs.size());
    u.macro = cfg.pool_iterations ? per_class_tpr(u.confusion).macro : sum / static_cast<double>(fs.size());
    rep.per_user.push_back(std::move(u));
  }
  if (rep.per_user.empty()) rep.warnings.push_back("no fold succeeded");
  const auto ms = mean_se(rep.user_scores());
  rep.overall_mean = ms.mean;
  rep.std_error = ms.std_error;
  return rep;
}

struct CurvePoint {
  double fraction = 0.0;
  double macro = 0.0;
  double std_error = 0.0;
};

struct TrainingCurve {
  std::vector<CurvePoint> points;
  double spearman = 0.0;
  bool complete = true;
};

/// User-calibrated evaluation with a growing calibration share of the target
/// user's data.
inline TrainingCurve training_curve(const Dataset& ds, Family family, Modality modality, const ExperimentConfig& cfg,
                                    const Rng& rng, const std::vector<double>& fractions = {0.1, 0.2, 0.3, 0.4, 0.5}) {
  TrainingCurve tc;
  std::vector<double> xs, ys;
  for (double f : fractions) {
    ExperimentConfig c = cfg;
    c.train_frac = f;
    const auto rep = run_experiment(ds, family, Strategy::UserCalibrated, modality, c, rng);
    tc.points.push_back({f, rep.overall_mean, rep.std_error});
    tc.complete = tc.complete && rep.complete;
    xs.push_back(f);
    ys.push_back(rep.overall_mean);
  }
  if (xs.size() >= 2) tc.spearman = spearman(xs, ys);
  return tc;
}

/// User-calibrated evaluation restricted to a gesture subset; the output
/// layer is sized to the subset.
inline EvalReport evaluate_reduced(const Dataset& ds, GestureSetId set, Family family, Modality modality,
                                   const ExperimentConfig& cfg, const Rng& rng) {
  return run_experiment(filter_classes(ds, gesture_set_members(set)), family, Strategy::UserCalibrated, modality, cfg,
                        rng);
}

}  // namespace airware::eval
