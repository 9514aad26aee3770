#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "airware/baselines/features.hpp"
#include "airware/baselines/forest.hpp"
#include "airware/baselines/mlp.hpp"
#include "airware/baselines/pca.hpp"
#include "airware/baselines/svm.hpp"
#include "airware/simulate.hpp"

using namespace airware;
using namespace airware::baselines;
using Catch::Approx;

namespace {

struct Blobs {
  Matrix X;
  std::vector<int> y;
};

Blobs blobs(int n_per_class, double sep, Rng& rng, int dims = 2) {
  Blobs b;
  b.X.resize(2 * n_per_class, dims);
  for (int i = 0; i < 2 * n_per_class; ++i) {
    const int c = i % 2;
    for (int j = 0; j < dims; ++j) b.X(i, j) = rng.normal() + (j == 0 ? (c ? sep : -sep) : 0.0);
    b.y.push_back(c);
  }
  return b;
}

double accuracy(const std::vector<int>& pred, const std::vector<int>& y) {
  double hit = 0;
  for (std::size_t i = 0; i < y.size(); ++i) hit += pred[i] == y[i];
  return hit / static_cast<double>(y.size());
}

double reconstruction_error(const Matrix& X, std::size_t k) {
  const auto m = pca_fit(X, k);
  return (pca_inverse(m, pca_transform(m, X)) - X).squaredNorm();
}

}  // namespace

TEST_CASE("ir_summary averages over frames") {
  CHECK(ir_summary(Matrix::Zero(57, 2)) == Eigen::Vector2d::Zero());
  Matrix c = Matrix::Zero(57, 2);
  c.col(0).setConstant(40);
  CHECK(ir_summary(c)(0) == Approx(40.0));
  Matrix one = Matrix::Zero(57, 2);
  one(20, 0) = 57;
  CHECK(ir_summary(one)(0) == Approx(1.0));
  CHECK_THROWS_AS(ir_summary(Matrix::Zero(5, 3)), Error);
}

TEST_CASE("pca") {
  Rng rng(1);
  SECTION("rank-one data") {
    Matrix X(50, 2);
    for (Eigen::Index i = 0; i < 50; ++i) {
      const double t = rng.normal();
      X.row(i) << 2 * t + 1e-4 * rng.normal(), -t;
    }
    const auto m = pca_fit(X, 2);
    CHECK(m.explained_variance(0) / m.explained_variance.sum() > 0.999);
    CHECK(std::abs(m.components(0, 0)) == Approx(2 / std::sqrt(5.0)).margin(1e-3));
  }
  SECTION("orthonormal rows and sorted variance") {
    for (auto [n, d, k] : {std::tuple{40, 10, 6}, std::tuple{30, 200, 12}, std::tuple{300, 120, 20}}) {
      Matrix X(n, d);
      for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.normal();
      X.col(0) *= 5;
      const auto m = pca_fit(X, static_cast<std::size_t>(k), 3);
      REQUIRE(m.k() == static_cast<std::size_t>(k));
      const Matrix G = m.components * m.components.transpose();
      CHECK((G - Matrix::Identity(k, k)).cwiseAbs().maxCoeff() < 1e-6);
      for (Eigen::Index i = 1; i < m.explained_variance.size(); ++i)
        CHECK(m.explained_variance(i) <= m.explained_variance(i - 1) * (1 + 1e-9));
    }
  }
  SECTION("reconstruction error is monotone in k") {
    Matrix X(40, 8);
    for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.normal();
    for (std::size_t k = 1; k < 7; ++k) CHECK(reconstruction_error(X, k) >= reconstruction_error(X, k + 1) - 1e-9);
  }
  SECTION("full rank keeps pairwise distances") {
    Matrix X(30, 5);
    for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.normal();
    const auto m = pca_fit(X, 5);
    const Matrix Z = pca_transform(m, X);
    for (Eigen::Index i = 0; i < 30; ++i)
      for (Eigen::Index j = i + 1; j < 30; ++j)
        CHECK((Z.row(i) - Z.row(j)).norm() == Approx((X.row(i) - X.row(j)).norm()).margin(1e-6));
  }
  SECTION("rank deficiency clips k with a warning") {
    Matrix X(5, 10);
    for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.normal();
    const auto m = pca_fit(X, 8);
    CHECK(m.k() == 4);
    CHECK_FALSE(m.warnings.empty());
    CHECK_THROWS_AS(pca_fit(X.topRows(1), 1), Error);
  }
}

TEST_CASE("gini impurity") {
  CHECK(gini({10, 0}) == 0.0);
  CHECK(gini({5, 5}) == Approx(0.5));
  CHECK(gini({1, 1, 1}) == Approx(2.0 / 3.0));
  CHECK(gini({}) == 0.0);
}

TEST_CASE("random forest") {
  Rng rng(2);
  SECTION("one unbootstrapped tree memorizes") {
    const auto b = blobs(40, 0.5, rng, 3);
    ForestConfig cfg;
    cfg.n_trees = 1;
    cfg.bootstrap = false;
    cfg.max_features = 3;
    CHECK(accuracy(forest_predict(forest_train(b.X, b.y, cfg, Rng(1)), b.X), b.y) == 1.0);
  }
  SECTION("separated blobs") {
    const auto tr = blobs(100, 2.5, rng), te = blobs(100, 2.5, rng);
    ForestConfig cfg;
    cfg.n_trees = 100;
    CHECK(accuracy(forest_predict(forest_train(tr.X, tr.y, cfg, Rng(1)), te.X), te.y) >= 0.95);
  }
  SECTION("more trees do not hurt on the median") {
    std::vector<double> a10, a100;
    for (std::uint64_t s = 0; s < 5; ++s) {
      Rng r(50 + s);
      const auto tr = blobs(60, 1.0, r, 4), te = blobs(2000, 1.0, r, 4);
      ForestConfig c;
      c.n_trees = 10;
      a10.push_back(accuracy(forest_predict(forest_train(tr.X, tr.y, c, Rng(s)), te.X), te.y));
      c.n_trees = 100;
      a100.push_back(accuracy(forest_predict(forest_train(tr.X, tr.y, c, Rng(s)), te.X), te.y));
    }
    std::sort(a10.begin(), a10.end());
    std::sort(a100.begin(), a100.end());
    CHECK(a100[2] >= a10[2]);
  }
  SECTION("worker count does not change the forest") {
    const auto b = blobs(50, 1.0, rng);
    ForestConfig c1, c3;
    c1.n_trees = c3.n_trees = 20;
    c3.jobs = 3;
    CHECK(forest_votes(forest_train(b.X, b.y, c1, Rng(4)), b.X) == forest_votes(forest_train(b.X, b.y, c3, Rng(4)), b.X));
  }
  SECTION("vote ties go to the lowest class") {
    ForestModel m;
    m.n_classes = 2;
    m.n_features = 1;
    m.trees = {DecisionTree{{TreeNode{-1, 0, -1, -1, 1}}}, DecisionTree{{TreeNode{-1, 0, -1, -1, 0}}}};
    CHECK(forest_predict(m, Matrix::Zero(1, 1))[0] == 0);
  }
  SECTION("single class rejected") {
    CHECK_THROWS_AS(forest_train(Matrix::Zero(3, 2), {1, 1, 1}, {}, Rng(1)), Error);
  }
}

TEST_CASE("linear svm") {
  SECTION("symmetric two-point problem splits at the midpoint") {
    Matrix X(2, 1);
    X << -1, 1;
    const auto m = svm_train(X, {0, 1});
    REQUIRE(m.machines.size() == 2);
    const auto& s = m.machines[1];
    REQUIRE(s.w(0) > 0);
    CHECK(std::abs(-s.b / s.w(0)) <= 0.1);
    Matrix probe(2, 1);
    probe << -0.2, 0.2;
    CHECK(svm_predict(m, probe) == std::vector<int>{0, 1});
  }
  SECTION("hard-margin limit") {
    Rng rng(3);
    const auto b = blobs(50, 3.0, rng);
    SvmConfig cfg;
    cfg.C = 1e7;
    cfg.max_iter = 5000;
    const auto m = svm_train(b.X, b.y, cfg);
    const auto pred = svm_predict(m, b.X);
    int errors = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) errors += pred[i] != b.y[i];
    CHECK(errors <= 1);
  }
  SECTION("one-vs-rest") {
    Matrix X(9, 2);
    X << 0, 0, 0.1, 0, 0, 0.1, 5, 5, 5.1, 5, 5, 5.1, -5, 5, -5.1, 5, -5, 5.1;
    const std::vector<int> y{0, 0, 0, 1, 1, 1, 2, 2, 2};
    const auto m = svm_train(X, y);
    CHECK(m.machines.size() == 3);
    CHECK(svm_predict(m, X) == y);
  }
  SECTION("objective value") {
    Matrix X(2, 1);
    X << -1, 1;
    Eigen::VectorXd w(1);
    w << 0.5;
    CHECK(svm_objective(X, {-1, 1}, w, 0.0, 10.0) == Approx(0.125 + 10 * 1.0));
  }
}

TEST_CASE("mlp") {
  SECTION("solves XOR") {
    Matrix X(4, 2);
    X << 0, 0, 0, 1, 1, 0, 1, 1;
    const std::vector<int> y{0, 1, 1, 0};
    MlpConfig cfg;
    cfg.hidden = {16};
    cfg.l2 = 0.0;
    cfg.train.val_frac = 0.0;
    cfg.train.batch_size = 4;
    cfg.train.max_epochs = 3000;
    cfg.train.learning_rate = 0.5;
    Rng rng(1);
    const auto m = mlp_train(X, y, cfg, rng);
    CHECK(mlp_predict(m, X) == y);
    const auto p = mlp_proba(m, X);
    for (Eigen::Index i = 0; i < 4; ++i) CHECK(p.row(i).sum() == Approx(1.0).margin(1e-6));
  }
  SECTION("strong decay shrinks the weights") {
    Rng data(2);
    const auto b = blobs(50, 1.5, data, 4);
    MlpConfig cfg;
    cfg.hidden = {20, 10};
    cfg.train.max_epochs = 50;
    cfg.train.val_frac = 0.0;
    Rng r1(3), r2(3);
    const auto base = mlp_train(b.X, b.y, cfg, r1);
    cfg.l2 = 1e3;
    const auto decayed = mlp_train(b.X, b.y, cfg, r2);
    CHECK(mlp_weight_norm(decayed) < 0.01 * mlp_weight_norm(base));
  }
}

TEST_CASE("baseline features") {
  Dataset ds{validate_config({}), {}};
  Rng rng(4);
  for (int i = 0; i < 6; ++i) {
    SampleRecord r;
    r.user_id = 1;
    r.gesture = static_cast<Gesture>(i);
    r.features.doppler = Matrix(57, 32);
    for (Eigen::Index k = 0; k < r.features.doppler.size(); ++k) r.features.doppler.data()[k] = rng.normal();
    r.features.ir = Matrix::Zero(57, 2);
    ds.records.push_back(r);
  }
  std::vector<const SampleRecord*> train(ds.records.size() - 1);
  for (std::size_t i = 0; i + 1 < ds.records.size(); ++i) train[i] = &ds.records[i];
  const auto pca = fit_baseline_pca(train, 4);
  const auto f = baseline_featurize(ds.records.back(), pca);
  CHECK(f.size() == 6);
  CHECK_FALSE(pca.was_fitted_on(dsp::record_key(ds.records.back())));
  CHECK(pca.was_fitted_on(dsp::record_key(ds.records.front())));

  SampleRecord zero = ds.records.back();
  zero.features.doppler.setZero();
  const auto fz = baseline_featurize(zero, pca);
  CHECK((fz.head(4) - (-pca.mean) * pca.components.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(fz.tail(2).isZero());

  zero.features.doppler = Matrix::Zero(57, 16);
  CHECK_THROWS_AS(baseline_featurize(zero, pca), Error);
}

TEST_CASE("every baseline beats five times chance on easy synthetic gestures") {
  const auto sim = sim::simulate_dataset(3, 5, SegmentationMode::IrRequired, {}, Rng(21));
  const auto [norm, st] = dsp::normalize_dataset(sim.dataset);
  // Reps 0-2 train, 3-4 test, for every user.
  std::vector<const SampleRecord*> tr, te;
  for (const auto& r : norm.records) (r.rep_index < 3 ? tr : te).push_back(&r);
  const auto pca = fit_baseline_pca(tr, 30);
  const auto build = [&](const std::vector<const SampleRecord*>& recs, std::vector<int>& y) {
    Matrix X(static_cast<Eigen::Index>(recs.size()), 32);
    for (std::size_t i = 0; i < recs.size(); ++i) {
      X.row(static_cast<Eigen::Index>(i)) = baseline_featurize(*recs[i], pca);
      y.push_back(code(recs[i]->gesture));
    }
    return X;
  };
  std::vector<int> ytr, yte;
  const Matrix Xtr = build(tr, ytr), Xte = build(te, yte);
  const auto scaler = Standardizer::fit(Xtr);
  const Matrix Str = scaler.apply(Xtr), Ste = scaler.apply(Xte);
  const double floor = 5.0 / 21.0;

  const double rf = accuracy(forest_predict(forest_train(Xtr, ytr, {}, Rng(1)), Xte), yte);
  const double svm = accuracy(svm_predict(svm_train(Str, ytr), Ste), yte);
  Rng mr(2);
  const double mlp = accuracy(mlp_predict(mlp_train(Str, ytr, {}, mr), Ste), yte);
  INFO("forest " << rf << " svm " << svm << " mlp " << mlp);
  CHECK(rf > floor);
  CHECK(svm > floor);
  CHECK(mlp > floor);
}
