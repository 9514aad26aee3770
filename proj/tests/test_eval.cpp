#include <catch_amalgamated.hpp>

#include <set>

#include "airware/eval/report.hpp"
#include "airware/eval/tuning.hpp"

using namespace airware;
using namespace airware::eval;
using Catch::Approx;

namespace {

// Cheap separable features: class c lights Doppler column c % 32 and sets a
// class-dependent IR speed.
Dataset fake_dataset(int users, const std::vector<Gesture>& classes, int reps, std::uint64_t seed) {
  Dataset ds{validate_config({}), {}};
  Rng rng(seed);
  for (int u = 0; u < users; ++u)
    for (auto g : classes)
      for (int r = 0; r < reps; ++r) {
        SampleRecord rec;
        rec.user_id = u;
        rec.gesture = g;
        rec.rep_index = r;
        rec.features.doppler = Matrix(57, 32);
        for (Eigen::Index k = 0; k < rec.features.doppler.size(); ++k)
          rec.features.doppler.data()[k] = 0.5 * rng.normal();
        rec.features.doppler.col(code(g) % 32).array() += 3.0;
        rec.features.ir = Matrix::Zero(57, 2);
        rec.features.ir.col(0).array() = 4.0 * code(g) + rng.normal();
        ds.records.push_back(std::move(rec));
      }
  return ds;
}

std::vector<Gesture> first_classes(int n) {
  std::vector<Gesture> v;
  for (int i = 0; i < n; ++i) v.push_back(static_cast<Gesture>(i));
  return v;
}

ExperimentConfig quick_config() {
  ExperimentConfig c;
  c.pca_components = 8;
  c.forest.n_trees = 15;
  return c;
}

template <typename F>
ErrorCode code_of(F f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::Io;
}

}  // namespace

TEST_CASE("per-class TPR on hand-computed matrices") {
  SECTION("two classes") {
    const auto r = per_class_tpr(ConfusionMatrix::from_counts({{8, 2}, {1, 9}}));
    CHECK(*r.rates[0] == Approx(0.8));
    CHECK(*r.rates[1] == Approx(0.9));
    CHECK(r.macro == Approx(0.85));
  }
  SECTION("three classes, unbalanced") {
    const auto r = per_class_tpr(ConfusionMatrix::from_counts({{3, 1, 0}, {0, 0, 6}, {2, 2, 6}}));
    CHECK(*r.rates[0] == Approx(0.75));
    CHECK(*r.rates[1] == 0.0);
    CHECK(*r.rates[2] == Approx(0.6));
    CHECK(r.macro == Approx((0.75 + 0.0 + 0.6) / 3));
  }
  SECTION("perfect diagonal") {
    const auto r = per_class_tpr(ConfusionMatrix::from_counts({{4, 0, 0}, {0, 1, 0}, {0, 0, 9}}));
    for (const auto& x : r.rates) CHECK(*x == 1.0);
    CHECK(r.macro == 1.0);
  }
  SECTION("absent class is skipped with a warning") {
    auto cm = ConfusionMatrix(std::vector<int>{0, 5, 9});
    cm.add(0, 0, 3);
    cm.add(2, 0, 1);
    cm.add(2, 2, 1);
    const auto r = per_class_tpr(cm);
    CHECK_FALSE(r.rates[1].has_value());
    CHECK(r.included == 2);
    CHECK(r.macro == Approx(0.75));
    REQUIRE(r.warnings.size() == 1);
    CHECK(r.warnings[0].find(std::string(kGestureNames[5])) != std::string::npos);
  }
  SECTION("empty matrix") {
    CHECK(code_of([] { per_class_tpr(ConfusionMatrix(std::vector<int>{0, 1})); }) == ErrorCode::EmptyMatrix);
  }
}

TEST_CASE("constant and random classifiers") {
  for (std::size_t c : {2u, 3u, 7u, 21u}) {
    std::vector<int> codes(c);
    std::iota(codes.begin(), codes.end(), 0);
    ConfusionMatrix cm(codes);
    for (std::size_t i = 0; i < c; ++i) cm.add(i, 1, 6);
    CHECK(per_class_tpr(cm).macro == 1.0 / static_cast<double>(c));
  }
  std::vector<int> codes(21);
  std::iota(codes.begin(), codes.end(), 0);
  ConfusionMatrix cm(codes);
  Rng rng(1);
  for (int n = 0; n < 200000; ++n) cm.add(static_cast<std::size_t>(n % 21), rng.index(21));
  CHECK(per_class_tpr(cm).macro == Approx(1.0 / 21).margin(0.003));
}

TEST_CASE("mean and standard error") {
  const auto m = mean_se({0.2, 0.4, 0.6});
  CHECK(m.mean == Approx(0.4));
  CHECK(m.std_error == Approx(0.2 / std::sqrt(3.0)));
  CHECK(mean_se({0.7}).std_error == 0.0);
}

TEST_CASE("Welch t-test against reference values") {
  const auto r = welch_t_test({0.61, 0.72, 0.55, 0.68, 0.70, 0.64}, {0.41, 0.52, 0.47, 0.39, 0.58});
  CHECK(r.t == Approx(4.045531630229462).epsilon(1e-9));
  CHECK(r.df == Approx(7.7093001039474425).epsilon(1e-9));
  CHECK(r.p_two_sided == Approx(0.004004261777835667).epsilon(1e-6));
  const auto sym = welch_t_test({0.41, 0.52, 0.47, 0.39, 0.58}, {0.61, 0.72, 0.55, 0.68, 0.70, 0.64});
  CHECK(sym.t == Approx(-r.t));
  CHECK(sym.p_two_sided == Approx(r.p_two_sided));
  CHECK(welch_t_test({1, 1}, {1, 1}).p_two_sided == 1.0);
  CHECK(welch_t_test({1, 1}, {2, 2}).p_two_sided == 0.0);
  CHECK(code_of([] { welch_t_test({1}, {1, 2}); }) == ErrorCode::InsufficientSamples);
}

TEST_CASE("Spearman correlation") {
  CHECK(spearman({1, 2, 3, 4, 5}, {2, 1, 4, 3, 5}) == Approx(0.8));
  CHECK(spearman({1, 2, 2, 3}, {1, 3, 2, 4}) == Approx(0.9486832980505139));
  CHECK(spearman({1, 2, 3}, {9, 5, 1}) == Approx(-1.0));
  CHECK(spearman({1, 2, 3}, {4, 4, 4}) == 0.0);
  CHECK(average_ranks({10, 20, 20, 5}) == std::vector<double>{2, 3.5, 3.5, 1});
}

TEST_CASE("leave-one-subject-out splits") {
  const auto ds = fake_dataset(13, first_classes(2), 2, 2);
  const auto folds = split_loso(ds);
  REQUIRE(folds.size() == 13);
  std::multiset<std::size_t> all_test;
  for (const auto& f : folds) {
    CHECK(f.train.size() + f.test.size() == ds.size());
    std::set<std::size_t> tr(f.train.begin(), f.train.end());
    for (auto i : f.test) {
      CHECK_FALSE(tr.count(i));
      CHECK(ds.records[i].user_id == f.user);
      all_test.insert(i);
    }
  }
  CHECK(all_test.size() == ds.size());
  CHECK(std::set<std::size_t>(all_test.begin(), all_test.end()).size() == ds.size());

  CHECK(code_of([] { split_loso(fake_dataset(1, first_classes(2), 2, 2)); }) == ErrorCode::TooFewUsers);
}

TEST_CASE("personalized splits") {
  const auto ds = fake_dataset(3, first_classes(4), 8, 3);
  const auto folds = split_personalized(ds, Rng(4));
  REQUIRE(folds.size() == 15);
  std::map<int, int> per_user;
  for (const auto& f : folds) {
    ++per_user[f.user];
    std::map<int, int> tr, te;
    for (auto i : f.train) {
      CHECK(ds.records[i].user_id == f.user);
      ++tr[code(ds.records[i].gesture)];
    }
    for (auto i : f.test) {
      CHECK(ds.records[i].user_id == f.user);
      ++te[code(ds.records[i].gesture)];
    }
    for (int c = 0; c < 4; ++c) {
      CHECK(te[c] == 3);  // round(0.4 * 8)
      CHECK(std::abs(tr[c] - 0.6 * 8) <= 1.0);
    }
    std::vector<std::size_t> both;
    std::set_intersection(f.train.begin(), f.train.end(), f.test.begin(), f.test.end(), std::back_inserter(both));
    CHECK(both.empty());
  }
  for (const auto& [u, n] : per_user) CHECK(n == 5);
  // Iterations differ from each other.
  CHECK(folds[0].test != folds[1].test);

  SECTION("too few records per class names the offender") {
    auto small = ds;
    std::erase_if(small.records, [](const SampleRecord& r) {
      return r.user_id == 2 && r.gesture == Gesture::FlickUp && r.rep_index >= 4;
    });
    try {
      split_personalized(small, Rng(4));
      FAIL("expected InsufficientSamples");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::InsufficientSamples);
      const std::string msg = e.what();
      CHECK(msg.find("user 2") != std::string::npos);
      CHECK(msg.find(std::string(kGestureNames[2])) != std::string::npos);
    }
  }
}

TEST_CASE("user-calibrated splits") {
  const auto ds = fake_dataset(13, first_classes(2), 5, 5);
  const auto folds = split_user_calibrated(ds, Rng(6));
  REQUIRE(folds.size() == 65);
  const auto pers = split_personalized(ds, Rng(6));
  for (std::size_t k = 0; k < folds.size(); ++k) {
    const auto& f = folds[k];
    CHECK(f.test == pers[k].test);
    std::size_t target_train = 0;
    for (auto i : f.test) CHECK(ds.records[i].user_id == f.user);
    for (auto i : f.train) {
      if (ds.records[i].user_id == f.user) {
        ++target_train;
        CHECK(std::find(f.test.begin(), f.test.end(), i) == f.test.end());
      }
    }
    CHECK(target_train == pers[k].train.size());
    CHECK(f.train.size() == 12 * 10 + target_train);
  }
  CHECK(code_of([] { split_user_calibrated(fake_dataset(1, first_classes(2), 5, 5), Rng(1)); }) ==
        ErrorCode::TooFewUsers);
}

TEST_CASE("experiment reports") {
  const auto ds = fake_dataset(3, first_classes(5), 5, 7);
  const auto cfg = quick_config();

  SECTION("confusion rows match the test counts and bounds hold") {
    for (auto strategy : {Strategy::Loso, Strategy::Personalized, Strategy::UserCalibrated}) {
      const auto rep = run_experiment(ds, Family::Rf, strategy, Modality::Fused, cfg, Rng(8));
      CHECK(rep.complete);
      CHECK(rep.overall_mean >= 0.0);
      CHECK(rep.overall_mean <= 1.0);
      CHECK(rep.std_error >= 0.0);
      CHECK(rep.per_user.size() == 3);
      for (const auto& f : rep.folds) {
        CHECK(f.confusion.total() == static_cast<long>(f.n_test));
        std::map<int, long> want;
        const auto folds = make_folds(ds, strategy, cfg, Rng(8).split(0));
        for (const auto& g : folds)
          if (g.user == f.user && g.iteration == f.iteration)
            for (auto i : g.test) ++want[code(ds.records[i].gesture)];
        for (std::size_t c = 0; c < f.confusion.size(); ++c) CHECK(f.confusion.row_sum(c) == want[f.confusion.classes[c]]);
      }
      // Separable features: the forest should do well.
      CHECK(rep.overall_mean > 0.8);
    }
  }
  SECTION("per-user macro averages the iterations unless pooled") {
    const auto rep = run_experiment(ds, Family::Rf, Strategy::Personalized, Modality::DopplerOnly, cfg, Rng(9));
    for (const auto& u : rep.per_user) {
      double s = 0.0;
      for (const auto& f : rep.folds)
        if (f.user == u.user) s += f.macro;
      CHECK(u.macro == Approx(s / 5));
      CHECK(u.folds == 5);
    }
    auto pooled = cfg;
    pooled.pool_iterations = true;
    const auto rp = run_experiment(ds, Family::Rf, Strategy::Personalized, Modality::DopplerOnly, pooled, Rng(9));
    for (const auto& u : rp.per_user) CHECK(u.macro == Approx(per_class_tpr(u.confusion).macro));
  }
  SECTION("report bytes are reproducible") {
    const auto a = report_json(run_experiment(ds, Family::Svm, Strategy::Loso, Modality::Fused, cfg, Rng(10))).dump(2);
    const auto b = report_json(run_experiment(ds, Family::Svm, Strategy::Loso, Modality::Fused, cfg, Rng(10))).dump(2);
    auto par = cfg;
    par.jobs = 3;
    const auto c = report_json(run_experiment(ds, Family::Svm, Strategy::Loso, Modality::Fused, par, Rng(10))).dump(2);
    CHECK(a == b);
    CHECK(a == c);
    CHECK(a.find("\"strategy\": \"loso\"") != std::string::npos);
  }
  SECTION("text and CSV renderings") {
    const auto rep = run_experiment(ds, Family::Rf, Strategy::Loso, Modality::IrOnly, cfg, Rng(11));
    const auto txt = report_text(rep);
    CHECK(txt.find("modality ir-only") != std::string::npos);
    CHECK(txt.find("mean ") != std::string::npos);
    const auto csv = confusion_csv(rep.per_user[0].confusion);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);
    CHECK(csv.rfind("true\\pred,", 0) == 0);
  }
  SECTION("a failing fold marks the report incomplete") {
    Fold bad;
    bad.user = 0;
    bad.train = {0};  // normalization needs two records
    bad.test = {1, 2};
    const auto r = run_fold(ds, bad, eval::detail::class_codes(ds), Family::Rf, Modality::Fused, cfg, Rng(12));
    CHECK(r.failed);
    CHECK(r.error.find("InsufficientSamples") != std::string::npos);
  }
}

TEST_CASE("no fitted stage sees a test record") {
  const auto ds = fake_dataset(2, first_classes(3), 5, 13);
  const auto classes = eval::detail::class_codes(ds);
  const auto cfg = quick_config();
  std::vector<std::size_t> train_idx, test_idx;
  for (std::size_t i = 0; i < ds.size(); ++i) (ds.records[i].user_id == 0 ? train_idx : test_idx).push_back(i);
  const auto train = ds.subset(train_idx);
  const auto p = fit_pipeline(train, classes, Family::Rf, Modality::Fused, cfg, Rng(14));
  for (const auto& r : ds.records) {
    const bool in_train = r.user_id == 0;
    CHECK(p.norm.was_fitted_on(dsp::record_key(r)) == in_train);
    CHECK(p.pca->was_fitted_on(dsp::record_key(r)) == in_train);
  }
  CHECK_NOTHROW(predict_pipeline(p, ds.subset(test_idx)));
  CHECK(code_of([&] { predict_pipeline(p, ds.subset({test_idx[0], train_idx[3]})); }) == ErrorCode::Leakage);

  Fold leaky;
  leaky.train = train_idx;
  leaky.test = {train_idx[0], test_idx[0]};
  CHECK(code_of([&] { run_fold(ds, leaky, classes, Family::Rf, Modality::Fused, cfg, Rng(15)); }) ==
        ErrorCode::Leakage);
}

TEST_CASE("convolutional pipeline drops the unused branch") {
  const auto ds = fake_dataset(2, first_classes(3), 5, 16);
  auto cfg = quick_config();
  cfg.train.max_epochs = 2;
  const auto classes = eval::detail::class_codes(ds);
  const auto ir_only = fit_pipeline(ds, classes, Family::M1, Modality::IrOnly, cfg, Rng(17));
  const auto dop_only = fit_pipeline(ds, classes, Family::M1, Modality::DopplerOnly, cfg, Rng(17));
  CHECK_FALSE(ir_only.net->spec.use_doppler);
  CHECK(ir_only.net->spec.use_ir);
  CHECK(dop_only.net->spec.use_doppler);
  CHECK_FALSE(dop_only.net->spec.use_ir);
  CHECK(nn::parameter_count(ir_only.net->spec) < nn::parameter_count(dop_only.net->spec));
}

TEST_CASE("training curve and reduced sets") {
  const auto ds = fake_dataset(3, first_classes(21), 5, 18);
  const auto cfg = quick_config();
  SECTION("five rows, calibration share grows") {
    const auto tc = training_curve(ds, Family::Rf, Modality::DopplerOnly, cfg, Rng(19));
    REQUIRE(tc.points.size() == 5);
    CHECK(tc.points.front().fraction == 0.1);
    CHECK(tc.points.back().fraction == 0.5);
    CHECK(tc.complete);
    const auto folds = split_personalized(ds, Rng(1), 1, 0.5);
    std::map<int, int> per_class;
    for (auto i : folds[0].train) ++per_class[code(ds.records[i].gesture)];
    for (const auto& [c, n] : per_class) {
      CHECK(n >= 2);
      CHECK(n <= 3);
    }
  }
  SECTION("gaming and generic sets") {
    const auto gaming = evaluate_reduced(ds, GestureSetId::Gaming, Family::Rf, Modality::Fused, cfg, Rng(20));
    CHECK(gaming.classes.size() == 4);
    CHECK(gaming.per_user[0].confusion.size() == 4);
    CHECK(gaming.strategy == Strategy::UserCalibrated);
    const auto generic = evaluate_reduced(ds, GestureSetId::Generic, Family::Rf, Modality::Fused, cfg, Rng(20));
    CHECK(generic.classes.size() == 7);
  }
}

TEST_CASE("tuning objective") {
  const auto ds = fake_dataset(3, first_classes(3), 5, 21);
  auto cfg = quick_config();
  cfg.train.max_epochs = 2;
  const auto groups = split_user_groups(ds, 3);
  REQUIRE(groups.size() == 3);
  for (const auto& g : groups) {
    CHECK(g.test.size() == 15);
    CHECK(g.train.size() == 30);
  }
  CHECK(code_of([&] { split_user_groups(ds, 4); }) == ErrorCode::TooFewUsers);
  CHECK(code_of([&] { tuning_objective(ds, Family::Rf, Modality::Fused, cfg); }) == ErrorCode::InvalidArgument);
  const auto obj = tuning_objective(ds, Family::M1, Modality::Fused, cfg);
  const double s = obj(nn::HyperParams{}, 5);
  CHECK(s >= 0.0);
  CHECK(s <= 1.0);
  CHECK(obj(nn::HyperParams{}, 5) == s);
}
