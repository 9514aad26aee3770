#include <catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <set>
#include <sstream>

#include "airware/nn/network.hpp"
#include "airware/nn/serialize.hpp"
#include "airware/nn/train.hpp"
#include "gradcheck.hpp"

using namespace airware;
using namespace airware::nn;
using Catch::Approx;

namespace {

using namespace airware::gradcheck;

NetworkSpec tiny_spec(ModelId m, std::size_t frames = 4, std::size_t bins = 3, std::size_t classes = 3) {
  NetworkSpec s;
  s.model = m;
  s.frames = frames;
  s.bins = bins;
  s.n_classes = classes;
  s.hp.n_filters = 8;
  s.hp.kernel_size = 2;
  s.hp.hidden_units = 32;
  s.hp.dropout = 0.0;
  s.mlp_hidden = {5, 4};
  return s;
}

}  // namespace

TEST_CASE("conv1d forward matches a direct sum") {
  Rng rng(1);
  const std::size_t T = 6, cin = 3, cout = 2;
  for (std::size_t K : {2, 3, 5}) {
    Conv1D<double> conv(T, cin, cout, K);
    randomize(conv, rng);
    const MatD x = random_mat(2, T * cin, rng);
    const MatD y = conv.forward(x, false, nullptr);
    const long pad = static_cast<long>((K - 1) / 2);
    for (Eigen::Index n = 0; n < 2; ++n)
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t o = 0; o < cout; ++o) {
          double s = conv.bias().value(0, static_cast<Eigen::Index>(o));
          for (std::size_t k = 0; k < K; ++k) {
            const long src = static_cast<long>(t + k) - pad;
            if (src < 0 || src >= static_cast<long>(T)) continue;
            for (std::size_t c = 0; c < cin; ++c)
              s += x(n, src * static_cast<long>(cin) + static_cast<long>(c)) *
                   conv.weight().value(static_cast<Eigen::Index>(k * cin + c), static_cast<Eigen::Index>(o));
          }
          CHECK(y(n, static_cast<Eigen::Index>(t * cout + o)) == Approx(s).margin(1e-12));
        }
  }
}

TEST_CASE("layer gradients match central differences") {
  std::set<std::string> kinds;
  for (std::uint64_t seed = 1; seed <= 10; ++seed)
    for (const auto& r : layer_suite(seed)) {
      INFO(r.what << " seed " << seed);
      CHECK(r.error < 1e-4);
      kinds.insert(r.what.substr(0, r.what.find(' ')));
    }
  CHECK(kinds == std::set<std::string>{"conv1d", "conv2d", "maxpool1d", "maxpool2d", "dense", "relu", "tanh", "dropout",
                                       "softmax-ce"});
}

TEST_CASE("whole-network gradients on tiny nets") {
  for (auto m : {ModelId::M1, ModelId::M2, ModelId::M3, ModelId::M4, ModelId::Mlp}) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      Rng rng(seed);
      auto spec = tiny_spec(m, 4, m == ModelId::Mlp ? 6 : 3, 2);
      spec.hp.l2 = 0.01;
      spec.hp.initializer = Initializer::GlorotNormal;
      auto net = build_network<double>(spec, rng);
      for (auto* p : net.params()) p->value = random_mat(p->value.rows(), p->value.cols(), rng) * 0.5;
      MatD xd = random_mat(3, static_cast<Eigen::Index>(net.doppler_dim()), rng);
      MatD xi = random_mat(3, static_cast<Eigen::Index>(net.ir_dim()), rng);
      const std::vector<int> y{0, 1, 1};
      loss_and_grads(net, xd, xi, y);
      std::vector<MatD> analytic;
      for (auto* p : net.params()) analytic.push_back(p->grad);
      const auto f = [&] { return loss_and_grads(net, xd, xi, y); };
      auto ps = net.params();
      for (std::size_t i = 0; i < ps.size(); ++i) {
        INFO(to_string(m) << " seed " << seed << " param " << i << " " << ps[i]->name);
        const MatD num = numeric_grad(ps[i]->value, f);
        CHECK(rel_error(analytic[i], num) < 1e-4);
      }
    }
  }
}

TEST_CASE("max-pool routes gradient to the argmax only") {
  MaxPool1D<double> p(5, 1);
  MatD x(1, 5);
  x << 1, 5, 2, -1, 3;
  const MatD y = p.forward(x, false, nullptr);
  REQUIRE(y.cols() == 3);
  CHECK(y(0, 0) == 5);
  CHECK(y(0, 1) == 2);
  CHECK(y(0, 2) == 3);
  MatD g(1, 3);
  g << 10, 20, 30;
  const MatD dx = p.backward(g);
  MatD expect(1, 5);
  expect << 0, 10, 20, 0, 30;
  CHECK(dx == expect);

  MaxPool2D<double> q(2, 2, 1);
  MatD z(1, 4);
  z << 1, 4, 3, 2;
  CHECK(q.forward(z, false, nullptr)(0, 0) == 4);
  MatD g2(1, 1);
  g2 << 7;
  MatD e2(1, 4);
  e2 << 0, 7, 0, 0;
  CHECK(q.backward(g2) == e2);
}

TEST_CASE("dropout") {
  Dropout<double> d(1000, 0.3);
  Rng rng(5);
  const MatD x = MatD::Constant(100, 1000, 2.0);
  CHECK(d.forward(x, false, &rng) == x);
  const MatD y = d.forward(x, true, &rng);
  const double zeros = static_cast<double>((y.array() == 0).count()) / static_cast<double>(y.size());
  CHECK(zeros == Approx(0.3).margin(0.02));
  CHECK(y.mean() == Approx(2.0).margin(0.05));
  CHECK_THROWS_AS(Dropout<double>(10, 1.0), Error);
}

TEST_CASE("initializer variances") {
  Rng rng(11);
  const auto he = init_weights(Initializer::HeNormal, {200, 500}, rng);
  double s = 0, s2 = 0;
  for (double v : he.data) {
    s += v;
    s2 += v * v;
  }
  const double n = static_cast<double>(he.size());
  CHECK(s2 / n - (s / n) * (s / n) == Approx(0.01).epsilon(0.1));

  const auto gu = init_weights(Initializer::GlorotUniform, {100, 100}, rng);
  const double bound = std::sqrt(6.0 / 200.0);
  double mx = 0;
  for (double v : gu.data) mx = std::max(mx, std::abs(v));
  CHECK(mx <= bound);
  CHECK(mx > 0.99 * bound);

  for (int i = 0; i < 6; ++i) {
    const auto init = static_cast<Initializer>(i);
    CHECK(parse_initializer(to_string(init)) == init);
    const auto t = init_weights(init, {100, 1000}, rng);
    double m = 0;
    for (double v : t.data) m += v;
    m /= static_cast<double>(t.size());
    const double sd = std::sqrt(init_variance(init, fans_of({100, 1000})));
    INFO(to_string(init));
    CHECK(std::abs(m) < 3 * sd / std::sqrt(static_cast<double>(t.size())));
    CHECK(t.valid());
  }
  CHECK_THROWS_AS(fans_of({5}), Error);
}

TEST_CASE("forward contract") {
  Rng rng(2);
  auto spec = tiny_spec(ModelId::M3, 57, 32, 21);
  auto net = build_network<double>(spec, rng);
  MatD xd = random_mat(4, 57 * 32, rng), xi = random_mat(4, 57 * 2, rng);
  xd.row(3) = xd.row(2);
  xi.row(3) = xi.row(2);
  const MatD p = net.probabilities(xd, xi);
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    CHECK(p.row(i).sum() == Approx(1.0).margin(1e-6));
    CHECK(p.row(i).minCoeff() >= 0.0);
  }
  // GEMM blocking may round rows at different positions differently.
  CHECK((p.row(2) - p.row(3)).cwiseAbs().maxCoeff() < 1e-12);

  for (auto* q : net.params()) q->value.setZero();
  const MatD u = net.probabilities(xd, xi);
  CHECK((u.array() - 1.0 / 21).abs().maxCoeff() < 1e-12);

  CHECK_THROWS_AS(net.probabilities(random_mat(2, 10, rng), xi.topRows(2)), Error);
}

TEST_CASE("loss terms") {
  MatD z(1, 2);
  z << 100, 0;
  CHECK(softmax_cross_entropy(z, {0}) < 1e-30);
  CHECK(softmax_cross_entropy(z, {1}) == Approx(100.0));

  Rng rng(3);
  auto spec = tiny_spec(ModelId::M1);
  spec.hp.l2 = 0.0;
  auto net = build_network<double>(spec, rng);
  const MatD xd = random_mat(2, 12, rng), xi = random_mat(2, 8, rng);
  const double ce = softmax_cross_entropy(net.logits(xd, xi, false, nullptr), {0, 2});
  CHECK(loss_and_grads(net, xd, xi, {0, 2}) == Approx(ce).epsilon(1e-12));

  // Decay touches the conv weights only.
  spec.hp.l2 = 0.5;
  Rng rng2(3);
  auto net2 = build_network<double>(spec, rng2);
  double reg = 0;
  for (auto* p : net2.params())
    if (p->name.find("conv") != std::string::npos && p->name.ends_with(".w")) reg += 0.5 * p->value.squaredNorm();
    else CHECK(p->l2 == 0.0);
  CHECK(loss_and_grads(net2, xd, xi, {0, 2}) == Approx(ce + reg).epsilon(1e-12));
}

TEST_CASE("architecture table and parameter counts") {
  // Hand counts for frames 4, bins 3, 3 classes, 8 filters, kernel 2, 32 hidden.
  const std::vector<std::pair<ModelId, std::size_t>> manual = {
      {ModelId::M1, 1773}, {ModelId::M2, 3885}, {ModelId::M3, 4021}, {ModelId::M4, 1885}};
  for (const auto& [m, count] : manual) {
    Rng rng(1);
    const auto spec = tiny_spec(m);
    auto net = build_network<double>(spec, rng);
    INFO(to_string(m));
    CHECK(parameter_count(spec) == count);
    CHECK(net.parameter_count() == count);
  }
  auto mlp = tiny_spec(ModelId::Mlp, 1, 10, 3);
  Rng rng(1);
  CHECK(parameter_count(mlp) == 94);
  CHECK(build_network<double>(mlp, rng).parameter_count() == 94);

  for (auto m : {ModelId::M1, ModelId::M2, ModelId::M3, ModelId::M4}) {
    auto spec = tiny_spec(m, 57, 32, 21);
    spec.hp.dropout = 0.2;
    auto net = build_network<double>(spec, rng);
    const auto arch = architecture(m);
    REQUIRE(net.spectro().size() == static_cast<std::size_t>(3 * arch.spectro_convs));
    for (std::size_t i = 0; i < net.spectro().size(); i += 3) {
      CHECK(net.spectro().layer(i).kind() == (arch.conv2d ? "conv2d" : "conv1d"));
      CHECK(net.spectro().layer(i + 1).kind() == "relu");
      CHECK(net.spectro().layer(i + 2).kind() == (arch.conv2d ? "maxpool2d" : "maxpool1d"));
    }
    CHECK(net.ir().size() == 3);
    CHECK(net.ir().layer(0).kind() == "conv1d");
    CHECK(net.ir().layer(2).kind() == "maxpool1d");
    CHECK(net.head().size() == static_cast<std::size_t>(3 * arch.dense_layers + 1));
    CHECK(net.head().layer(net.head().size() - 1).kind() == "dense");
    CHECK(parameter_count(spec) == net.parameter_count());
  }
  CHECK(architecture(ModelId::M3).spectro_convs == 3);
  CHECK(architecture(ModelId::M3).dense_layers == 4);
  CHECK(architecture(ModelId::M2).dense_layers == 4);
  CHECK(architecture(ModelId::M4).conv2d);
}

TEST_CASE("hyperparameter validation") {
  HyperParams h;
  CHECK_NOTHROW(validate_hparams(h));
  h.n_filters = 12;
  CHECK_THROWS_AS(validate_hparams(h), Error);
  h = {};
  h.lr_exponent = 1;
  CHECK_THROWS_AS(validate_hparams(h), Error);
  h = {};
  h.dropout = 0.995;
  CHECK_THROWS_AS(validate_hparams(h), Error);
  h = {};
  h.kernel_size = 4;
  CHECK_THROWS_AS(validate_hparams(h), Error);
  h = {};
  h.hidden_units = 100;
  CHECK_THROWS_AS(validate_hparams(h), Error);
  CHECK(HyperParams{}.learning_rate() == Approx(0.01));
}

TEST_CASE("temporal shift augmentation") {
  Rng rng(4);
  FeatureTensor ft{random_mat(57, 32, rng).cast<double>(), random_mat(57, 2, rng).cast<double>()};
  const auto same = augment_shift(ft, 0.0, rng);
  CHECK(same.doppler == ft.doppler);
  CHECK(same.ir == ft.ir);
  CHECK(max_shift_frames(57, 0.10) == 5);

  int differ = 0;
  for (int i = 0; i < 1000; ++i) {
    long od = 0, oi = 0;
    const auto s = augment_shift(ft, 0.10, rng, &od, &oi);
    REQUIRE(std::abs(od) <= 5);
    REQUIRE(std::abs(oi) <= 5);
    differ += od != oi;
    if (od > 0) {
      CHECK(s.doppler.row(od) == ft.doppler.row(0));
      CHECK(s.doppler.topRows(od).isZero());
    }
  }
  CHECK(differ > 500);
}

TEST_CASE("training") {
  // Two classes separated by the sign of one Doppler column.
  const std::size_t F = 4, B = 3;
  Rng data_rng(6);
  std::vector<FeatureTensor> feats;
  std::vector<int> labels;
  for (int i = 0; i < 80; ++i) {
    const int y = i % 2;
    FeatureTensor f{Matrix(F, B), Matrix::Zero(F, 2)};
    for (Eigen::Index k = 0; k < f.doppler.size(); ++k) f.doppler.data()[k] = 0.3 * data_rng.normal();
    f.doppler.col(1).array() += y ? 1.5 : -1.5;
    feats.push_back(f);
    labels.push_back(y);
  }
  std::vector<const FeatureTensor*> ptrs;
  for (const auto& f : feats) ptrs.push_back(&f);
  const auto ts = make_train_set(ptrs, labels);
  auto spec = tiny_spec(ModelId::M1, F, B, 2);
  spec.hp.lr_exponent = -2;
  TrainConfig cfg;
  cfg.max_epochs = 200;
  cfg.val_frac = 0.0;
  cfg.shift_frac = 0.0;
  cfg.batch_size = 16;

  SECTION("separable toy reaches 99%") {
    Rng rng(1);
    const auto model = train(spec, ts, cfg, rng);
    const auto pred = predict(model, ts.doppler, ts.ir);
    double hit = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == labels[i];
    CHECK(hit / static_cast<double>(pred.size()) >= 0.99);
  }
  SECTION("same seed, same parameters") {
    cfg.max_epochs = 5;
    cfg.val_frac = 0.2;
    cfg.shift_frac = 0.1;
    spec.hp.dropout = 0.3;
    Rng a(9), b(9);
    const auto ma = train(spec, ts, cfg, a);
    const auto mb = train(spec, ts, cfg, b);
    REQUIRE(ma.params.size() == mb.params.size());
    for (std::size_t i = 0; i < ma.params.size(); ++i) CHECK(ma.params[i] == mb.params[i]);
  }
  SECTION("early stopping keeps the best validation epoch") {
    cfg.val_frac = 0.25;
    cfg.patience = 3;
    Rng rng(2);
    const auto m = train(spec, ts, cfg, rng);
    CHECK(m.best_epoch >= 1);
    CHECK(m.epochs_run <= cfg.max_epochs);
    CHECK(std::isfinite(m.best_val_loss));
  }
  SECTION("non-finite loss raises DivergenceError") {
    auto bad = ts;
    bad.doppler(0, 0) = std::numeric_limits<double>::quiet_NaN();
    Rng rng(3);
    try {
      train(spec, bad, cfg, rng);
      FAIL("expected DivergenceError");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::DivergenceError);
    }
  }
  SECTION("serialized model predicts identically") {
    cfg.max_epochs = 3;
    Rng rng(4);
    const auto m = train(spec, ts, cfg, rng);
    std::stringstream buf;
    io::write_sections(buf, {to_section(m)});
    const auto back = from_section(io::read_sections(buf).at(0));
    CHECK(back.spec == m.spec);
    CHECK(predict_proba(back, ts.doppler, ts.ir) == predict_proba(m, ts.doppler, ts.ir));

    auto s = to_section(m);
    s.blobs.pop_back();
    CHECK_THROWS_AS(from_section(s), Error);
  }
}
