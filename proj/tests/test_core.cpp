#include <catch_amalgamated.hpp>

#include <filesystem>
#include <set>
#include <sstream>

#include "airware/config.hpp"
#include "airware/dataset.hpp"
#include "airware/dataset_io.hpp"
#include "airware/gesture.hpp"
#include "airware/model_io.hpp"
#include "airware/parallel.hpp"
#include "airware/random.hpp"
#include "test_util.hpp"

using namespace airware;

TEST_CASE("gesture codes are a bijection onto 21 names") {
  std::set<std::string_view> names;
  for (std::size_t i = 0; i < kGestureCount; ++i) {
    const auto g = gesture_from_code(static_cast<int>(i));
    CHECK(code(g) == static_cast<int>(i));
    CHECK(parse_gesture(to_string(g)) == g);
    names.insert(to_string(g));
  }
  CHECK(names.size() == 21);
  CHECK_FALSE(parse_gesture("wave").has_value());
  CHECK_THROWS_AS(gesture_from_code(21), Error);
}

TEST_CASE("gesture set membership") {
  using G = Gesture;
  CHECK(gesture_set_members(GestureSetId::Full).size() == 21);
  CHECK(gesture_set_members(GestureSetId::Generic).size() == 7);
  CHECK(gesture_set_members(GestureSetId::Mapping).size() == 7);
  CHECK(gesture_set_members(GestureSetId::Gaming) == std::vector<G>{G::SliceLeft, G::SliceRight, G::Whip, G::Snap});

  std::set<int> uni;
  for (auto id : {GestureSetId::Generic, GestureSetId::Mapping, GestureSetId::Gaming}) {
    const auto m = gesture_set_members(id);
    CHECK(std::is_sorted(m.begin(), m.end(), [](G a, G b) { return code(a) < code(b); }));
    for (auto g : m) uni.insert(code(g));
  }
  CHECK(uni.size() == 16);
  for (auto id : {GestureSetId::Full, GestureSetId::Generic, GestureSetId::Mapping, GestureSetId::Gaming})
    CHECK(parse_gesture_set(to_string(id)) == id);
}

TEST_CASE("validate_config derives hop and carrier bin") {
  const auto cfg = validate_config({});
  CHECK(cfg.hop == 2048);
  CHECK(cfg.carrier_bin() == 1536);
  CHECK(cfg.carrier_bin_exact() == 1536.0);
  CHECK(cfg.frames_per_segment() == 57);
  CHECK(cfg.segment_samples() == 120000);

  PipelineConfig q;
  q.stft_overlap = 0.75;
  CHECK(validate_config(q).hop == 1024);
  CHECK(validate_config(validate_config(q)) == validate_config(q));
}

TEST_CASE("validate_config reports every violation") {
  PipelineConfig c;
  c.carrier_hz = 25000;
  try {
    validate_config(c);
    FAIL("expected NyquistViolation");
  } catch (const ConfigError& e) {
    CHECK(e.code() == ErrorCode::NyquistViolation);
  }

  PipelineConfig g;
  g.stft_window = 512;
  g.stft_overlap = 0.3;
  try {
    validate_config(g);
    FAIL("expected GridViolation");
  } catch (const ConfigError& e) {
    CHECK(e.code() == ErrorCode::GridViolation);
    CHECK(e.issues().size() == 2);
  }
  g.allow_off_grid = true;
  CHECK_NOTHROW(validate_config(g));
}

TEST_CASE("every grid point validates") {
  for (auto w : kGridWindows)
    for (auto o : kGridOverlaps)
      for (auto b : kGridHalfWidths) {
        PipelineConfig c;
        c.stft_window = w;
        c.stft_overlap = o;
        c.band_half_width = b;
        const auto v = validate_config(c);
        CHECK(v.hop == static_cast<std::size_t>(std::llround(w * (1 - o))));
        CHECK(v.frames_per_segment() > 0);
      }
}

TEST_CASE("config text round trip") {
  PipelineConfig c;
  c.stft_window = 2048;
  c.stft_overlap = 0.25;
  c.rng_seed = 99;
  c.pooled_doppler_norm = false;
  std::istringstream in(format_config(c));
  CHECK(parse_config(in) == c);

  std::istringstream bad("stft_window = 4096\ncolour = blue\n");
  CHECK_THROWS_AS(parse_config(bad), Error);
}

TEST_CASE("dataset manifest counts and duplicate detection") {
  auto ds = test::tiny_dataset(3, 2, {Gesture::Tap, Gesture::Snap});
  const auto m = ds.manifest();
  REQUIRE(m.size() == 3);
  for (const auto& [u, counts] : m) {
    CHECK(counts[code(Gesture::Tap)] == 2);
    CHECK(counts[code(Gesture::Snap)] == 2);
    CHECK(counts[code(Gesture::Whip)] == 0);
  }
  CHECK(ds.users() == std::vector<int>{1, 2, 3});
  CHECK_NOTHROW(check_dataset(ds));
  ds.records.push_back(ds.records.front());
  CHECK_THROWS_AS(check_dataset(ds), Error);
}

TEST_CASE("filter_classes keeps member classes only") {
  const auto ds = test::tiny_dataset(2, 3, {Gesture::Tap, Gesture::Snap, Gesture::Whip});
  const auto f = filter_classes(ds, {Gesture::Snap});
  CHECK(f.size() == 6);
  for (const auto& r : f.records) CHECK(r.gesture == Gesture::Snap);
}

TEST_CASE("rng streams are reproducible and independent") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a() == b());
  const Rng base(7);
  Rng s1 = base.split(1), s1b = base.split(1), s2 = base.split(2);
  const auto x = s1();
  CHECK(x == s1b());
  CHECK(x != s2());
  Rng r(3);
  for (int i = 0; i < 1000; ++i) {
    const auto v = r.uniform_int(-2, 2);
    CHECK(v >= -2);
    CHECK(v <= 2);
  }
}

TEST_CASE("parallel_for output does not depend on worker count") {
  const Rng base(11);
  auto run = [&](std::size_t jobs) {
    std::vector<double> out(64);
    parallel_for(out.size(), jobs, [&](std::size_t i) {
      Rng r = base.split(i);
      out[i] = r.normal();
    });
    return out;
  };
  CHECK(run(1) == run(4));
  CHECK_THROWS_AS(parallel_for(8, 3, [](std::size_t i) {
                    if (i == 5) throw std::runtime_error("boom");
                  }),
                  std::runtime_error);
}

TEST_CASE("model section round trip") {
  io::Section s;
  s.type = "demo";
  s.set("name", "x y");
  s.set_num("pi", 3.25);
  s.blobs.push_back({"w", false, 2, 3, {1, 2, 3, 4, 5, 6.5}});
  s.blobs.push_back({"v", true, 1, 2, {0.1, -1e-300}});
  std::stringstream buf;
  io::write_sections(buf, {s});
  const auto back = io::read_sections(buf);
  REQUIRE(back.size() == 1);
  CHECK(back[0].get("name") == "x y");
  CHECK(back[0].num("pi") == 3.25);
  CHECK(back[0].blob("w").data == s.blobs[0].data);
  CHECK(back[0].blob("v").data == s.blobs[1].data);
  CHECK_THROWS_AS(back[0].get("missing"), Error);

  std::stringstream junk("not a model\n");
  CHECK_THROWS_AS(io::read_sections(junk), Error);
}

TEST_CASE("dataset directory round trip") {
  const auto dir = test::temp_dir("core_io");
  auto ds = test::tiny_dataset(2, 2, {Gesture::Tap, Gesture::Circle});
  // Values exactly representable in float32 survive the trip unchanged.
  for (auto& r : ds.records) {
    r.features.doppler.array() = r.features.doppler.array().round() / 4.0;
    r.features.ir.array() = r.features.ir.array().round() / 4.0;
  }
  io::save_dataset(dir, ds);
  CHECK(std::filesystem::exists(dir / "manifest.json"));
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir / "records")) ++files;
  CHECK(files == ds.size());

  const auto back = io::load_dataset(dir).dataset;
  REQUIRE(back.size() == ds.size());
  CHECK(back.config == ds.config);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(back.records[i].gesture == ds.records[i].gesture);
    CHECK(back.records[i].user_id == ds.records[i].user_id);
    CHECK(back.records[i].features.doppler == ds.records[i].features.doppler);
    CHECK(back.records[i].features.ir == ds.records[i].features.ir);
  }
  CHECK_THROWS_AS(io::load_dataset(dir, true), Error);
  CHECK_THROWS_AS(io::load_dataset(dir / "nope"), Error);
}
