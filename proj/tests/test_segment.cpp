#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "airware/random.hpp"
#include "airware/segment.hpp"

using namespace airware;
using Catch::Approx;

namespace {

const PipelineConfig kCfg = validate_config({});

// Tones centred on the two bins beside the carrier, stepping up by
// `step_db` at `t_step`.
Waveform sideband_step(double step_db, double t_step, double duration_s = 4.5) {
  Waveform w;
  const auto n = static_cast<std::size_t>(duration_s * w.sample_rate_hz);
  const double bin = kCfg.bin_hz();
  const double gain = std::pow(10.0, step_db / 20.0);
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / w.sample_rate_hz;
    const double a = 0.01 * (t >= t_step ? gain : 1.0);
    w.samples[i] = a * (std::sin(2 * std::numbers::pi * (kCfg.carrier_hz - bin) * t) +
                        std::sin(2 * std::numbers::pi * (kCfg.carrier_hz + bin) * t));
  }
  return w;
}

Waveform ramp(double seconds) {
  Waveform w;
  w.samples.resize(static_cast<std::size_t>(seconds * w.sample_rate_hz));
  for (std::size_t i = 0; i < w.samples.size(); ++i) w.samples[i] = static_cast<double>(i);
  return w;
}

}  // namespace

TEST_CASE("energy detector threshold on synthetic steps") {
  const auto fires = [](double step_db) {
    const auto spec = dsp::stft(sideband_step(step_db, 2.0), kCfg);
    return seg::detect_energy_event(spec, 10.0, 2.5);
  };
  const auto hi = fires(12.0);
  REQUIRE(hi.size() == 1);
  CHECK(hi[0].kind == seg::TriggerKind::Energy);
  CHECK(std::abs(hi[0].time_s - 2.0) < 4096.0 / 48000.0);
  CHECK(fires(8.0).empty());
  CHECK(fires(0.0).empty());
}

TEST_CASE("energy detector on a hand-built spectrogram") {
  dsp::Spectrogram spec;
  spec.carrier_bin = 10;
  spec.window = 4096;
  spec.sample_rate_hz = 48000;
  spec.frame_hop_s = 2048.0 / 48000;
  spec.magnitudes_db = Matrix::Constant(40, 21, -60.0);

  SECTION("fires once per step, first qualifying frame") {
    spec.magnitudes_db.block(15, 9, 25, 3).array() += 12.0;
    const auto t = seg::detect_energy_event(spec, 10.0, 2.5);
    REQUIRE(t.size() == 1);
    CHECK(t[0].time_s == Approx(spec.frame_time(15)));
  }
  SECTION("one side only contributes half the rise") {
    spec.magnitudes_db.block(15, 9, 25, 1).array() += 12.0;
    CHECK(seg::detect_energy_event(spec, 10.0, 2.5).empty());
  }
  SECTION("refractory period suppresses a second rise") {
    spec.magnitudes_db.block(5, 9, 2, 3).array() += 15.0;
    spec.magnitudes_db.block(20, 9, 2, 3).array() += 15.0;
    CHECK(seg::detect_energy_event(spec, 10.0, 2.5).size() == 1);
    CHECK(seg::detect_energy_event(spec, 10.0, 0.1).size() == 2);
  }
  SECTION("the carrier bin itself is ignored") {
    spec.magnitudes_db.col(10).array() += 40.0;
    CHECK(seg::detect_energy_event(spec, 10.0, 2.5).empty());
  }
}

TEST_CASE("IR-triggered windows") {
  const auto wave = ramp(6.0);
  SECTION("single event centres a 2.5 s window") {
    const auto segs = seg::segment_by_ir(wave, {{3.0, 50, 90}}, kCfg);
    REQUIRE(segs.size() == 1);
    CHECK(segs[0].start_s == Approx(1.75));
    CHECK(segs[0].samples.size() == 120000);
    CHECK(segs[0].samples.front() == 1.75 * 48000);
    CHECK(segs[0].samples.back() == 4.25 * 48000 - 1);
    REQUIRE(segs[0].ir.size() == 1);
    CHECK(segs[0].ir[0].time_s == Approx(1.25));
  }
  SECTION("events 0.5 s apart merge at the first") {
    const auto segs = seg::segment_by_ir(wave, {{3.0, 50, 90}, {3.5, 60, 80}}, kCfg);
    REQUIRE(segs.size() == 1);
    CHECK(segs[0].trigger.time_s == 3.0);
    CHECK(segs[0].ir.size() == 2);
  }
  SECTION("events further apart than half a window split") {
    CHECK(seg::segment_by_ir(wave, {{1.5, 50, 90}, {4.0, 60, 80}}, kCfg).size() == 2);
  }
  SECTION("edges are zero padded") {
    const auto segs = seg::segment_by_ir(wave, {{0.25, 50, 90}, {5.9, 50, 90}}, kCfg);
    REQUIRE(segs.size() == 2);
    CHECK(segs[0].samples.size() == 120000);
    CHECK(segs[0].samples[0] == 0.0);
    CHECK(segs[0].samples[48000] == 0.0);  // stream sample 0
    CHECK(segs[0].samples[48001] == 1.0);
    CHECK(segs[1].samples.back() == 0.0);
  }
}

TEST_CASE("free-form segmentation") {
  const auto quiet = sideband_step(0.0, 10.0);
  SECTION("IR only matches segment_by_ir") {
    const IrStream ir{{2.0, 40, 100}};
    const auto a = seg::segment_by_ir(quiet, ir, kCfg);
    const auto b = seg::segment_freeform(quiet, ir, kCfg);
    REQUIRE(a.size() == b.size());
    CHECK(a[0].samples == b[0].samples);
    CHECK(a[0].trigger == b[0].trigger);
  }
  SECTION("energy only gives one segment") {
    const auto segs = seg::segment_freeform(sideband_step(12.0, 2.0), {}, kCfg);
    REQUIRE(segs.size() == 1);
    CHECK(segs[0].trigger.kind == seg::TriggerKind::Energy);
    CHECK(segs[0].samples.size() == 120000);
  }
  SECTION("coincident triggers keep the IR kind") {
    const auto segs = seg::segment_freeform(sideband_step(12.0, 2.0), {{2.02, 40, 100}}, kCfg);
    REQUIRE(segs.size() == 1);
    CHECK(segs[0].trigger.kind == seg::TriggerKind::Ir);
    CHECK(segs[0].trigger.time_s == 2.02);
  }
}

TEST_CASE("merge_triggers prefers IR on ties") {
  using seg::TriggerKind;
  const auto m = seg::merge_triggers({{1.0, TriggerKind::Energy}, {1.0, TriggerKind::Ir}, {1.2, TriggerKind::Energy}}, 1.25);
  REQUIRE(m.size() == 1);
  CHECK(m[0] == seg::SegmentTrigger{1.0, TriggerKind::Ir});
}

TEST_CASE("segmentation invariants on random streams") {
  Rng rng(31);
  const auto wave = ramp(8.0);
  for (int trial = 0; trial < 200; ++trial) {
    IrStream ir;
    const int n = static_cast<int>(rng.uniform_int(0, 6));
    for (int i = 0; i < n; ++i) ir.push_back({rng.uniform(0.0, 8.0), rng.uniform(0.0, 100.0), rng.uniform(0.0, 360.0)});
    std::sort(ir.begin(), ir.end(), [](const IrEvent& a, const IrEvent& b) { return a.time_s < b.time_s; });
    const auto by_ir = seg::segment_by_ir(wave, ir, kCfg);
    const auto free = seg::segment_freeform(wave, ir, kCfg);
    for (const auto& s : by_ir) {
      REQUIRE(s.samples.size() == kCfg.segment_samples());
      for (const auto& e : s.ir) {
        CHECK(e.time_s >= 0.0);
        CHECK(e.time_s < 2.5);
      }
      // The first IR event of a cluster sits at the window centre.
      CHECK(std::abs(s.start_s + kCfg.buffer_half_len_s - s.trigger.time_s) <= 0.5 / 48000);
    }
    for (const auto& s : free) REQUIRE(s.samples.size() == kCfg.segment_samples());
    // IR triggers survive in the free-form output.
    for (const auto& s : by_ir) {
      bool found = false;
      for (const auto& f : free) found |= std::abs(f.trigger.time_s - s.trigger.time_s) <= kCfg.buffer_half_len_s;
      CHECK(found);
    }
  }
}
