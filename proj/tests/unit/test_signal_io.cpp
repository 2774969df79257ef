#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "neurosleep/binary_io.hpp"
#include "neurosleep/dsp.hpp"
#include "neurosleep/errors.hpp"
#include "neurosleep/signal_io.hpp"

using namespace neurosleep;

namespace {

// Closed-form squared magnitude of a bilinear Butterworth band-pass with pre-warped edges.
double butter_bp_mag2(int order, double lo, double hi, double fs, double f) {
  const double wl = std::tan(std::numbers::pi * lo / fs);
  const double wh = std::tan(std::numbers::pi * hi / fs);
  const double w = std::tan(std::numbers::pi * f / fs);
  const double q = (w * w - wl * wh) / (w * (wh - wl));
  return 1.0 / (1.0 + std::pow(q * q, order));
}

std::vector<double> sine(double f, double fs, std::size_t n, double amp = 1.0) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = amp * std::sin(2 * std::numbers::pi * f * static_cast<double>(i) / fs);
  return x;
}

}  // namespace

TEST_CASE("nsig round trip keeps float32 samples and metadata") {
  Recording r;
  r.fs = 256;
  r.channel = "EEG Fpz-Cz";
  r.subject_id = "S7";
  r.samples = {0.1, -2.5, 1e3, 3.25};
  const auto back = decode_nsig(encode_nsig(r));
  CHECK(back.fs == 256);
  CHECK(back.channel == "EEG Fpz-Cz");
  CHECK(back.subject_id == "S7");
  REQUIRE(back.samples.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(back.samples[i] == static_cast<double>(static_cast<float>(r.samples[i])));
}

TEST_CASE("nsig truncation is reported with a byte offset") {
  Recording r;
  r.fs = 100;
  r.samples.assign(10, 1.0);
  std::string bytes = encode_nsig(r);
  bytes.resize(bytes.size() - 6);
  try {
    decode_nsig(bytes);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("offset") != std::string::npos);
  }
  CHECK_THROWS_AS(decode_nsig("NSIX"), FormatError);
  CHECK_THROWS_AS(decode_nsig(encode_nsig(r) + "x"), FormatError);
}

TEST_CASE("labels csv round trip and rejection") {
  const auto dir = std::filesystem::temp_directory_path() / "ns_labels_test";
  std::filesystem::create_directories(dir);
  EpochLabels l;
  l.labels = {Stage::W, Stage::N2, Stage::REM};
  save_labels(l, dir / "a.csv");
  CHECK(load_labels(dir / "a.csv").labels == l.labels);
  io::write_file(dir / "b.csv", "epoch_index,stage\n0,5\n");
  CHECK_THROWS_AS(load_labels(dir / "b.csv"), FormatError);
  io::write_file(dir / "c.csv", "epoch_index,stage\n1,0\n");
  CHECK_THROWS_AS(load_labels(dir / "c.csv"), FormatError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("butterworth band-pass matches the analog prototype magnitude") {
  for (double fs : {100.0, 200.0, 256.0}) {
    const auto f = dsp::butter_bandpass(4, 0.5, 35.0, fs);
    for (double hz : {0.1, 0.5, 1.0, 4.18, 10.0, 30.0, 35.0, 45.0}) {
      if (hz >= fs / 2) continue;
      const double got = std::norm(f.response(hz, fs));
      CHECK(got == doctest::Approx(butter_bp_mag2(4, 0.5, 35.0, fs, hz)).epsilon(1e-9));
    }
  }
}

TEST_CASE("zero-phase filtering squares the gain") {
  const double fs = 100;
  Recording r;
  r.fs = fs;
  r.samples = sine(35.0, fs, 6000);
  const auto y = bandpass(r).samples;
  double peak = 0;
  for (std::size_t i = 2000; i < 4000; ++i) peak = std::max(peak, std::abs(y[i]));
  CHECK(peak == doctest::Approx(0.5).epsilon(0.02));  // -3 dB each way
}

TEST_CASE("resampling keeps an in-band tone") {
  Recording r;
  r.fs = 200;
  r.samples = sine(5.0, 200, 4000, 2.0);
  const auto y = resample(r, 100);
  REQUIRE(y.samples.size() == 2000);
  const auto ref = sine(5.0, 100, 2000, 2.0);
  for (std::size_t i = 200; i < 1800; ++i) CHECK(y.samples[i] == doctest::Approx(ref[i]).epsilon(1e-3).scale(2.0));
  CHECK(dsp::rational_ratio(100, 256, 1000)->up == 25);
  CHECK(dsp::rational_ratio(100, 256, 1000)->down == 64);
  CHECK_THROWS_AS(resample(r, 100 * std::numbers::pi), ParameterError);
}

TEST_CASE("segment_epochs drops the partial tail") {
  Recording r;
  r.fs = 100;
  r.samples.assign(7000, 0.0);
  const auto s = segment_epochs(r);
  CHECK(s.slices.size() == 2);
  CHECK(s.samples_per_epoch == 3000);
  CHECK(s.dropped_samples == 1000);
}

TEST_CASE("synth_signal is seeded and rejects bad specs") {
  SynthSpec spec;
  spec.components = {{10.0, 1.0, 5.0}};
  spec.noise_amplitude = 1.0;
  spec.seed = 3;
  CHECK(synth_signal(spec).samples == synth_signal(spec).samples);
  spec.duration_s = 31;
  CHECK_THROWS_AS(synth_signal(spec), ParameterError);
  spec.duration_s = 30;
  spec.components[0].center_hz = 60;
  CHECK_THROWS_AS(synth_signal(spec), ParameterError);
}
