#include <doctest.h>

#include <cmath>
#include <random>

#include "neurosleep/dataset.hpp"
#include "neurosleep/encoder.hpp"
#include "neurosleep/errors.hpp"

using namespace neurosleep;

TEST_CASE("delta modulation hand trace") {
  const std::vector<double> x{0, 2.5, 2.5, 0.4, 0.4, 0.4};
  const std::vector<double> theta(6, 1.0);
  const auto dm = delta_modulate(x, theta, 0.0);
  const std::vector<std::int8_t> want{0, 1, 1, -1, 0, 0};
  CHECK(dense_view(dm.events, 6) == want);
  CHECK(dm.r.back() == 1.0);
  const std::vector<double> r_want{0, 0, 1, 2, 1, 1, 1};
  CHECK(dm.r == r_want);
}

TEST_CASE("a difference exactly equal to the threshold fires") {
  const std::vector<double> x{1.0, -1.0};
  const std::vector<double> theta{1.0, 2.0};
  const auto dm = delta_modulate(x, theta, 0.0);
  CHECK(dense_view(dm.events, 2) == std::vector<std::int8_t>{1, -1});
}

TEST_CASE("thresholds are applied at binary32 precision") {
  const std::vector<double> x{0.1};
  const std::vector<double> theta{0.1};
  const auto dm = delta_modulate(x, theta, 0.0);
  // float(0.1) > 0.1, so the event does not fire.
  CHECK(dm.events.empty());
  CHECK_THROWS_AS(delta_modulate(x, std::vector<double>{0.0}, 0.0), ParameterError);
}

TEST_CASE("local_sigma matches a direct windowed computation") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(3.0, 2.0);
  std::vector<double> x(500);
  for (auto& v : x) v = g(rng);
  const std::size_t w = 37;
  const auto s = local_sigma(x, w, 1e-6);
  for (std::size_t t = 0; t < x.size(); ++t) {
    const std::size_t lo = t + 1 >= w ? t + 1 - w : 0;
    double mean = 0;
    for (std::size_t i = lo; i <= t; ++i) mean += x[i];
    mean /= static_cast<double>(t - lo + 1);
    double var = 0;
    for (std::size_t i = lo; i <= t; ++i) var += (x[i] - mean) * (x[i] - mean);
    const double want = std::max(1e-6, std::sqrt(var / static_cast<double>(t - lo + 1)));
    CHECK(s[t] == doctest::Approx(want).epsilon(1e-9));
  }
}

TEST_CASE("decode replays the encoder references bit for bit") {
  const auto corpus = synthetic_standard_corpus(3, 30, 2);
  for (const auto& rec : corpus) {
    const auto st = encode_ramsdm(rec.samples, EncoderConfig{});
    const auto dec = decode(st, st.r0_slow);
    CHECK(dec.r_slow == st.r_slow);
    CHECK(dec.r_fast == st.r_fast);
    const auto xhat = reconstruct(st);
    for (std::size_t t = 0; t < st.length; ++t) CHECK(xhat[t] == st.r_slow[t] + st.r_fast[t]);
    const auto back = decode_nevt(encode_nevt(st));
    CHECK(back.slow_events == st.slow_events);
    CHECK(back.fast_events == st.fast_events);
    CHECK(reconstruct(back) == xhat);
  }
}

TEST_CASE("constant input produces no events") {
  for (double level : {0.0, 3.0, -1234.567}) {
    const std::vector<double> x(3000, level);
    const auto st = encode_ramsdm(x, EncoderConfig{});
    CHECK(st.event_count() == 0);
    CHECK(event_density(st).combined == 0.0);
  }
}

TEST_CASE("fast scale is denser than slow on EEG-like input") {
  const auto corpus = synthetic_standard_corpus(4, 60, 9);
  for (const auto& rec : corpus) {
    const auto d = event_density(encode_ramsdm(rec.samples, EncoderConfig{}));
    CHECK(d.combined > 0.0);
    CHECK(d.combined < 1.0);
    CHECK(d.fast >= d.slow);
  }
}

TEST_CASE("malformed event lists are rejected") {
  MultiScaleEventStream st;
  st.length = 4;
  st.fs = 100;
  st.slow_events = {Event{2, 1, 1.0f, Scale::slow}, Event{1, 1, 1.0f, Scale::slow}};
  CHECK_THROWS_AS(decode(st, 0.0), FormatError);
  st.slow_events = {Event{5, 1, 1.0f, Scale::slow}};
  CHECK_THROWS_AS(decode(st, 0.0), FormatError);
  st.slow_events = {Event{0, 1, -1.0f, Scale::slow}};
  CHECK_THROWS_AS(decode(st, 0.0), FormatError);
  std::string bytes = encode_nevt(encode_ramsdm(std::vector<double>{0, 1, 2, 3}, EncoderConfig{}));
  CHECK_THROWS_AS(decode_nevt(bytes.substr(0, bytes.size() - 1)), FormatError);
}

TEST_CASE("encoder config validation") {
  EncoderConfig c;
  c.k_fast = c.k_slow;
  CHECK_THROWS_AS(c.validate(), ParameterError);
  c = {};
  c.sigma_window = 1;
  CHECK_THROWS_AS(c.validate(), ParameterError);
}
