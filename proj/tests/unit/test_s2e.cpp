#include <doctest.h>

#include "neurosleep/errors.hpp"
#include "neurosleep/s2e.hpp"

using namespace neurosleep;

namespace {

MultiScaleEventStream stream_with(std::size_t length, std::vector<Event> slow, std::vector<Event> fast = {}) {
  MultiScaleEventStream st;
  st.length = length;
  st.fs = 100;
  st.slow_events = std::move(slow);
  st.fast_events = std::move(fast);
  return st;
}

}  // namespace

TEST_CASE("event at 95 s lands in epoch 3 anchored at 105 s") {
  CHECK(epoch_index_of(95.0) == 3);
  CHECK(epoch_index_of(0.0) == 0);
  CHECK(epoch_index_of(30.0) == 1);
  const auto a = assign_epochs(stream_with(12000, {Event{9500, 1, 1.0f, Scale::slow}}));
  REQUIRE(a.epochs.size() == 4);
  CHECK(a.epochs[3].anchor_s == 105.0);
  REQUIRE(a.epochs[3].events.size() == 1);
  CHECK(a.epochs[3].events[0].sample_index == 500);
  for (int e = 0; e < 3; ++e) CHECK(a.epochs[static_cast<std::size_t>(e)].events.empty());
}

TEST_CASE("events in the trailing partial epoch are dropped") {
  const auto a = assign_epochs(stream_with(6500, {Event{100, 1, 1.0f, Scale::slow}, Event{6200, -1, 1.0f, Scale::slow}}));
  CHECK(a.epochs.size() == 2);
  CHECK(a.dropped_events == 1);
  CHECK(a.samples_per_epoch == 3000);
}

TEST_CASE("one missing epoch flips exactly one mask bit") {
  const std::vector<double> contiguous{15, 45, 75, 105};
  CHECK(validity_mask(contiguous) == std::vector<std::uint8_t>{1, 1, 1, 1});
  const std::vector<double> gap{15, 45, 105, 135};
  CHECK(validity_mask(gap) == std::vector<std::uint8_t>{1, 1, 0, 1});
}

TEST_CASE("gap tolerance boundary is inclusive") {
  CHECK(validity_mask(std::vector<double>{15.0, 45.1}, 30.0, 0.1) == std::vector<std::uint8_t>{1, 1});
  CHECK(validity_mask(std::vector<double>{15.0, 44.9}, 30.0, 0.1) == std::vector<std::uint8_t>{1, 1});
  CHECK(validity_mask(std::vector<double>{15.0, 45.2}, 30.0, 0.1) == std::vector<std::uint8_t>{1, 0});
  CHECK(validity_mask(std::vector<double>{}).empty());
}

TEST_CASE("batch from kept epochs carries the gap into the mask") {
  const auto a = assign_epochs(stream_with(15000, {}));
  const std::vector<std::size_t> keep{0, 1, 3, 4};
  const auto b = build_epoch_batch(a, keep);
  CHECK(b.mask == std::vector<std::uint8_t>{1, 1, 0, 1});
  CHECK(b.epoch_indices == keep);
  CHECK(b.t_b == 3000);
  const std::vector<std::size_t> unordered{1, 0};
  CHECK_THROWS_AS(build_epoch_batch(a, unordered), ParameterError);
}

TEST_CASE("rasterize and raster_events are inverse") {
  EpochGroup g;
  g.epoch_index = 0;
  g.events = {Event{0, 1, 1.0f, Scale::slow}, Event{0, -1, 1.0f, Scale::fast}, Event{7, -1, 1.0f, Scale::slow}};
  const auto r = rasterize(g, 10);
  CHECK(r.at(0, 0) == 1.0f);
  CHECK(r.at(1, 0) == -1.0f);
  CHECK(r.at(0, 7) == -1.0f);
  CHECK(r.nonzero() == 3);
  const auto ev = raster_events(r);
  REQUIRE(ev.size() == 3);
  CHECK(ev[0].sample_index == 0);
  CHECK(ev[0].scale == Scale::slow);
  CHECK(ev[1].scale == Scale::fast);
  CHECK(ev[2].sample_index == 7);
  CHECK(ev[2].polarity == -1);

  g.events.push_back(Event{7, 1, 1.0f, Scale::slow});
  CHECK_THROWS_AS(rasterize(g, 10), FormatError);
  g.events = {Event{10, 1, 1.0f, Scale::slow}};
  CHECK_THROWS_AS(rasterize(g, 10), FormatError);
}

TEST_CASE("dense raster is z-scored in both rows") {
  const std::vector<double> x{1, 2, 3, 4};
  const auto r = dense_raster(x);
  CHECK(r.dense);
  double mean = 0, ss = 0;
  for (std::size_t t = 0; t < 4; ++t) {
    CHECK(r.at(0, t) == r.at(1, t));
    mean += r.at(0, t);
    ss += r.at(0, t) * r.at(0, t);
  }
  CHECK(mean == doctest::Approx(0.0).scale(1.0));
  CHECK(ss / 4 == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("manifest csv lists every epoch") {
  const auto b = build_epoch_batch(assign_epochs(stream_with(6000, {Event{1, 1, 1.0f, Scale::fast}})));
  CHECK(batch_manifest_csv(b) == "epoch_index,anchor_s,mask,n_events_slow,n_events_fast\n0,15,1,0,1\n1,45,1,0,0\n");
}
