#pragma once

// Residual adaptive multi-scale delta modulation: a coarse delta modulator on the signal,
// a sensitive one on the unexplained residual, with thresholds proportional to the causal
// local standard deviation.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace neurosleep {

enum class RInitPolicy : std::uint8_t { first_sample, zero };

// Which series the fast-scale threshold's local deviation is measured on.
enum class FastSigmaSource : std::uint8_t { signal, residual };

struct EncoderConfig {
  double k_slow = 1.6;
  double k_fast = 1.0;
  std::size_t sigma_window = 100;       // samples (1 s at 100 Hz)
  std::optional<double> sigma_floor;    // absolute; unset -> sigma_floor_rel * global std
  double sigma_floor_rel = 1e-3;
  RInitPolicy r_init = RInitPolicy::first_sample;
  FastSigmaSource fast_sigma = FastSigmaSource::signal;

  void validate() const;
};

enum class Scale : std::uint8_t { slow = 0, fast = 1 };

struct Event {
  std::uint64_t sample_index = 0;
  std::int8_t polarity = 1;  // +1 / -1
  float step_size = 0.0f;    // threshold at firing time
  Scale scale = Scale::slow;

  friend bool operator==(const Event&, const Event&) = default;
};

struct MultiScaleEventStream {
  std::vector<Event> slow_events;
  std::vector<Event> fast_events;
  std::size_t length = 0;  // T time steps
  double fs = 0.0;
  double r0_slow = 0.0;
  // Reference series of length T + 1; r(t) is the value before the update at step t.
  std::vector<double> r_slow;
  std::vector<double> r_fast;

  std::size_t event_count() const { return slow_events.size() + fast_events.size(); }
};

struct DeltaModulation {
  std::vector<Event> events;
  std::vector<double> r;  // T + 1 entries, r[0] = r0
};

// Lowest absolute floor used when the relative floor would vanish (constant input).
inline constexpr double kMinSigmaFloor = 1e-9;
inline constexpr double kFloorMagnitudeRel = 1e-6;  // x max|x|

// max(floor, population std of x over [max(0, t-W+1), t]) for every t.
std::vector<double> local_sigma(std::span<const double> x, std::size_t window, double floor);

// Floor actually applied for x under cfg.
double effective_sigma_floor(std::span<const double> x, const EncoderConfig& cfg);

// Closed-loop delta modulation with one event per step at most. Thresholds are rounded to
// binary32 before use so the stored step sizes replay the reference exactly.
DeltaModulation delta_modulate(std::span<const double> x, std::span<const double> theta, double r0,
                               Scale scale = Scale::slow);

MultiScaleEventStream encode_ramsdm(std::span<const double> x, const EncoderConfig& cfg,
                                    double fs = 100.0);
// Same, reusing a local_sigma series already computed for x under cfg.
MultiScaleEventStream encode_ramsdm(std::span<const double> x, const EncoderConfig& cfg, double fs,
                                    std::span<const double> sigma_x);

struct ReferenceSeries {
  std::vector<double> r_slow;
  std::vector<double> r_fast;
};

// Replays both event lists. Throws FormatError if events are out of order or malformed.
ReferenceSeries decode(const MultiScaleEventStream& stream, double r0_slow);

// x_hat(t) = r_slow(t) + r_fast(t) for t in [0, T). Decodes when references are absent.
std::vector<double> reconstruct(const MultiScaleEventStream& stream);

struct EventDensity {
  double combined = 0.0;  // nonzero entries of the 2 x T raster / 2T
  double slow = 0.0;
  double fast = 0.0;
};

EventDensity event_density(const MultiScaleEventStream& stream);

// Dense ternary view s(t) of one event list.
std::vector<std::int8_t> dense_view(std::span<const Event> events, std::size_t length);

// ---- NEVT container ---------------------------------------------------------

std::string encode_nevt(const MultiScaleEventStream& stream);
// Reference series are regenerated by decode().
MultiScaleEventStream decode_nevt(std::string_view bytes);
void save_events(const MultiScaleEventStream& stream, const std::filesystem::path& path);
MultiScaleEventStream load_events(const std::filesystem::path& path);

}  // namespace neurosleep
