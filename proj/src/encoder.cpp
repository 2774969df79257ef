#include "neurosleep/encoder.hpp"

#include <algorithm>
#include <cmath>

#include "neurosleep/binary_io.hpp"
#include "neurosleep/errors.hpp"

namespace neurosleep {

namespace {

constexpr std::string_view kNevtMagic = "NEVT";
constexpr std::uint16_t kNevtVersion = 1;

double population_std(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(x.size()));
}

void replay(std::span<const Event> events, Scale scale, std::vector<double>& r, std::size_t length) {
  const double r0 = r.front();
  r.assign(length + 1, 0.0);
  r[0] = r0;
  std::size_t next = 0;
  for (std::size_t t = 0; t < length; ++t) {
    double step = 0.0;
    if (next < events.size() && events[next].sample_index == t) {
      const Event& ev = events[next];
      if (ev.scale != scale) throw FormatError("decode: event on the wrong scale list");
      step = static_cast<double>(ev.polarity) * static_cast<double>(ev.step_size);
      ++next;
    }
    r[t + 1] = r[t] + step;
  }
  if (next != events.size()) throw FormatError("decode: events beyond stream length");
}

void check_order(std::span<const Event> events, std::size_t length) {
  for (std::size_t i = 0; i < events.size(); ++i) {
    const Event& ev = events[i];
    if (i > 0 && ev.sample_index <= events[i - 1].sample_index) {
      throw FormatError("decode: events out of order at position " + std::to_string(i));
    }
    if (ev.sample_index >= length) throw FormatError("decode: event index beyond stream length");
    if (ev.polarity != 1 && ev.polarity != -1) throw FormatError("decode: polarity must be +1/-1");
    if (!(ev.step_size > 0.0f) || !std::isfinite(ev.step_size)) {
      throw FormatError("decode: step size must be positive and finite");
    }
  }
}

}  // namespace

void EncoderConfig::validate() const {
  if (!(k_slow > 0) || !(k_fast > 0)) throw ParameterError("encoder: k factors must be > 0");
  if (!(k_fast < k_slow)) throw ParameterError("encoder: k_fast must be < k_slow");
  if (sigma_window < 2) throw ParameterError("encoder: sigma_window must be >= 2");
  if (sigma_floor && !(*sigma_floor > 0)) throw ParameterError("encoder: sigma_floor must be > 0");
  if (!(sigma_floor_rel > 0)) throw ParameterError("encoder: sigma_floor_rel must be > 0");
}

std::vector<double> local_sigma(std::span<const double> x, std::size_t window, double floor) {
  if (window < 2) throw ParameterError("local_sigma: window must be >= 2");
  if (!(floor > 0)) throw ParameterError("local_sigma: floor must be > 0");
  std::vector<double> out(x.size());
  for (std::size_t t = 0; t < x.size(); ++t) {
    const std::size_t start = t + 1 >= window ? t + 1 - window : 0;
    out[t] = std::max(floor, population_std(x.subspan(start, t - start + 1)));
  }
  return out;
}

double effective_sigma_floor(std::span<const double> x, const EncoderConfig& cfg) {
  if (cfg.sigma_floor) return *cfg.sigma_floor;
  // The magnitude term keeps thresholds above the binary32 rounding of r0 on flat input.
  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::abs(v));
  return std::max({kMinSigmaFloor, kFloorMagnitudeRel * peak, cfg.sigma_floor_rel * population_std(x)});
}

DeltaModulation delta_modulate(std::span<const double> x, std::span<const double> theta, double r0,
                               Scale scale) {
  if (x.size() != theta.size()) throw ParameterError("delta_modulate: x and theta lengths differ");
  DeltaModulation out;
  out.r.resize(x.size() + 1);
  out.r[0] = r0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    const float th32 = static_cast<float>(theta[t]);
    if (!(th32 > 0.0f) || !std::isfinite(th32)) {
      throw ParameterError("delta_modulate: theta must be positive at index " + std::to_string(t));
    }
    const double th = th32;
    const double d = x[t] - out.r[t];
    std::int8_t s = 0;
    if (d >= th) {
      s = 1;
    } else if (d <= -th) {
      s = -1;
    }
    double step = 0.0;
    if (s != 0) {
      out.events.push_back(Event{t, s, th32, scale});
      step = static_cast<double>(s) * th;
    }
    out.r[t + 1] = out.r[t] + step;
  }
  return out;
}

MultiScaleEventStream encode_ramsdm(std::span<const double> x, const EncoderConfig& cfg, double fs) {
  cfg.validate();
  const auto sigma = local_sigma(x, cfg.sigma_window, effective_sigma_floor(x, cfg));
  return encode_ramsdm(x, cfg, fs, sigma);
}

MultiScaleEventStream encode_ramsdm(std::span<const double> x, const EncoderConfig& cfg, double fs,
                                    std::span<const double> sigma_x) {
  cfg.validate();
  if (sigma_x.size() != x.size()) throw InternalError("encode_ramsdm: sigma length mismatch");
  for (double v : x) {
    if (!std::isfinite(v)) throw ParameterError("encode_ramsdm: non-finite input");
  }
  MultiScaleEventStream out;
  out.length = x.size();
  out.fs = fs;
  const double r0 =
      (cfg.r_init == RInitPolicy::first_sample && !x.empty()) ? static_cast<float>(x[0]) : 0.0;
  out.r0_slow = r0;

  std::vector<double> theta(x.size());
  for (std::size_t t = 0; t < x.size(); ++t) theta[t] = cfg.k_slow * sigma_x[t];
  auto slow = delta_modulate(x, theta, r0, Scale::slow);

  std::vector<double> residual(x.size());
  for (std::size_t t = 0; t < x.size(); ++t) residual[t] = x[t] - slow.r[t];

  if (cfg.fast_sigma == FastSigmaSource::residual) {
    const auto sigma_e =
        local_sigma(residual, cfg.sigma_window, effective_sigma_floor(x, cfg));
    for (std::size_t t = 0; t < x.size(); ++t) theta[t] = cfg.k_fast * sigma_e[t];
  } else {
    for (std::size_t t = 0; t < x.size(); ++t) theta[t] = cfg.k_fast * sigma_x[t];
  }
  auto fast = delta_modulate(residual, theta, 0.0, Scale::fast);

  out.slow_events = std::move(slow.events);
  out.fast_events = std::move(fast.events);
  out.r_slow = std::move(slow.r);
  out.r_fast = std::move(fast.r);
  return out;
}

ReferenceSeries decode(const MultiScaleEventStream& stream, double r0_slow) {
  check_order(stream.slow_events, stream.length);
  check_order(stream.fast_events, stream.length);
  ReferenceSeries out;
  out.r_slow = {r0_slow};
  out.r_fast = {0.0};
  replay(stream.slow_events, Scale::slow, out.r_slow, stream.length);
  replay(stream.fast_events, Scale::fast, out.r_fast, stream.length);
  return out;
}

std::vector<double> reconstruct(const MultiScaleEventStream& stream) {
  const std::vector<double>* rs = &stream.r_slow;
  const std::vector<double>* rf = &stream.r_fast;
  ReferenceSeries decoded;
  if (rs->empty() || rf->empty()) {
    decoded = decode(stream, stream.r0_slow);
    rs = &decoded.r_slow;
    rf = &decoded.r_fast;
  }
  if (rs->size() != stream.length + 1 || rf->size() != stream.length + 1) {
    throw InternalError("reconstruct: reference length does not match stream length");
  }
  std::vector<double> xhat(stream.length);
  for (std::size_t t = 0; t < stream.length; ++t) xhat[t] = (*rs)[t] + (*rf)[t];
  return xhat;
}

EventDensity event_density(const MultiScaleEventStream& stream) {
  if (stream.length == 0) throw ParameterError("event_density: empty stream");
  const auto T = static_cast<double>(stream.length);
  EventDensity d;
  d.slow = static_cast<double>(stream.slow_events.size()) / T;
  d.fast = static_cast<double>(stream.fast_events.size()) / T;
  d.combined = static_cast<double>(stream.event_count()) / (2.0 * T);
  return d;
}

std::vector<std::int8_t> dense_view(std::span<const Event> events, std::size_t length) {
  std::vector<std::int8_t> s(length, 0);
  for (const Event& ev : events) {
    if (ev.sample_index >= length) throw FormatError("dense_view: event beyond length");
    s[ev.sample_index] = ev.polarity;
  }
  return s;
}

std::string encode_nevt(const MultiScaleEventStream& stream) {
  std::vector<Event> all;
  all.reserve(stream.event_count());
  all.insert(all.end(), stream.slow_events.begin(), stream.slow_events.end());
  all.insert(all.end(), stream.fast_events.begin(), stream.fast_events.end());
  std::stable_sort(all.begin(), all.end(), [](const Event& a, const Event& b) {
    return a.sample_index != b.sample_index ? a.sample_index < b.sample_index : a.scale < b.scale;
  });

  io::ByteWriter w;
  w.put_bytes(kNevtMagic);
  w.put<std::uint16_t>(kNevtVersion);
  w.put<double>(stream.fs);
  w.put<std::uint64_t>(stream.length);
  w.put<float>(static_cast<float>(stream.r0_slow));
  w.put<std::uint64_t>(all.size());
  for (const Event& ev : all) {
    w.put<std::uint64_t>(ev.sample_index);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(ev.scale));
    w.put<std::int8_t>(ev.polarity);
    w.put<float>(ev.step_size);
  }
  return w.take();
}

MultiScaleEventStream decode_nevt(std::string_view bytes) {
  io::ByteReader r(bytes, "NEVT");
  if (r.get_bytes(4) != kNevtMagic) r.fail_at(0, "bad magic");
  const auto version = r.get<std::uint16_t>();
  if (version != kNevtVersion) r.fail_at(4, "unsupported version " + std::to_string(version));
  MultiScaleEventStream s;
  s.fs = r.get<double>();
  s.length = r.get<std::uint64_t>();
  s.r0_slow = r.get<float>();
  const auto count = r.get<std::uint64_t>();
  constexpr std::size_t kRecord = 8 + 1 + 1 + 4;
  if (r.remaining() / kRecord < count) {
    r.fail_at(r.offset() + kRecord * (r.remaining() / kRecord),
              "truncated: header declares " + std::to_string(count) + " events");
  }
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::size_t at = r.offset();
    Event ev;
    ev.sample_index = r.get<std::uint64_t>();
    const auto scale = r.get<std::uint8_t>();
    ev.polarity = r.get<std::int8_t>();
    ev.step_size = r.get<float>();
    if (scale > 1) r.fail_at(at + 8, "scale must be 0 or 1");
    if (ev.polarity != 1 && ev.polarity != -1) r.fail_at(at + 9, "polarity must be +1/-1");
    if (!(ev.step_size > 0.0f) || !std::isfinite(ev.step_size)) r.fail_at(at + 10, "bad step size");
    if (ev.sample_index >= s.length) r.fail_at(at, "event index beyond stream length");
    ev.scale = static_cast<Scale>(scale);
    (ev.scale == Scale::slow ? s.slow_events : s.fast_events).push_back(ev);
  }
  if (!r.at_end()) r.fail("trailing bytes after declared events");
  auto refs = decode(s, s.r0_slow);
  s.r_slow = std::move(refs.r_slow);
  s.r_fast = std::move(refs.r_fast);
  return s;
}

void save_events(const MultiScaleEventStream& stream, const std::filesystem::path& path) {
  io::write_file(path, encode_nevt(stream));
}

MultiScaleEventStream load_events(const std::filesystem::path& path) {
  try {
    return decode_nevt(io::read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace neurosleep
