#include <cmath>
#include <numbers>
#include <random>

#include "neurosleep/errors.hpp"
#include "neurosleep/signal_io.hpp"

namespace neurosleep {

Recording synth_signal(const SynthSpec& spec) {
  if (!(spec.fs > 0)) throw ParameterError("synth: fs must be > 0");
  if (!(spec.duration_s > 0)) throw ParameterError("synth: duration must be > 0");
  const double epochs = spec.duration_s / kEpochSeconds;
  if (std::abs(epochs - std::round(epochs)) > 1e-9) {
    throw ParameterError("synth: duration must be a multiple of 30 s");
  }
  for (const auto& c : spec.components) {
    if (!(c.center_hz > 0) || c.center_hz >= spec.fs / 2) {
      throw ParameterError("synth: component frequency must lie in (0, fs/2)");
    }
    if (c.bandwidth_hz < 0) throw ParameterError("synth: negative bandwidth");
  }
  if (spec.noise_amplitude < 0) throw ParameterError("synth: negative noise amplitude");

  const auto n = static_cast<std::size_t>(std::llround(spec.duration_s * spec.fs));
  Recording rec;
  rec.fs = spec.fs;
  rec.channel = spec.channel;
  rec.subject_id = spec.subject_id;
  rec.samples.assign(n, 0.0);

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 2.0 * std::numbers::pi);

  for (const auto& c : spec.components) {
    // Phase diffusion with rate 2*pi*bw rad^2/s gives a Lorentzian line of FWHM bw.
    const double step = 2.0 * std::numbers::pi * c.center_hz / spec.fs;
    const double jitter = std::sqrt(2.0 * std::numbers::pi * c.bandwidth_hz / spec.fs);
    double phase = uniform(rng);
    for (std::size_t t = 0; t < n; ++t) {
      rec.samples[t] += c.amplitude * std::cos(phase);
      phase += step + jitter * gauss(rng);
    }
  }
  if (spec.noise_amplitude > 0) {
    for (double& v : rec.samples) v += spec.noise_amplitude * gauss(rng);
  }
  return rec;
}

}  // namespace neurosleep
