#pragma once

// Filter design and sample-rate conversion primitives behind the preprocessing chain.

#include <array>
#include <complex>
#include <optional>
#include <span>
#include <vector>

namespace neurosleep::dsp {

// One second-order section, a0 normalised to 1.
struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0;
  double a1 = 0, a2 = 0;
};

struct SosFilter {
  std::vector<Biquad> sections;

  // Complex frequency response at freq_hz for sampling rate fs.
  std::complex<double> response(double freq_hz, double fs) const;
};

// Digital Butterworth band-pass from an order-`order` analog prototype (2*order poles),
// bilinear transform with pre-warped band edges. Unit gain at the geometric centre.
SosFilter butter_bandpass(int order, double lo_hz, double hi_hz, double fs);

// Steady-state section states for a unit step input (cascade-scaled).
std::vector<std::array<double, 2>> sosfilt_zi(const SosFilter& filter);

// Causal filtering with initial states zi * x0 where x0 = initial_scale.
std::vector<double> sosfilt(const SosFilter& filter, std::span<const double> x,
                            const std::vector<std::array<double, 2>>* zi = nullptr,
                            double initial_scale = 0.0);

// Forward-backward filtering with odd reflection padding of padlen samples per side.
std::vector<double> sosfiltfilt(const SosFilter& filter, std::span<const double> x,
                                std::size_t padlen);

struct Ratio {
  int up = 1;
  int down = 1;
};

// Reduced p/q with |p/q - target/source| <= 1e-12 relative and p, q <= max_factor.
std::optional<Ratio> rational_ratio(double target, double source, int max_factor);

// Polyphase resampling by up/down using a Kaiser-windowed sinc low-pass with
// taps_per_phase taps per output phase (per-phase DC gain normalised to 1) and odd
// reflection beyond both ends. Output length is round(n * up / down).
std::vector<double> resample_poly(std::span<const double> x, int up, int down,
                                  int taps_per_phase = 64, double kaiser_beta = 5.0);

}  // namespace neurosleep::dsp
