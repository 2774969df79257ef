#include "neurosleep/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "neurosleep/errors.hpp"

namespace neurosleep::dsp {

namespace {

using cplx = std::complex<double>;

cplx section_response(const Biquad& s, cplx zinv) {
  const cplx num = s.b0 + zinv * (s.b1 + zinv * s.b2);
  const cplx den = 1.0 + zinv * (s.a1 + zinv * s.a2);
  return num / den;
}

double reflect_odd(std::span<const double> x, long m) {
  const long n = static_cast<long>(x.size());
  if (n == 1) return x[0];
  // Odd (point) reflection about the end samples; offsets beyond one reflection are clamped.
  if (m < 0) {
    const long k = std::min(-m, n - 1);
    return 2.0 * x[0] - x[static_cast<std::size_t>(k)];
  }
  if (m >= n) {
    const long k = std::min(m - (n - 1), n - 1);
    return 2.0 * x[static_cast<std::size_t>(n - 1)] - x[static_cast<std::size_t>(n - 1 - k)];
  }
  return x[static_cast<std::size_t>(m)];
}

}  // namespace

cplx SosFilter::response(double freq_hz, double fs) const {
  const cplx zinv = std::polar(1.0, -2.0 * std::numbers::pi * freq_hz / fs);
  cplx h = 1.0;
  for (const auto& s : sections) h *= section_response(s, zinv);
  return h;
}

SosFilter butter_bandpass(int order, double lo_hz, double hi_hz, double fs) {
  if (order < 1) throw ParameterError("butter_bandpass: order must be >= 1");
  if (!(lo_hz > 0 && lo_hz < hi_hz && hi_hz < fs / 2)) {
    throw ParameterError("butter_bandpass: need 0 < lo < hi < fs/2");
  }
  const double pi = std::numbers::pi;
  const double w1 = 2.0 * fs * std::tan(pi * lo_hz / fs);
  const double w2 = 2.0 * fs * std::tan(pi * hi_hz / fs);
  const double bw = w2 - w1;
  const double w0sq = w1 * w2;

  // Upper-half-plane digital poles; each yields one section with its conjugate.
  std::vector<cplx> poles;
  for (int k = 0; k < order; ++k) {
    const cplx proto = std::polar(1.0, pi * (2.0 * k + order + 1) / (2.0 * order));
    const cplx disc = std::sqrt(proto * proto * bw * bw - 4.0 * w0sq);
    for (const cplx s : {(proto * bw + disc) / 2.0, (proto * bw - disc) / 2.0}) {
      const cplx z = (2.0 * fs + s) / (2.0 * fs - s);
      if (z.imag() > 0) poles.push_back(z);
    }
  }
  if (static_cast<int>(poles.size()) != order) {
    throw InternalError("butter_bandpass: unexpected real pole in band-pass design");
  }
  std::sort(poles.begin(), poles.end(),
            [](const cplx& a, const cplx& b) { return std::abs(a) < std::abs(b); });

  SosFilter f;
  for (const cplx& p : poles) {
    // Zeros at z = +1 and z = -1.
    f.sections.push_back(Biquad{1.0, 0.0, -1.0, -2.0 * p.real(), std::norm(p)});
  }
  const double center = std::atan(std::sqrt(w0sq) / (2.0 * fs)) * fs / pi;
  const double gain = 1.0 / std::abs(f.response(center, fs));
  f.sections.front().b0 *= gain;
  f.sections.front().b1 *= gain;
  f.sections.front().b2 *= gain;
  return f;
}

std::vector<std::array<double, 2>> sosfilt_zi(const SosFilter& filter) {
  std::vector<std::array<double, 2>> zi;
  double scale = 1.0;
  for (const auto& s : filter.sections) {
    const double dc = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
    const double z2 = s.b2 - s.a2 * dc;
    const double z1 = dc - s.b0;
    zi.push_back({scale * z1, scale * z2});
    scale *= dc;
  }
  return zi;
}

std::vector<double> sosfilt(const SosFilter& filter, std::span<const double> x,
                            const std::vector<std::array<double, 2>>* zi, double initial_scale) {
  std::vector<double> y(x.begin(), x.end());
  for (std::size_t k = 0; k < filter.sections.size(); ++k) {
    const Biquad& s = filter.sections[k];
    double z1 = zi ? (*zi)[k][0] * initial_scale : 0.0;
    double z2 = zi ? (*zi)[k][1] * initial_scale : 0.0;
    for (double& v : y) {
      const double in = v;
      const double out = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * out + z2;
      z2 = s.b2 * in - s.a2 * out;
      v = out;
    }
  }
  return y;
}

std::vector<double> sosfiltfilt(const SosFilter& filter, std::span<const double> x,
                                std::size_t padlen) {
  if (x.empty()) return {};
  padlen = std::min(padlen, x.size() - 1);
  const long n = static_cast<long>(x.size());
  const long pad = static_cast<long>(padlen);
  std::vector<double> ext(static_cast<std::size_t>(n + 2 * pad));
  for (long i = 0; i < n + 2 * pad; ++i) ext[static_cast<std::size_t>(i)] = reflect_odd(x, i - pad);

  const auto zi = sosfilt_zi(filter);
  std::vector<double> fwd = sosfilt(filter, ext, &zi, ext.front());
  std::reverse(fwd.begin(), fwd.end());
  std::vector<double> bwd = sosfilt(filter, fwd, &zi, fwd.front());
  std::reverse(bwd.begin(), bwd.end());
  return {bwd.begin() + pad, bwd.begin() + pad + n};
}

std::optional<Ratio> rational_ratio(double target, double source, int max_factor) {
  if (!(target > 0) || !(source > 0) || !std::isfinite(target) || !std::isfinite(source)) {
    return std::nullopt;
  }
  const double r = target / source;
  for (int q = 1; q <= max_factor; ++q) {
    const double pf = std::round(r * q);
    if (pf < 1 || pf > max_factor) continue;
    if (std::abs(pf / q - r) <= 1e-12 * r) {
      const int p = static_cast<int>(pf);
      const int g = std::gcd(p, q);
      return Ratio{p / g, q / g};
    }
  }
  return std::nullopt;
}

std::vector<double> resample_poly(std::span<const double> x, int up, int down, int taps_per_phase,
                                  double kaiser_beta) {
  if (up < 1 || down < 1) throw ParameterError("resample_poly: factors must be >= 1");
  if (x.empty()) return {};
  const int g = std::gcd(up, down);
  up /= g;
  down /= g;
  if (up == 1 && down == 1) return {x.begin(), x.end()};

  const int span_factor = std::max(up, down);
  const long half = static_cast<long>(taps_per_phase / 2) * span_factor;
  const long len = 2 * half + 1;
  const double cutoff = 0.5 / span_factor;  // cycles per upsampled sample
  const double pi = std::numbers::pi;
  const double i0beta = std::cyl_bessel_i(0.0, kaiser_beta);

  std::vector<double> h(static_cast<std::size_t>(len));
  for (long j = 0; j < len; ++j) {
    const double t = static_cast<double>(j - half);
    const double arg = 2.0 * cutoff * t;
    const double sinc = t == 0 ? 1.0 : std::sin(pi * arg) / (pi * arg);
    const double ratio = static_cast<double>(j - half) / static_cast<double>(half);
    const double win = std::cyl_bessel_i(0.0, kaiser_beta * std::sqrt(std::max(0.0, 1.0 - ratio * ratio))) / i0beta;
    h[static_cast<std::size_t>(j)] = 2.0 * cutoff * sinc * win;
  }

  // Polyphase split: phase r holds taps h[r], h[r + up], ... normalised to unit DC gain.
  std::vector<std::vector<double>> phases(static_cast<std::size_t>(up));
  for (int r = 0; r < up; ++r) {
    auto& ph = phases[static_cast<std::size_t>(r)];
    for (long j = r; j < len; j += up) ph.push_back(h[static_cast<std::size_t>(j)]);
    const double sum = std::accumulate(ph.begin(), ph.end(), 0.0);
    for (double& v : ph) v /= sum;
  }

  const auto n = static_cast<long>(x.size());
  const auto n_out = static_cast<long>(std::llround(static_cast<double>(n) * up / down));
  std::vector<double> y(static_cast<std::size_t>(n_out));
  for (long k = 0; k < n_out; ++k) {
    const long u = k * down + half;
    const long r = u % up;
    const long m0 = (u - r) / up;
    const auto& ph = phases[static_cast<std::size_t>(r)];
    double acc = 0.0;
    for (std::size_t i = 0; i < ph.size(); ++i) {
      acc += ph[i] * reflect_odd(x, m0 - static_cast<long>(i));
    }
    y[static_cast<std::size_t>(k)] = acc;
  }
  return y;
}

}  // namespace neurosleep::dsp
