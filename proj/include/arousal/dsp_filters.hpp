#pragma once

// Pre-processing: Butterworth low-pass denoising (cascaded biquads via the
// bilinear transform), Kaiser-windowed FIR anti-aliasing with integer
// decimation, and fixed-length epoching.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "arousal/error.hpp"

namespace arousal {

struct FilterSpec {
  enum class Kind { ButterworthLowpass, FirLowpass };

  Kind kind = Kind::ButterworthLowpass;
  int order = 10;
  double cutoff_hz = 50.0;
  double sample_rate_hz = 200.0;

  void validate() const {
    if (order < 1) throw Error(ErrorKind::InvalidSpec, "filter order must be >= 1");
    if (!(sample_rate_hz > 0.0)) throw Error(ErrorKind::InvalidSpec, "sample rate must be > 0");
    if (!(cutoff_hz > 0.0) || !(cutoff_hz < sample_rate_hz / 2.0))
      throw Error(ErrorKind::InvalidSpec, "cutoff must lie strictly between 0 and Nyquist (" +
                                              std::to_string(sample_rate_hz / 2.0) + " Hz)");
  }
};

// One biquad: y = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2) x.
// A first-order section has b2 = a2 = 0.
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;

  // Both poles strictly inside the unit circle (Jury conditions).
  bool stable() const noexcept { return std::abs(a2) < 1.0 && std::abs(a1) < 1.0 + a2; }

  std::complex<double> response(std::complex<double> z_inv) const noexcept {
    const auto z2 = z_inv * z_inv;
    return (b0 + b1 * z_inv + b2 * z2) / (1.0 + a1 * z_inv + a2 * z2);
  }
};

struct SosCascade {
  std::vector<Biquad> sections;
  double overall_gain = 1.0;
  double sample_rate_hz = 0.0;

  std::complex<double> response(double freq_hz) const {
    const double w = 2.0 * std::numbers::pi * freq_hz / sample_rate_hz;
    const std::complex<double> z_inv = std::polar(1.0, -w);
    std::complex<double> h = overall_gain;
    for (const auto& s : sections) h *= s.response(z_inv);
    return h;
  }

  double magnitude(double freq_hz) const { return std::abs(response(freq_hz)); }

  bool stable() const noexcept {
    return std::all_of(sections.begin(), sections.end(), [](const Biquad& s) { return s.stable(); });
  }
};

// Maximally flat low-pass of the given order. Analog prototype poles are
// mapped through the bilinear transform with the cutoff pre-warped, so
// |H(cutoff)| = 1/sqrt(2) exactly. Conjugate pole pairs become biquads with a
// double zero at Nyquist; an odd order adds one first-order tail section.
// Each section is normalized to unit DC gain.
inline SosCascade design_butterworth_lowpass(int order, double cutoff_hz, double sample_rate_hz) {
  FilterSpec{FilterSpec::Kind::ButterworthLowpass, order, cutoff_hz, sample_rate_hz}.validate();

  const double warped = std::tan(std::numbers::pi * cutoff_hz / sample_rate_hz);
  SosCascade cascade;
  cascade.sample_rate_hz = sample_rate_hz;

  for (int k = 0; k < order / 2; ++k) {
    const double theta = std::numbers::pi * (2.0 * k + order + 1) / (2.0 * order);
    const std::complex<double> s_pole = warped * std::polar(1.0, theta);
    const std::complex<double> z_pole = (1.0 + s_pole) / (1.0 - s_pole);

    Biquad q;
    q.a1 = -2.0 * z_pole.real();
    q.a2 = std::norm(z_pole);
    const double g = (1.0 + q.a1 + q.a2) / 4.0;
    q.b0 = g;
    q.b1 = 2.0 * g;
    q.b2 = g;
    cascade.sections.push_back(q);
  }
  if (order % 2 == 1) {
    const double z_pole = (1.0 - warped) / (1.0 + warped);
    Biquad q;
    q.a1 = -z_pole;
    const double g = (1.0 - z_pole) / 2.0;
    q.b0 = g;
    q.b1 = g;
    cascade.sections.push_back(q);
  }
  return cascade;
}

// Stateful streaming filter (transposed direct form II per section).
// One instance per stream; the design it was built from is never mutated.
class SosFilter {
 public:
  explicit SosFilter(const SosCascade& cascade)
      : cascade_(&cascade), state_(cascade.sections.size() * 2, 0.0) {}

  void reset() { std::fill(state_.begin(), state_.end(), 0.0); }

  double step(double x) {
    double v = x;
    const auto& secs = cascade_->sections;
    for (std::size_t i = 0; i < secs.size(); ++i) {
      const auto& s = secs[i];
      double& z1 = state_[2 * i];
      double& z2 = state_[2 * i + 1];
      const double y = s.b0 * v + z1;
      z1 = s.b1 * v - s.a1 * y + z2;
      z2 = s.b2 * v - s.a2 * y;
      v = y;
    }
    return v * cascade_->overall_gain;
  }

  void process(std::span<const double> in, std::span<double> out) {
    if (in.size() != out.size()) throw Error(ErrorKind::InvalidInput, "filter buffer size mismatch");
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = step(in[i]);
  }

  std::size_t state_bytes() const noexcept { return state_.size() * sizeof(double); }

 private:
  const SosCascade* cascade_;
  std::vector<double> state_;
};

namespace detail {
inline void require_finite(std::span<const double> x, const char* what) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]))
      throw Error(ErrorKind::InvalidInput,
                  std::string(what) + ": non-finite sample at index " + std::to_string(i));
  }
}
}  // namespace detail

// Causal single pass from zero initial state.
inline std::vector<double> filter_signal(const SosCascade& cascade, std::span<const double> x) {
  detail::require_finite(x, "filter_signal");
  std::vector<double> y(x.size());
  SosFilter f(cascade);
  f.process(x, y);
  return y;
}

// Forward-backward pass for offline analysis: zero phase, squared magnitude.
inline std::vector<double> filter_signal_zero_phase(const SosCascade& cascade,
                                                    std::span<const double> x) {
  auto y = filter_signal(cascade, x);
  std::reverse(y.begin(), y.end());
  SosFilter f(cascade);
  f.process(y, y);
  std::reverse(y.begin(), y.end());
  return y;
}

struct ResampleSpec {
  double input_rate_hz = 0.0;
  double output_rate_hz = 0.0;
  int decimation_factor = 1;
  std::vector<double> fir_taps{1.0};

  std::size_t group_delay() const noexcept { return (fir_taps.size() - 1) / 2; }

  // |H(f)| of the anti-aliasing FIR at the input rate.
  double magnitude(double freq_hz) const {
    const double w = 2.0 * std::numbers::pi * freq_hz / input_rate_hz;
    std::complex<double> h = 0.0;
    for (std::size_t i = 0; i < fir_taps.size(); ++i) h += fir_taps[i] * std::polar(1.0, -w * double(i));
    return std::abs(h);
  }
};

namespace detail {
inline double kaiser_beta(double atten_db) {
  if (atten_db > 50.0) return 0.1102 * (atten_db - 8.7);
  if (atten_db >= 21.0) return 0.5842 * std::pow(atten_db - 21.0, 0.4) + 0.07886 * (atten_db - 21.0);
  return 0.0;
}
}  // namespace detail

// Design target for the anti-aliasing stopband; the guaranteed floor is 60 dB
// at the output Nyquist, the extra margin absorbs Kaiser's approximation error.
inline constexpr double kAntialiasDesignAttenuationDb = 66.0;
inline constexpr double kAntialiasPassbandFraction = 0.9;

// Windowed-sinc low-pass for integer-ratio decimation. Passband edge at 90% of
// the output Nyquist, stopband from the output Nyquist up.
inline ResampleSpec design_antialias_fir(double input_rate_hz, double output_rate_hz) {
  if (!(input_rate_hz > 0.0) || !(output_rate_hz > 0.0))
    throw Error(ErrorKind::InvalidSpec, "sample rates must be > 0");
  const double ratio = input_rate_hz / output_rate_hz;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * ratio)
    throw Error(ErrorKind::UnsupportedRatio,
                "only integer downsampling ratios are supported (got " + std::to_string(ratio) + ")");

  ResampleSpec spec;
  spec.input_rate_hz = input_rate_hz;
  spec.output_rate_hz = output_rate_hz;
  spec.decimation_factor = static_cast<int>(rounded);
  if (spec.decimation_factor == 1) return spec;

  const double nyq_out = output_rate_hz / 2.0;
  const double pass_edge = kAntialiasPassbandFraction * nyq_out;
  const double stop_edge = nyq_out;
  const double transition = 2.0 * std::numbers::pi * (stop_edge - pass_edge) / input_rate_hz;
  const double atten = kAntialiasDesignAttenuationDb;
  auto length = static_cast<std::size_t>(std::ceil((atten - 8.0) / (2.285 * transition))) + 1;
  if (length % 2 == 0) ++length;

  const double fc = (pass_edge + stop_edge) / 2.0 / input_rate_hz;  // cycles/sample
  const double beta = detail::kaiser_beta(atten);
  const double i0_beta = std::cyl_bessel_i(0.0, beta);
  const double mid = double(length - 1) / 2.0;

  spec.fir_taps.assign(length, 0.0);
  double sum = 0.0;
  for (std::size_t n = 0; n < length; ++n) {
    const double t = double(n) - mid;
    const double sinc = t == 0.0 ? 2.0 * fc
                                 : std::sin(2.0 * std::numbers::pi * fc * t) / (std::numbers::pi * t);
    const double r = t / mid;
    const double window = std::cyl_bessel_i(0.0, beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / i0_beta;
    spec.fir_taps[n] = sinc * window;
    sum += spec.fir_taps[n];
  }
  for (auto& h : spec.fir_taps) h /= sum;
  return spec;
}

// Filter-and-decimate, computing only retained outputs. The FIR is applied
// centered (its group delay removed) so output sample j is aligned with input
// sample j*M; samples past either end are odd-reflected about the end value,
// which keeps constants and slow trends intact at the edges.
inline std::vector<double> resample(const ResampleSpec& spec, std::span<const double> x) {
  detail::require_finite(x, "resample");
  const std::size_t m = static_cast<std::size_t>(spec.decimation_factor);
  const std::size_t taps = spec.fir_taps.size();
  if (x.size() < taps)
    throw Error(ErrorKind::InsufficientData, "input of " + std::to_string(x.size()) +
                                                 " samples is shorter than the " + std::to_string(taps) +
                                                 "-tap anti-aliasing filter");
  const std::size_t n_out = x.size() / m;
  std::vector<double> y(n_out);
  if (m == 1 && taps == 1) {
    std::copy(x.begin(), x.end(), y.begin());
    return y;
  }

  const auto len = static_cast<std::ptrdiff_t>(x.size());
  const double first = x.front();
  const double last = x.back();
  auto at = [&](std::ptrdiff_t i) -> double {
    if (i < 0) return 2.0 * first - x[static_cast<std::size_t>(-i)];
    if (i >= len) return 2.0 * last - x[static_cast<std::size_t>(2 * (len - 1) - i)];
    return x[static_cast<std::size_t>(i)];
  };

  const auto delay = static_cast<std::ptrdiff_t>(spec.group_delay());
  for (std::size_t j = 0; j < n_out; ++j) {
    const auto centre = static_cast<std::ptrdiff_t>(j * m);
    const std::ptrdiff_t lo = centre + delay - static_cast<std::ptrdiff_t>(taps - 1);
    const std::ptrdiff_t hi = centre + delay;
    double acc = 0.0;
    if (lo >= 0 && hi < len) {
      const double* xp = x.data() + hi;
      for (std::size_t i = 0; i < taps; ++i) acc += spec.fir_taps[i] * xp[-static_cast<std::ptrdiff_t>(i)];
    } else {
      for (std::size_t i = 0; i < taps; ++i) acc += spec.fir_taps[i] * at(hi - static_cast<std::ptrdiff_t>(i));
    }
    y[j] = acc;
  }
  return y;
}

struct Epoch {
  std::vector<double> samples;
  double sample_rate_hz = 200.0;
  double duration_s = 30.0;
  std::string source_channel;
  double start_time_s = 0.0;
};

// Non-overlapping consecutive epochs; a trailing partial segment is dropped.
inline std::vector<Epoch> epoch_signal(std::span<const double> x, double sample_rate_hz, double epoch_s,
                                       const std::string& channel = {}, double start_offset_s = 0.0) {
  if (!(sample_rate_hz > 0.0) || !(epoch_s > 0.0))
    throw Error(ErrorKind::InvalidSpec, "epoch length and sample rate must be > 0");
  const double exact = epoch_s * sample_rate_hz;
  const double len_d = std::round(exact);
  if (std::abs(exact - len_d) > 1e-9 * exact || len_d < 1.0)
    throw Error(ErrorKind::InvalidSpec, "epoch length times sample rate must be an integer");
  const auto len = static_cast<std::size_t>(len_d);

  std::vector<Epoch> epochs;
  const std::size_t count = x.size() / len;
  epochs.reserve(count);
  for (std::size_t e = 0; e < count; ++e) {
    Epoch ep;
    ep.samples.assign(x.begin() + static_cast<std::ptrdiff_t>(e * len),
                      x.begin() + static_cast<std::ptrdiff_t>((e + 1) * len));
    ep.sample_rate_hz = sample_rate_hz;
    ep.duration_s = epoch_s;
    ep.source_channel = channel;
    ep.start_time_s = start_offset_s + double(e) * epoch_s;
    epochs.push_back(std::move(ep));
  }
  return epochs;
}

}  // namespace arousal
