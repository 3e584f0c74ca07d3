#pragma once

// Multitaper power spectral density: one modified periodogram per Slepian
// taper,
//   S_k(f) = dt * | sum_n g_k(n) x(n) exp(-j 2 pi f n dt) |^2,
// then their plain average S(f) = (1/K) sum_k S_k(f). Spectra are one-sided:
// bins strictly between DC and Nyquist are doubled, so the sum of S(f) * df
// over the half grid equals the mean-square value of the tapered input.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "arousal/dpss.hpp"
#include "arousal/dsp_filters.hpp"
#include "arousal/error.hpp"
#include "arousal/fft.hpp"

namespace arousal {

inline constexpr double kAnalysisBandLowHz = 0.5;
inline constexpr double kAnalysisBandHighHz = 45.0;

struct PsdEstimate {
  std::vector<double> freqs_hz;
  std::vector<double> power;  // signal^2 / Hz
  std::size_t n_tapers_used = 0;
  double delta_t_s = 0.0;
  double epoch_start_s = 0.0;
  std::string channel;

  // Spacing of the underlying FFT grid.
  double resolution_hz() const noexcept {
    return freqs_hz.size() > 1 ? freqs_hz[1] - freqs_hz[0] : 0.0;
  }

  // Copy restricted to lo <= f <= hi.
  PsdEstimate band(double lo_hz, double hi_hz) const {
    PsdEstimate out;
    out.n_tapers_used = n_tapers_used;
    out.delta_t_s = delta_t_s;
    out.epoch_start_s = epoch_start_s;
    out.channel = channel;
    for (std::size_t i = 0; i < freqs_hz.size(); ++i) {
      if (freqs_hz[i] >= lo_hz && freqs_hz[i] <= hi_hz) {
        out.freqs_hz.push_back(freqs_hz[i]);
        out.power.push_back(power[i]);
      }
    }
    return out;
  }

  // Rectangle-rule integral of the one-sided density over the grid.
  double integrated_power() const {
    const double df = resolution_hz();
    double acc = 0.0;
    for (double p : power) acc += p * df;
    return acc;
  }
};

struct Periodogram {
  std::size_t taper_index = 0;
  std::vector<double> power;  // one-sided, full grid
};

struct MultitaperOptions {
  bool demean = true;
  std::size_t nfft = 0;  // 0: no padding (nfft = N)
};

namespace detail {
inline void one_sided_power(std::span<const std::complex<double>> spec, std::size_t nfft, double dt,
                            std::span<double> out) {
  for (std::size_t j = 0; j < spec.size(); ++j) {
    const bool edge = j == 0 || (nfft % 2 == 0 && j == nfft / 2);
    out[j] = dt * std::norm(spec[j]) * (edge ? 1.0 : 2.0);
  }
}

inline std::vector<double> fft_grid(std::size_t nfft, double sample_rate_hz) {
  std::vector<double> f(nfft / 2 + 1);
  for (std::size_t j = 0; j < f.size(); ++j) f[j] = double(j) * sample_rate_hz / double(nfft);
  return f;
}
}  // namespace detail

// Reusable per-thread workspace bound to one taper set. The taper set must
// outlive the estimator.
class MultitaperEstimator {
 public:
  explicit MultitaperEstimator(const TaperSet& tapers, MultitaperOptions options = {})
      : tapers_(&tapers),
        options_(options),
        nfft_(options.nfft == 0 ? tapers.params.n_samples : options.nfft),
        fft_(nfft_),
        centred_(tapers.params.n_samples),
        scratch_(nfft_ / 2 + 1) {
    if (tapers.size() == 0) throw Error(ErrorKind::InvalidInput, "empty taper set");
    if (nfft_ < tapers.params.n_samples)
      throw Error(ErrorKind::InvalidSpec, "nfft shorter than the taper length");
  }

  std::size_t nfft() const noexcept { return nfft_; }

  // Full one-sided grid, 0 .. Fs/2.
  PsdEstimate estimate(std::span<const double> x, double sample_rate_hz) {
    check(x);
    const double dt = 1.0 / sample_rate_hz;
    prepare(x);

    PsdEstimate out;
    out.freqs_hz = detail::fft_grid(nfft_, sample_rate_hz);
    out.power.assign(out.freqs_hz.size(), 0.0);
    out.n_tapers_used = tapers_->size();
    out.delta_t_s = dt;

    for (const auto& taper : tapers_->tapers) {
      tapered_transform(taper);
      detail::one_sided_power(fft_.spectrum(), nfft_, dt, scratch_);
      for (std::size_t j = 0; j < scratch_.size(); ++j) out.power[j] += scratch_[j];
    }
    const double inv_k = 1.0 / double(tapers_->size());
    for (auto& p : out.power) p *= inv_k;
    return out;
  }

  PsdEstimate estimate(const Epoch& epoch) {
    auto out = estimate(epoch.samples, epoch.sample_rate_hz);
    out.epoch_start_s = epoch.start_time_s;
    out.channel = epoch.source_channel;
    return out;
  }

  // Live working memory: FFT buffers, the centred copy and the accumulator.
  std::size_t workspace_bytes() const noexcept {
    return fft_.buffer_bytes() + (centred_.size() + 2 * scratch_.size()) * sizeof(double);
  }

 private:
  void check(std::span<const double> x) const {
    if (x.size() != tapers_->params.n_samples)
      throw Error(ErrorKind::InvalidInput, "epoch has " + std::to_string(x.size()) + " samples, tapers expect " +
                                               std::to_string(tapers_->params.n_samples));
    detail::require_finite(x, "multitaper_psd");
  }

  void prepare(std::span<const double> x) {
    double mean = 0.0;
    if (options_.demean) {
      for (double v : x) mean += v;
      mean /= double(x.size());
    }
    // A constant epoch demeans to exact zeros, not rounding residue.
    if (options_.demean && std::all_of(x.begin(), x.end(), [&](double v) { return v == x.front(); })) mean = x.front();
    for (std::size_t n = 0; n < x.size(); ++n) centred_[n] = x[n] - mean;
  }

  void tapered_transform(const Taper& taper) {
    auto buf = fft_.real();
    taper.apply(centred_, buf.first(centred_.size()));
    std::fill(buf.begin() + static_cast<std::ptrdiff_t>(centred_.size()), buf.end(), 0.0);
    fft_.forward();
  }

  const TaperSet* tapers_;
  MultitaperOptions options_;
  std::size_t nfft_;
  RealFft fft_;
  std::vector<double> centred_;
  std::vector<double> scratch_;
};

// Single-taper modified periodogram on the full one-sided FFT grid (length
// N/2 + 1). The input is used as given: no demeaning.
inline Periodogram modified_periodogram(const Epoch& epoch, std::span<const double> taper, double delta_t_s,
                                        std::size_t taper_index = 0) {
  if (taper.size() != epoch.samples.size())
    throw Error(ErrorKind::InvalidInput, "taper length " + std::to_string(taper.size()) +
                                             " does not match epoch length " +
                                             std::to_string(epoch.samples.size()));
  detail::require_finite(epoch.samples, "modified_periodogram");
  const std::size_t n = taper.size();
  RealFft fft(n);
  auto buf = fft.real();
  for (std::size_t i = 0; i < n; ++i) buf[i] = taper[i] * epoch.samples[i];
  fft.forward();
  Periodogram out;
  out.taper_index = taper_index;
  out.power.resize(fft.spectrum_size());
  detail::one_sided_power(fft.spectrum(), n, delta_t_s, out.power);
  return out;
}

// Full one-sided grid.
inline PsdEstimate multitaper_psd_full(const Epoch& epoch, const TaperSet& tapers,
                                       const MultitaperOptions& options = {}) {
  MultitaperEstimator est(tapers, options);
  return est.estimate(epoch);
}

// Analysis product: the multitaper estimate restricted to [lo, hi] Hz.
inline PsdEstimate multitaper_psd(const Epoch& epoch, const TaperSet& tapers, double lo_hz = kAnalysisBandLowHz,
                                  double hi_hz = kAnalysisBandHighHz, const MultitaperOptions& options = {}) {
  return multitaper_psd_full(epoch, tapers, options).band(lo_hz, hi_hz);
}

}  // namespace arousal
