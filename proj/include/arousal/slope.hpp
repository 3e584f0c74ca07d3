#pragma once

// Spectral slope: ordinary least-squares line through (log f, log P) over a
// closed frequency band, 30-45 Hz by default. Both axes use the same log
// base, so the slope is base-independent; the intercept is in log10 units
// unless another base is requested.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "arousal/dpss.hpp"
#include "arousal/error.hpp"
#include "arousal/multitaper.hpp"

namespace arousal {

struct FitBand {
  double lo_hz = 30.0;
  double hi_hz = 45.0;
};

enum class LogBase { Ten, Natural };

struct SlopeFeature {
  double slope = 0.0;
  double intercept = 0.0;
  FitBand fit_band;
  std::size_t n_bins = 0;
  double residual_rms = 0.0;
  double epoch_start_s = 0.0;
};

inline constexpr std::size_t kMinFitBins = 3;

inline SlopeFeature spectral_slope(const PsdEstimate& psd, FitBand band = {}, LogBase base = LogBase::Ten) {
  if (!(band.lo_hz > 0.0) || !(band.hi_hz > band.lo_hz))
    throw Error(ErrorKind::InvalidSpec, "fit band must satisfy 0 < lo < hi");
  if (psd.freqs_hz.empty() || band.lo_hz < psd.freqs_hz.front() || band.hi_hz > psd.freqs_hz.back())
    throw Error(ErrorKind::InvalidSpec, "fit band lies outside the PSD grid");

  auto lg = [base](double v) { return base == LogBase::Ten ? std::log10(v) : std::log(v); };

  // Edge bins that miss the band limit by rounding still count.
  const double tol = 1e-9 * band.hi_hz;
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < psd.freqs_hz.size(); ++i) {
    const double f = psd.freqs_hz[i];
    if (f < band.lo_hz - tol || f > band.hi_hz + tol) continue;
    const double p = psd.power[i];
    if (!(p > 0.0) || !std::isfinite(p))
      throw Error(ErrorKind::DegenerateSpectrum,
                  "non-positive power " + std::to_string(p) + " at " + std::to_string(f) + " Hz");
    lx.push_back(lg(f));
    ly.push_back(lg(p));
  }
  if (lx.size() < kMinFitBins)
    throw Error(ErrorKind::InsufficientBand, "only " + std::to_string(lx.size()) + " bins inside the fit band");

  // Centred normal equations.
  const double n = double(lx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }

  SlopeFeature out;
  out.slope = sxy / sxx;
  out.intercept = my - out.slope * mx;
  out.fit_band = band;
  out.n_bins = lx.size();
  out.epoch_start_s = psd.epoch_start_s;
  double ss = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    const double r = ly[i] - (out.slope * lx[i] + out.intercept);
    ss += r * r;
  }
  out.residual_rms = std::sqrt(ss / n);
  if (!std::isfinite(out.slope)) throw Error(ErrorKind::DegenerateSpectrum, "slope is not finite");
  return out;
}

inline SlopeFeature slope_of_epoch(const Epoch& epoch, const TaperSet& tapers, FitBand band = {}) {
  MultitaperEstimator est(tapers);
  return spectral_slope(est.estimate(epoch), band);
}

}  // namespace arousal
