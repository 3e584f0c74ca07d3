#pragma once

// End-to-end arousal estimation for one channel: resample to the analysis
// rate, Butterworth denoise, epoch, multitaper PSD, 30-45 Hz slope, threshold
// classification.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "arousal/classifier.hpp"
#include "arousal/dpss.hpp"
#include "arousal/dsp_filters.hpp"
#include "arousal/edf_io.hpp"
#include "arousal/error.hpp"
#include "arousal/multitaper.hpp"
#include "arousal/slope.hpp"

namespace arousal {

// Default sparsification threshold for sparse taper storage. Keeps the PSD
// within 1e-5 relative of the dense result on steep power-law spectra.
inline constexpr double kDefaultSparseEpsilon = 1e-7;

struct PipelineConfig {
  std::string channel_label = "Cz";
  double epoch_s = 30.0;
  double target_rate_hz = 200.0;
  double nw_smoothing_hz = 0.5;
  std::size_t n_tapers = 0;  // 0: 2 * epoch_s * smoothing - 1
  FitBand fit_band{};
  Thresholds thresholds{};
  double sparsify_epsilon = 0.0;  // 0: dense tapers
  int filter_order = 10;
  double filter_cutoff_hz = 50.0;
  bool zero_phase = false;
  std::size_t threads = 1;

  static PipelineConfig sleep() { return {}; }
  static PipelineConfig anesthesia() {
    PipelineConfig c;
    c.epoch_s = 10.0;
    return c;
  }

  TaperParams taper_params() const {
    return TaperParams::for_epoch(epoch_s, target_rate_hz, nw_smoothing_hz, n_tapers);
  }

  std::size_t epoch_samples() const { return static_cast<std::size_t>(std::llround(epoch_s * target_rate_hz)); }

  void validate() const {
    if (channel_label.empty()) throw Error(ErrorKind::InvalidSpec, "channel label must not be empty");
    if (!(target_rate_hz > 0.0) || !(epoch_s > 0.0))
      throw Error(ErrorKind::InvalidSpec, "epoch length and target rate must be > 0");
    const double exact = epoch_s * target_rate_hz;
    if (std::abs(exact - std::round(exact)) > 1e-9 * exact)
      throw Error(ErrorKind::InvalidSpec, "epoch length times target rate must be an integer");
    FilterSpec{FilterSpec::Kind::ButterworthLowpass, filter_order, filter_cutoff_hz, target_rate_hz}.validate();
    if (!(fit_band.lo_hz > 0.0) || !(fit_band.hi_hz > fit_band.lo_hz) || !(fit_band.hi_hz <= target_rate_hz / 2.0))
      throw Error(ErrorKind::InvalidSpec, "fit band must satisfy 0 < lo < hi <= Nyquist");
    thresholds.validate();
    if (!(sparsify_epsilon >= 0.0) || !std::isfinite(sparsify_epsilon))
      throw Error(ErrorKind::InvalidSpec, "sparsify epsilon must be >= 0");
    if (threads < 1) throw Error(ErrorKind::InvalidSpec, "threads must be >= 1");
    taper_params().validate();
  }
};

struct EpochResult {
  std::size_t index = 0;
  double start_s = 0.0;
  SlopeFeature feature;
  Stage stage = Stage::Wake;
  Arousal arousal = Arousal::Wake;
};

class ArousalPipeline {
 public:
  // Computes (and sparsifies, if configured) the taper set.
  explicit ArousalPipeline(PipelineConfig config) : config_(std::move(config)) {
    config_.validate();
    init(compute_tapers(config_.taper_params()));
  }

  // Uses a precomputed dense taper set; it must match the configuration.
  ArousalPipeline(PipelineConfig config, TaperSet tapers) : config_(std::move(config)) {
    config_.validate();
    if (!(tapers.params == config_.taper_params()))
      throw Error(ErrorKind::InvalidSpec, "taper set does not match the pipeline configuration");
    init(std::move(tapers));
  }

  const PipelineConfig& config() const noexcept { return config_; }
  const TaperSet& tapers() const noexcept { return *tapers_; }
  const SosCascade& denoise_filter() const noexcept { return butterworth_; }
  const SparsifyReport* sparsify_report() const noexcept { return sparse_report_ ? &*sparse_report_ : nullptr; }

  // Resample to the analysis rate, then low-pass.
  std::vector<double> preprocess(std::span<const double> x, double sample_rate_hz) const {
    std::vector<double> at_rate;
    if (sample_rate_hz != config_.target_rate_hz) {
      const auto spec = design_antialias_fir(sample_rate_hz, config_.target_rate_hz);
      at_rate = resample(spec, x);
    } else {
      at_rate.assign(x.begin(), x.end());
    }
    return config_.zero_phase ? filter_signal_zero_phase(butterworth_, at_rate) : filter_signal(butterworth_, at_rate);
  }

  std::vector<Epoch> epochs(const Channel& channel) const {
    if (channel.samples.empty()) throw Error(ErrorKind::NoData, "channel '" + channel.label + "' has no samples");
    const auto y = preprocess(channel.samples, channel.sample_rate_hz);
    return epoch_signal(y, config_.target_rate_hz, config_.epoch_s, channel.label);
  }

  EpochResult analyze_epoch(const Epoch& epoch, MultitaperEstimator& estimator, std::size_t index = 0) const {
    EpochResult r;
    r.index = index;
    r.start_s = epoch.start_time_s;
    r.feature = spectral_slope(estimator.estimate(epoch), config_.fit_band);
    r.stage = classify_slope(r.feature.slope, config_.thresholds);
    r.arousal = classify_binary_arousal(r.feature.slope, config_.thresholds);
    return r;
  }

  // Results are ordered by epoch index whatever the thread count.
  std::vector<EpochResult> analyze_epochs(std::span<const Epoch> epochs) const {
    std::vector<EpochResult> out(epochs.size());
    const std::size_t workers = std::min(config_.threads, std::max<std::size_t>(epochs.size(), 1));
    auto run = [&](std::size_t begin, std::size_t end) {
      MultitaperEstimator est(*tapers_);
      for (std::size_t i = begin; i < end; ++i) out[i] = analyze_epoch(epochs[i], est, i);
    };
    if (workers <= 1) {
      run(0, epochs.size());
      return out;
    }
    std::vector<std::exception_ptr> errors(workers);
    {
      std::vector<std::jthread> pool;
      const std::size_t chunk = (epochs.size() + workers - 1) / workers;
      for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t b = std::min(epochs.size(), w * chunk);
        const std::size_t e = std::min(epochs.size(), b + chunk);
        pool.emplace_back([&, b, e, w] {
          try {
            run(b, e);
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
    }
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
    return out;
  }

  std::vector<EpochResult> analyze(const Recording& rec) const {
    const auto eps = epochs(rec.channel(config_.channel_label));
    if (eps.empty()) throw Error(ErrorKind::NoData, "recording is shorter than one epoch");
    return analyze_epochs(eps);
  }

 private:
  void init(TaperSet dense) {
    butterworth_ = design_butterworth_lowpass(config_.filter_order, config_.filter_cutoff_hz, config_.target_rate_hz);
    if (config_.sparsify_epsilon > 0.0) {
      auto sp = sparsify_tapers(dense, config_.sparsify_epsilon);
      sparse_report_ = std::make_unique<SparsifyReport>(std::move(sp.report));
      tapers_ = std::make_shared<const TaperSet>(std::move(sp.tapers));
    } else {
      tapers_ = std::make_shared<const TaperSet>(std::move(dense));
    }
  }

  PipelineConfig config_;
  std::shared_ptr<const TaperSet> tapers_;
  SosCascade butterworth_;
  std::unique_ptr<SparsifyReport> sparse_report_;
};

inline std::vector<double> slopes_of(std::span<const EpochResult> results) {
  std::vector<double> s;
  s.reserve(results.size());
  for (const auto& r : results) s.push_back(r.feature.slope);
  return s;
}

inline std::vector<Stage> stages_of(std::span<const EpochResult> results) {
  std::vector<Stage> s;
  s.reserve(results.size());
  for (const auto& r : results) s.push_back(r.stage);
  return s;
}

}  // namespace arousal
