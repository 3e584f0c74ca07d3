#pragma once

// Per-stage wall-clock timing and buffer byte counts for the per-epoch
// processing chain. Energy is not measured.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "arousal/pipeline.hpp"
#include "arousal/synth.hpp"

namespace arousal {

struct StageTiming {
  double median_ms = 0.0;
  double p95_ms = 0.0;
};

struct BenchReport {
  std::size_t epochs = 0;
  std::size_t epoch_samples = 0;
  std::size_t n_tapers = 0;
  StageTiming filtering, psd, slope, classify, total;
  std::size_t dense_taper_bytes = 0;
  std::size_t sparse_taper_bytes = 0;
  double sparse_epsilon = 0.0;
  double sparse_density = 1.0;
  std::size_t filtering_buffer_bytes = 0;
  std::size_t psd_buffer_bytes = 0;
};

namespace detail {
inline StageTiming summarize(std::vector<double> ms) {
  if (ms.empty()) return {};
  std::sort(ms.begin(), ms.end());
  auto at = [&](double q) {
    const auto i = static_cast<std::size_t>(std::ceil(q * double(ms.size()))) - 1;
    return ms[std::min(i, ms.size() - 1)];
  };
  const std::size_t n = ms.size();
  const double median = n % 2 ? ms[n / 2] : 0.5 * (ms[n / 2 - 1] + ms[n / 2]);
  return {median, at(0.95)};
}
}  // namespace detail

// Runs `epochs` synthetic epochs at the analysis rate through filter, PSD,
// slope and classification, one epoch at a time, single-threaded. Tapers
// come from the pipeline (precomputed, dense or sparse per its config).
// `epsilon` only drives the dense-vs-sparse byte comparison.
inline BenchReport run_bench(const ArousalPipeline& pipeline, std::size_t epochs, double epsilon,
                             std::uint64_t seed = 1) {
  using clock = std::chrono::steady_clock;
  auto ms_since = [](clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(clock::now() - t0).count();
  };
  const auto& cfg = pipeline.config();
  if (epochs == 0) throw Error(ErrorKind::InvalidSpec, "bench needs at least one epoch");

  BenchReport rep;
  rep.epochs = epochs;
  rep.epoch_samples = cfg.epoch_samples();
  rep.n_tapers = pipeline.tapers().size();
  rep.sparse_epsilon = epsilon;

  const auto signal = synthesize_powerlaw({2.0, double(epochs) * cfg.epoch_s, cfg.target_rate_hz, seed, 1.0});

  SosFilter filter(pipeline.denoise_filter());
  MultitaperEstimator est(pipeline.tapers());
  std::vector<double> filtered(rep.epoch_samples);
  std::vector<double> t_filter, t_psd, t_slope, t_class, t_total;
  volatile int sink = 0;

  for (std::size_t e = 0; e < epochs; ++e) {
    std::span<const double> raw(signal.data() + e * rep.epoch_samples, rep.epoch_samples);
    const auto t0 = clock::now();

    auto t = clock::now();
    filter.process(raw, filtered);
    t_filter.push_back(ms_since(t));

    t = clock::now();
    const auto psd = est.estimate(filtered, cfg.target_rate_hz);
    t_psd.push_back(ms_since(t));

    t = clock::now();
    const auto feat = spectral_slope(psd, cfg.fit_band);
    t_slope.push_back(ms_since(t));

    t = clock::now();
    sink = sink + static_cast<int>(classify_slope(feat.slope, cfg.thresholds));
    t_class.push_back(ms_since(t));

    t_total.push_back(ms_since(t0));
  }

  rep.filtering = detail::summarize(t_filter);
  rep.psd = detail::summarize(t_psd);
  rep.slope = detail::summarize(t_slope);
  rep.classify = detail::summarize(t_class);
  rep.total = detail::summarize(t_total);

  const TaperSet* dense = &pipeline.tapers();
  TaperSet dense_copy;
  if (pipeline.sparsify_report()) {
    dense_copy = compute_tapers(cfg.taper_params());
    dense = &dense_copy;
  }
  rep.dense_taper_bytes = dense->dense_storage_bytes();
  if (epsilon > 0.0) {
    const auto sp = sparsify_tapers(*dense, epsilon);
    rep.sparse_taper_bytes = sp.report.sparse_bytes;
    std::size_t kept = 0;
    for (auto r : sp.report.retained) kept += r;
    rep.sparse_density = double(kept) / double(dense->size() * rep.epoch_samples);
  } else {
    rep.sparse_taper_bytes = rep.dense_taper_bytes;
  }

  // Live buffers: one input and one output epoch plus filter state; the
  // taper set in use plus the estimator's FFT workspace and output.
  rep.filtering_buffer_bytes = 2 * rep.epoch_samples * sizeof(double) + filter.state_bytes();
  rep.psd_buffer_bytes = pipeline.tapers().storage_bytes() + est.workspace_bytes();
  return rep;
}

}  // namespace arousal
