#pragma once

// Seeded power-law (1/f^beta) Gaussian noise by spectral synthesis, and
// labeled synthetic corpora built from it. These are the oracles for slope
// recovery and end-to-end evaluation.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "arousal/classifier.hpp"
#include "arousal/dsp_filters.hpp"
#include "arousal/edf_io.hpp"
#include "arousal/error.hpp"
#include "arousal/fft.hpp"

namespace arousal {

struct SynthSpec {
  double beta = 2.0;
  double duration_s = 30.0;
  double sample_rate_hz = 200.0;
  std::uint64_t seed = 1;
  double variance = 1.0;

  void validate() const {
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw Error(ErrorKind::InvalidSpec, "beta must be >= 0");
    if (!(sample_rate_hz > 0.0) || !(duration_s > 0.0))
      throw Error(ErrorKind::InvalidSpec, "duration and sample rate must be > 0");
    if (!(variance > 0.0)) throw Error(ErrorKind::InvalidSpec, "variance must be > 0");
    if (std::llround(duration_s * sample_rate_hz) < 4) throw Error(ErrorKind::InvalidSpec, "signal too short");
  }
};

// Spectrum is flat below this frequency so the power law has no singularity.
inline constexpr double kSynthLowCornerHz = 0.5;

// Complex Gaussian Fourier coefficients with amplitude f^(-beta/2) (flat
// below the corner, zero at DC), inverse transformed and scaled to the exact
// requested sample variance. Same spec, same seed: bit-identical output.
inline std::vector<double> synthesize_powerlaw(const SynthSpec& spec) {
  spec.validate();
  const auto n = static_cast<std::size_t>(std::llround(spec.duration_s * spec.sample_rate_hz));
  RealFft fft(n);
  auto bins = fft.spectrum();

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  bins[0] = 0.0;
  for (std::size_t j = 1; j < bins.size(); ++j) {
    const double f = double(j) * spec.sample_rate_hz / double(n);
    const double amp = std::pow(std::max(f, kSynthLowCornerHz), -spec.beta / 2.0);
    const double re = normal(rng);
    const double im = normal(rng);
    bins[j] = (n % 2 == 0 && j == n / 2) ? std::complex<double>(amp * re, 0.0) : amp * std::complex<double>(re, im);
  }
  fft.inverse();

  auto x = fft.real();
  std::vector<double> out(x.begin(), x.end());
  double mean = 0.0;
  for (double v : out) mean += v;
  mean /= double(n);
  double var = 0.0;
  for (double v : out) var += (v - mean) * (v - mean);
  var /= double(n);
  const double gain = std::sqrt(spec.variance / var);
  for (double& v : out) v = (v - mean) * gain;
  return out;
}

inline std::vector<Epoch> synthesize_epochs(const SynthSpec& spec, double epoch_s, const std::string& channel = "Cz") {
  const auto x = synthesize_powerlaw(spec);
  return epoch_signal(x, spec.sample_rate_hz, epoch_s, channel);
}

// One epoch of a labeled corpus.
struct CorpusEpoch {
  double beta = 0.0;
  RawStage stage = RawStage::Unknown;
};

struct SyntheticCorpus {
  std::vector<double> signal;
  std::vector<CorpusEpoch> epochs;
  Hypnogram hypnogram;
  double epoch_s = 30.0;
  double sample_rate_hz = 200.0;
};

// Concatenates independently seeded segments, one per epoch. Each segment is
// cut from the middle of a three-epoch realization so it is a stationary
// stretch rather than one period of a circular signal.
inline SyntheticCorpus synthesize_corpus(std::vector<CorpusEpoch> plan, double epoch_s, double sample_rate_hz,
                                         std::uint64_t seed, double variance = 1.0) {
  if (plan.empty()) throw Error(ErrorKind::NoData, "empty corpus plan");
  SyntheticCorpus corpus;
  corpus.epoch_s = epoch_s;
  corpus.sample_rate_hz = sample_rate_hz;
  const auto len = static_cast<std::size_t>(std::llround(epoch_s * sample_rate_hz));
  corpus.signal.reserve(len * plan.size());
  for (std::size_t i = 0; i < plan.size(); ++i) {
    SynthSpec spec{plan[i].beta, 3.0 * epoch_s, sample_rate_hz, seed + 0x9E3779B97F4A7C15ULL * (i + 1), variance};
    const auto seg = synthesize_powerlaw(spec);
    corpus.signal.insert(corpus.signal.end(), seg.begin() + static_cast<std::ptrdiff_t>(len),
                         seg.begin() + static_cast<std::ptrdiff_t>(2 * len));
    corpus.hypnogram.entries.push_back({double(i) * epoch_s, epoch_s, plan[i].stage});
  }
  corpus.epochs = std::move(plan);
  return corpus;
}

// Stage whose slope threshold rule maps -beta to it; used to label corpora
// from their own construction parameters.
inline RawStage stage_for_beta(double beta, const Thresholds& th = {}) {
  switch (classify_slope(-beta, th)) {
    case Stage::Wake: return RawStage::Wake;
    case Stage::NREM3: return RawStage::N3;
    case Stage::REM: return RawStage::REM;
  }
  return RawStage::Unknown;
}

// Per-stage slope distributions used for modeled corpora. NREM3 is centred
// between the two decision thresholds.
struct SlopeDistribution {
  double mean;
  double sd;
};

struct StageSlopeModel {
  SlopeDistribution wake{-2.08, 0.6};
  SlopeDistribution nrem3{(Thresholds::kDefaultWakeCut + Thresholds::kDefaultRemCut) / 2.0, 0.5};
  SlopeDistribution rem{-3.45, 0.5};

  const SlopeDistribution& of(Stage s) const {
    switch (s) {
      case Stage::Wake: return wake;
      case Stage::NREM3: return nrem3;
      case Stage::REM: return rem;
    }
    return wake;
  }
};

inline RawStage raw_of(Stage s) {
  switch (s) {
    case Stage::Wake: return RawStage::Wake;
    case Stage::NREM3: return RawStage::N3;
    case Stage::REM: return RawStage::REM;
  }
  return RawStage::Unknown;
}

// Draws `per_stage` slopes for each of Wake, NREM3 and REM from `model`.
struct ModeledSlopes {
  std::vector<double> slopes;
  std::vector<RawStage> stages;
};

inline ModeledSlopes sample_modeled_slopes(std::size_t per_stage, std::uint64_t seed, const StageSlopeModel& model = {}) {
  std::mt19937_64 rng(seed);
  ModeledSlopes out;
  for (Stage s : {Stage::Wake, Stage::NREM3, Stage::REM}) {
    std::normal_distribution<double> dist(model.of(s).mean, model.of(s).sd);
    for (std::size_t i = 0; i < per_stage; ++i) {
      out.slopes.push_back(dist(rng));
      out.stages.push_back(raw_of(s));
    }
  }
  return out;
}

// Corpus plan whose per-epoch exponents follow the modeled slope
// distributions (beta = -slope, floored at 0), stages interleaved.
inline std::vector<CorpusEpoch> modeled_corpus_plan(std::size_t epochs, std::uint64_t seed,
                                                    const StageSlopeModel& model = {}) {
  std::mt19937_64 rng(seed);
  std::vector<CorpusEpoch> plan;
  plan.reserve(epochs);
  for (std::size_t i = 0; i < epochs; ++i) {
    const auto s = static_cast<Stage>(i % 3);
    std::normal_distribution<double> dist(model.of(s).mean, model.of(s).sd);
    plan.push_back({std::max(0.0, -dist(rng)), raw_of(s)});
  }
  return plan;
}

// Corpus plan with exponents drawn uniformly from `betas` bands, labeled by
// applying the threshold rule to -beta.
inline std::vector<CorpusEpoch> self_consistent_corpus_plan(std::size_t epochs, std::uint64_t seed,
                                                            const std::vector<std::pair<double, double>>& beta_bands) {
  if (beta_bands.empty()) throw Error(ErrorKind::InvalidSpec, "no beta bands");
  std::mt19937_64 rng(seed);
  std::vector<CorpusEpoch> plan;
  plan.reserve(epochs);
  for (std::size_t i = 0; i < epochs; ++i) {
    const auto& band = beta_bands[i % beta_bands.size()];
    std::uniform_real_distribution<double> dist(band.first, band.second);
    const double beta = dist(rng);
    plan.push_back({beta, stage_for_beta(beta)});
  }
  return plan;
}

inline Recording corpus_recording(const SyntheticCorpus& corpus, const std::string& channel = "Cz") {
  Recording rec;
  rec.recording_id = "synthetic power-law corpus";
  Channel ch;
  ch.label = channel;
  ch.sample_rate_hz = corpus.sample_rate_hz;
  ch.samples = corpus.signal;
  rec.channels.push_back(std::move(ch));
  return rec;
}

}  // namespace arousal
