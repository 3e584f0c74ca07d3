#pragma once

// Threshold classification of the spectral slope and confusion-matrix
// evaluation against scored hypnograms.

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "arousal/error.hpp"

namespace arousal {

// Predicted three-way stage.
enum class Stage { Wake = 0, NREM3 = 1, REM = 2 };

// Two-way arousal (anesthesia / any reduced arousal collapse into one class).
enum class Arousal { Wake = 0, ReducedArousal = 1 };

// Stage as scored in a hypnogram.
enum class RawStage { Wake, N1, N2, N3, N4, REM, Unknown };

inline constexpr std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::Wake: return "Wake";
    case Stage::NREM3: return "NREM3";
    case Stage::REM: return "REM";
  }
  return "?";
}

inline constexpr std::string_view to_string(Arousal a) {
  return a == Arousal::Wake ? "Wake" : "ReducedArousal";
}

inline constexpr std::string_view to_string(RawStage s) {
  switch (s) {
    case RawStage::Wake: return "W";
    case RawStage::N1: return "N1";
    case RawStage::N2: return "N2";
    case RawStage::N3: return "N3";
    case RawStage::N4: return "N4";
    case RawStage::REM: return "R";
    case RawStage::Unknown: return "?";
  }
  return "?";
}

struct Thresholds {
  static constexpr double kDefaultWakeCut = -2.45;
  static constexpr double kDefaultRemCut = -3.2;

  double wake_cut = kDefaultWakeCut;
  double rem_cut = kDefaultRemCut;

  void validate() const {
    if (!std::isfinite(wake_cut) || !std::isfinite(rem_cut) || !(rem_cut < wake_cut))
      throw Error(ErrorKind::InvalidSpec, "thresholds must be finite with rem_cut < wake_cut");
  }
};

// slope > wake_cut -> Wake; slope < rem_cut -> REM; otherwise, including a
// tie at either cut, NREM3.
inline Stage classify_slope(double slope, const Thresholds& th = {}) {
  if (!std::isfinite(slope)) throw Error(ErrorKind::InvalidInput, "slope is not finite");
  if (slope > th.wake_cut) return Stage::Wake;
  if (slope < th.rem_cut) return Stage::REM;
  return Stage::NREM3;
}

inline Arousal classify_binary_arousal(double slope, const Thresholds& th = {}) {
  if (!std::isfinite(slope)) throw Error(ErrorKind::InvalidInput, "slope is not finite");
  return slope > th.wake_cut ? Arousal::Wake : Arousal::ReducedArousal;
}

// N3 and N4 merge into NREM3. Light sleep and unscored epochs have no
// three-way class.
inline std::optional<Stage> merge_annotation(RawStage s) {
  switch (s) {
    case RawStage::Wake: return Stage::Wake;
    case RawStage::N3:
    case RawStage::N4: return Stage::NREM3;
    case RawStage::REM: return Stage::REM;
    default: return std::nullopt;
  }
}

// counts(true, predicted). Merging two matrices adds counts, so chunks can be
// evaluated independently.
template <std::size_t Classes>
struct ConfusionMatrix {
  std::array<std::array<std::size_t, Classes>, Classes> counts{};

  void add(std::size_t truth, std::size_t predicted) { ++counts[truth][predicted]; }

  ConfusionMatrix& merge(const ConfusionMatrix& other) {
    for (std::size_t i = 0; i < Classes; ++i)
      for (std::size_t j = 0; j < Classes; ++j) counts[i][j] += other.counts[i][j];
    return *this;
  }

  std::size_t row_total(std::size_t i) const {
    std::size_t t = 0;
    for (auto c : counts[i]) t += c;
    return t;
  }

  std::size_t total() const {
    std::size_t t = 0;
    for (std::size_t i = 0; i < Classes; ++i) t += row_total(i);
    return t;
  }

  std::size_t correct() const {
    std::size_t t = 0;
    for (std::size_t i = 0; i < Classes; ++i) t += counts[i][i];
    return t;
  }

  double accuracy() const {
    const auto n = total();
    return n == 0 ? 0.0 : double(correct()) / double(n);
  }

  // Row-normalized; rows without samples stay all-zero (see empty_rows()).
  std::array<std::array<double, Classes>, Classes> normalized() const {
    std::array<std::array<double, Classes>, Classes> out{};
    for (std::size_t i = 0; i < Classes; ++i) {
      const auto t = row_total(i);
      if (t == 0) continue;
      for (std::size_t j = 0; j < Classes; ++j) out[i][j] = double(counts[i][j]) / double(t);
    }
    return out;
  }

  std::vector<std::size_t> empty_rows() const {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < Classes; ++i)
      if (row_total(i) == 0) rows.push_back(i);
    return rows;
  }
};

struct EvaluationOptions {
  // Binary task only: score N1/N2 as ReducedArousal instead of excluding them.
  bool light_sleep_as_reduced = false;
};

template <std::size_t Classes>
struct Evaluation {
  ConfusionMatrix<Classes> confusion;
  double accuracy = 0.0;
  std::size_t retained = 0;
  std::size_t excluded_light_sleep = 0;  // N1/N2
  std::size_t excluded_unscored = 0;     // Unknown
};

using StageEvaluation = Evaluation<3>;
using ArousalEvaluation = Evaluation<2>;

namespace detail {
inline void check_lengths(std::size_t predictions, std::size_t annotations) {
  if (predictions != annotations)
    throw Error(ErrorKind::Alignment, std::to_string(predictions) + " predictions vs " +
                                          std::to_string(annotations) + " annotations");
}

template <std::size_t C>
void finish(Evaluation<C>& ev) {
  ev.retained = ev.confusion.total();
  if (ev.retained == 0) throw Error(ErrorKind::NoData, "no epochs left to evaluate after filtering annotations");
  ev.accuracy = ev.confusion.accuracy();
}
}  // namespace detail

inline StageEvaluation evaluate(std::span<const Stage> predictions, std::span<const RawStage> annotations) {
  detail::check_lengths(predictions.size(), annotations.size());
  StageEvaluation ev;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto truth = merge_annotation(annotations[i]);
    if (!truth) {
      if (annotations[i] == RawStage::Unknown)
        ++ev.excluded_unscored;
      else
        ++ev.excluded_light_sleep;
      continue;
    }
    ev.confusion.add(static_cast<std::size_t>(*truth), static_cast<std::size_t>(predictions[i]));
  }
  detail::finish(ev);
  return ev;
}

inline ArousalEvaluation evaluate_binary(std::span<const Arousal> predictions, std::span<const RawStage> annotations,
                                         const EvaluationOptions& options = {}) {
  detail::check_lengths(predictions.size(), annotations.size());
  ArousalEvaluation ev;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    std::optional<Arousal> truth;
    switch (annotations[i]) {
      case RawStage::Wake: truth = Arousal::Wake; break;
      case RawStage::N3:
      case RawStage::N4:
      case RawStage::REM: truth = Arousal::ReducedArousal; break;
      case RawStage::N1:
      case RawStage::N2:
        if (options.light_sleep_as_reduced)
          truth = Arousal::ReducedArousal;
        else
          ++ev.excluded_light_sleep;
        break;
      case RawStage::Unknown: ++ev.excluded_unscored; break;
    }
    if (truth) ev.confusion.add(static_cast<std::size_t>(*truth), static_cast<std::size_t>(predictions[i]));
  }
  detail::finish(ev);
  return ev;
}

}  // namespace arousal
