// Classify ten minutes of synthetic EEG whose slope drifts from wake-like to
// REM-like, epoch by epoch.

#include <cstdio>

#include "arousal/arousal.hpp"

int main() {
  using namespace arousal;

  std::vector<CorpusEpoch> plan;
  for (int i = 0; i < 20; ++i) plan.push_back({1.8 + 0.1 * i, RawStage::Unknown});
  const auto corpus = synthesize_corpus(plan, 30.0, 200.0, /*seed=*/7);

  ArousalPipeline pipeline(PipelineConfig::sleep());
  const auto results = pipeline.analyze(corpus_recording(corpus));

  std::printf("%8s %6s %8s  %s\n", "start_s", "beta", "slope", "stage");
  for (const auto& r : results)
    std::printf("%8.0f %6.2f %8.3f  %s\n", r.start_s, plan[r.index].beta, r.feature.slope,
                std::string(to_string(r.stage)).c_str());
}
