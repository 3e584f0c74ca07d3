// arousal: command-line front end for the spectral-slope arousal pipeline.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "arousal/arousal.hpp"

namespace {

using nlohmann::ordered_json;
using namespace arousal;

// Exit codes.
enum Exit : int {
  kOk = 0,
  kUsage = 1,
  kParse = 2,
  kValidation = 3,
  kIo = 4,
  kData = 5,
  kInternal = 70,
};

int exit_code_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::Parse:
    case ErrorKind::Calibration:
    case ErrorKind::Structure: return kParse;
    case ErrorKind::InvalidSpec:
    case ErrorKind::InvalidInput:
    case ErrorKind::UnsupportedRatio:
    case ErrorKind::PoorConcentration:
    case ErrorKind::Degradation: return kValidation;
    case ErrorKind::Io: return kIo;
    case ErrorKind::InsufficientData:
    case ErrorKind::DegenerateSpectrum:
    case ErrorKind::InsufficientBand:
    case ErrorKind::Alignment:
    case ErrorKind::NoData:
    case ErrorKind::MissingChannel: return kData;
  }
  return kInternal;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// Writes to the named file, or stdout for "" / "-".
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_.open(path, std::ios::binary);
      if (!file_) throw Error(ErrorKind::Io, "cannot open '" + path + "' for writing");
    }
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }
  void finish() {
    stream().flush();
    if (!stream()) throw Error(ErrorKind::Io, "write failed");
  }

 private:
  std::ofstream file_;
};

ordered_json to_json(const PipelineConfig& c) {
  const auto p = c.taper_params();
  return {{"channel", c.channel_label},
          {"epoch_s", c.epoch_s},
          {"target_rate_hz", c.target_rate_hz},
          {"nw_smoothing_hz", c.nw_smoothing_hz},
          {"n_tapers", p.n_tapers},
          {"fit_band_hz", {c.fit_band.lo_hz, c.fit_band.hi_hz}},
          {"wake_cut", c.thresholds.wake_cut},
          {"rem_cut", c.thresholds.rem_cut},
          {"sparsify_epsilon", c.sparsify_epsilon},
          {"filter_order", c.filter_order},
          {"filter_cutoff_hz", c.filter_cutoff_hz},
          {"zero_phase", c.zero_phase}};
}

template <std::size_t C, typename Names>
ordered_json confusion_json(const Evaluation<C>& ev, const Names& names) {
  ordered_json labels = ordered_json::array();
  for (std::size_t i = 0; i < C; ++i) labels.push_back(names[i]);
  ordered_json counts = ordered_json::array(), norm = ordered_json::array();
  const auto n = ev.confusion.normalized();
  for (std::size_t i = 0; i < C; ++i) {
    counts.push_back(ev.confusion.counts[i]);
    norm.push_back(n[i]);
  }
  ordered_json empty = ordered_json::array();
  for (auto r : ev.confusion.empty_rows()) empty.push_back(names[r]);
  return {{"labels", labels},
          {"confusion", counts},
          {"confusion_row_normalized", norm},
          {"empty_rows", empty},
          {"accuracy", ev.accuracy},
          {"retained_epochs", ev.retained},
          {"excluded_light_sleep", ev.excluded_light_sleep},
          {"excluded_unscored", ev.excluded_unscored}};
}

struct App {
  CLI::App cli{"Spectral-slope arousal estimation from single-channel EEG"};
  PipelineConfig cfg;
  double fit_lo = FitBand{}.lo_hz, fit_hi = FitBand{}.hi_hz;
  std::string preset = "sleep";

  // tapers
  std::string cache_dir, tapers_out;
  // shared input/output
  std::string input, output;
  // psd
  std::string psd_format = "csv";
  long psd_epoch = -1;
  double psd_lo = kAnalysisBandLowHz, psd_hi = kAnalysisBandHighHz;
  // classify / evaluate
  bool binary = false, light_as_reduced = false, allow_partial = false;
  std::string hypnogram, per_epoch;
  // synth
  double beta = 2.0, duration = 3600.0, synth_rate = 200.0, variance = 100.0;
  std::uint64_t seed = 1;
  std::string corpus = "none", hyp_out;
  std::size_t corpus_epochs = 300;
  // bench
  std::size_t bench_epochs = 200;
  double bench_epsilon = 1e-6;

  App() {
    cli.require_subcommand(1);
    cli.set_config("--config", "", "INI/TOML key=value file with pipeline settings")->envname("AROUSAL_CONFIG");
    cli.allow_config_extras(CLI::config_extras_mode::error);

    cli.add_option("--preset", preset, "Defaults for epoch length: sleep (30 s) or anesthesia (10 s)")
        ->check(CLI::IsMember({"sleep", "anesthesia"}));
    cli.add_option("--channel", cfg.channel_label, "Channel to analyze");
    cli.add_option("--epoch", cfg.epoch_s, "Epoch length, s");
    cli.add_option("--rate", cfg.target_rate_hz, "Analysis sample rate, Hz");
    cli.add_option("--smoothing", cfg.nw_smoothing_hz, "Taper half-bandwidth, Hz");
    cli.add_option("--tapers", cfg.n_tapers, "Taper count (0: derived from epoch and smoothing)");
    cli.add_option("--fit-lo", fit_lo, "Slope fit band lower edge, Hz");
    cli.add_option("--fit-hi", fit_hi, "Slope fit band upper edge, Hz");
    cli.add_option("--wake-cut", cfg.thresholds.wake_cut, "Slopes above this are Wake");
    cli.add_option("--rem-cut", cfg.thresholds.rem_cut, "Slopes below this are REM");
    cli.add_option("--epsilon", cfg.sparsify_epsilon, "Taper sparsification threshold (0: dense)");
    cli.add_option("--filter-order", cfg.filter_order, "Butterworth low-pass order");
    cli.add_option("--filter-cutoff", cfg.filter_cutoff_hz, "Butterworth low-pass cutoff, Hz");
    cli.add_flag("--zero-phase", cfg.zero_phase, "Filter forward and backward");
    cli.add_option("--threads", cfg.threads, "Worker threads over epochs")->check(CLI::PositiveNumber);

    auto* tapers = cli.add_subcommand("tapers", "Compute (or load cached) DPSS tapers and print a JSON summary");
    tapers->add_option("--cache-dir", cache_dir, "Directory for the taper cache file");
    tapers->add_option("-o,--output", tapers_out, "Summary output path (default stdout)");
    tapers->callback([this] { run_tapers(); });

    auto* psd = cli.add_subcommand("psd", "Per-epoch multitaper PSD");
    psd->add_option("input", input, "EDF or CSV recording")->required();
    psd->add_option("-o,--output", output, "Output path (default stdout)");
    psd->add_option("--format", psd_format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    psd->add_option("--epoch-index", psd_epoch, "Only this epoch (default: all)");
    psd->add_option("--band-lo", psd_lo, "Lowest reported frequency, Hz");
    psd->add_option("--band-hi", psd_hi, "Highest reported frequency, Hz");
    psd->callback([this] { run_psd(); });

    auto* slope = cli.add_subcommand("slope", "Per-epoch spectral slope (CSV)");
    slope->add_option("input", input, "EDF or CSV recording")->required();
    slope->add_option("-o,--output", output, "Output path (default stdout)");
    slope->callback([this] { run_slope(); });

    auto* classify = cli.add_subcommand("classify", "Per-epoch stage labels (CSV)");
    classify->add_option("input", input, "EDF or CSV recording")->required();
    classify->add_option("-o,--output", output, "Output path (default stdout)");
    classify->add_flag("--binary", binary, "Wake / ReducedArousal instead of Wake / NREM3 / REM");
    classify->callback([this] { run_classify(); });

    auto* evaluate = cli.add_subcommand("evaluate", "Confusion matrix against a hypnogram (JSON)");
    evaluate->add_option("input", input, "EDF or CSV recording")->required();
    evaluate->add_option("hypnogram", hypnogram, "Hypnogram CSV (onset_s,duration_s,stage)")->required();
    evaluate->add_option("-o,--output", output, "Report path (default stdout)");
    evaluate->add_option("--per-epoch", per_epoch, "Also write per-epoch CSV here");
    evaluate->add_flag("--binary", binary, "Two-class Wake / ReducedArousal evaluation");
    evaluate->add_flag("--light-sleep-as-reduced", light_as_reduced, "Binary task: score N1/N2 as ReducedArousal");
    evaluate->add_flag("--allow-partial", allow_partial,
                       "Accept hypnograms that do not cover exactly the analyzed epochs");
    evaluate->callback([this] { run_evaluate(); });

    auto* synth = cli.add_subcommand("synth", "Write synthetic power-law EEG (EDF or CSV)");
    synth->add_option("-o,--output", output, "Output path; .edf writes EDF, anything else CSV")->required();
    synth->add_option("--beta", beta, "Spectral exponent (PSD ~ 1/f^beta)");
    synth->add_option("--duration", duration, "Length, s (single-beta mode)");
    synth->add_option("--sample-rate", synth_rate, "Sample rate of the written signal, Hz");
    synth->add_option("--variance", variance, "Sample variance, uV^2");
    synth->add_option("--seed", seed, "RNG seed");
    synth->add_option("--corpus", corpus, "none, self (labels from beta) or modeled (stage slope distributions)")
        ->check(CLI::IsMember({"none", "self", "modeled"}));
    synth->add_option("--epochs", corpus_epochs, "Corpus length in epochs");
    synth->add_option("--hypnogram-out", hyp_out, "Hypnogram CSV for corpus modes");
    synth->callback([this] { run_synth(); });

    auto* bench = cli.add_subcommand("bench", "Per-stage timing and buffer sizes (JSON)");
    bench->add_option("--epochs", bench_epochs, "Epochs to time (>= 100 recommended)")->check(CLI::PositiveNumber);
    bench->add_option("--compare-epsilon", bench_epsilon, "Epsilon for the dense vs sparse byte comparison");
    bench->add_option("--seed", seed, "RNG seed for the benchmark signal");
    bench->add_option("-o,--output", output, "Report path (default stdout)");
    bench->callback([this] { run_bench_cmd(); });

    // Options given on the main app may also follow the subcommand.
    for (auto* sub : cli.get_subcommands({})) sub->fallthrough();
    cli.parse_complete_callback([this] { finalize_config(); });
  }

  void finalize_config() {
    if (preset == "anesthesia" && cli.count("--epoch") == 0) cfg.epoch_s = PipelineConfig::anesthesia().epoch_s;
    cfg.fit_band = {fit_lo, fit_hi};
    cfg.validate();
  }

  ArousalPipeline make_pipeline() const { return ArousalPipeline(cfg); }

  std::vector<EpochResult> analyze(const ArousalPipeline& p, std::vector<Epoch>* epochs_out = nullptr) const {
    const auto rec = read_recording(input);
    auto eps = p.epochs(rec.channel(cfg.channel_label));
    if (eps.empty()) throw Error(ErrorKind::NoData, "recording is shorter than one epoch");
    auto results = p.analyze_epochs(eps);
    if (epochs_out) *epochs_out = std::move(eps);
    return results;
  }

  void run_tapers() {
    const auto params = cfg.taper_params();
    TaperSet set;
    std::string cache_path;
    if (!cache_dir.empty()) {
      set = load_or_compute_tapers(params, cache_dir);
      cache_path = taper_cache_path(cache_dir, params).string();
    } else {
      set = compute_tapers(params);
    }
    ordered_json j;
    j["n_samples"] = params.n_samples;
    j["sample_rate_hz"] = params.sample_rate_hz;
    j["half_bandwidth_hz"] = params.half_bandwidth_hz;
    j["nw"] = params.nw();
    j["n_tapers"] = set.size();
    j["eigenvalues"] = set.eigenvalues;
    j["gram_deviation"] = set.gram_deviation();
    j["dense_bytes"] = set.dense_storage_bytes();
    if (!cache_path.empty()) j["cache_file"] = cache_path;
    if (cfg.sparsify_epsilon > 0.0) {
      const auto sp = sparsify_tapers(set, cfg.sparsify_epsilon);
      j["sparse"] = {{"epsilon", sp.report.epsilon},
                     {"retained", sp.report.retained},
                     {"density", sp.report.density},
                     {"energy_loss", sp.report.energy_loss},
                     {"gram_deviation", sp.report.gram_deviation},
                     {"sparse_bytes", sp.report.sparse_bytes}};
    }
    Output out(tapers_out);
    out.stream() << j.dump(2) << "\n";
    out.finish();
  }

  void run_psd() {
    const auto p = make_pipeline();
    const auto rec = read_recording(input);
    const auto eps = p.epochs(rec.channel(cfg.channel_label));
    if (eps.empty()) throw Error(ErrorKind::NoData, "recording is shorter than one epoch");
    std::size_t first = 0, last = eps.size();
    if (psd_epoch >= 0) {
      if (std::size_t(psd_epoch) >= eps.size())
        throw Error(ErrorKind::InvalidInput, "epoch index " + std::to_string(psd_epoch) + " out of range (" +
                                                 std::to_string(eps.size()) + " epochs)");
      first = std::size_t(psd_epoch);
      last = first + 1;
    }
    MultitaperEstimator est(p.tapers());
    Output out(output);
    auto& os = out.stream();
    ordered_json arr = ordered_json::array();
    // One epoch: plain freq_hz,power; several: prefixed with the epoch start.
    const bool single = last - first == 1;
    if (psd_format == "csv") os << (single ? "freq_hz,power\n" : "epoch_start_s,freq_hz,power\n");
    for (std::size_t e = first; e < last; ++e) {
      const auto psd = est.estimate(eps[e]).band(psd_lo, psd_hi);
      if (psd_format == "csv") {
        for (std::size_t i = 0; i < psd.freqs_hz.size(); ++i)
          os << (single ? "" : num(psd.epoch_start_s) + ",") << num(psd.freqs_hz[i]) << "," << num(psd.power[i]) << "\n";
      } else {
        arr.push_back({{"epoch_start_s", psd.epoch_start_s},
                       {"n_tapers", psd.n_tapers_used},
                       {"freqs_hz", psd.freqs_hz},
                       {"power", psd.power}});
      }
    }
    if (psd_format == "json") os << arr.dump() << "\n";
    out.finish();
  }

  void run_slope() {
    const auto results = analyze(make_pipeline());
    Output out(output);
    auto& os = out.stream();
    os << "epoch_start_s,slope,intercept,residual_rms\n";
    for (const auto& r : results)
      os << num(r.start_s) << "," << num(r.feature.slope) << "," << num(r.feature.intercept) << ","
         << num(r.feature.residual_rms) << "\n";
    out.finish();
  }

  void run_classify() {
    const auto results = analyze(make_pipeline());
    Output out(output);
    auto& os = out.stream();
    os << "time_s,slope,label\n";
    for (const auto& r : results)
      os << num(r.start_s) << "," << num(r.feature.slope) << ","
         << (binary ? to_string(r.arousal) : to_string(r.stage)) << "\n";
    out.finish();
  }

  void check_coverage(const Hypnogram& hyp, std::span<const Epoch> eps) const {
    if (allow_partial) return;
    std::size_t uncovered = 0;
    for (std::size_t i = 0; i < eps.size(); ++i) {
      bool inside = false;
      for (const auto& e : hyp.entries)
        if (eps[i].start_time_s >= e.onset_s && eps[i].start_time_s < e.onset_s + e.duration_s) inside = true;
      if (!inside) ++uncovered;
    }
    const double hyp_end = hyp.entries.empty() ? 0.0 : hyp.entries.back().onset_s + hyp.entries.back().duration_s;
    const double rec_end = eps.empty() ? 0.0 : eps.back().start_time_s + eps.back().duration_s;
    const auto hyp_epochs = static_cast<long long>(std::llround(hyp_end / cfg.epoch_s));
    if (uncovered > 0 || hyp_end >= rec_end + cfg.epoch_s)
      throw Error(ErrorKind::Alignment, std::to_string(eps.size()) + " analyzed epochs vs a hypnogram spanning " +
                                            std::to_string(hyp_epochs) + " epochs (" + std::to_string(uncovered) +
                                            " epochs unannotated); pass --allow-partial to evaluate the overlap");
  }

  void run_evaluate() {
    const auto hyp = read_hypnogram_file(hypnogram);
    const auto p = make_pipeline();
    std::vector<Epoch> eps;
    const auto results = analyze(p, &eps);
    const auto labels = align_labels(hyp, std::span<const Epoch>(eps));
    check_coverage(hyp, eps);

    ordered_json j;
    j["input"] = input;
    j["hypnogram"] = hypnogram;
    j["task"] = binary ? "binary" : "three_class";
    j["config"] = to_json(cfg);
    j["epochs"] = results.size();
    if (binary) {
      std::vector<Arousal> pred;
      for (const auto& r : results) pred.push_back(r.arousal);
      const auto ev = evaluate_binary(pred, labels, {light_as_reduced});
      const std::array<std::string, 2> names{"Wake", "ReducedArousal"};
      j["light_sleep_as_reduced"] = light_as_reduced;
      j.update(confusion_json(ev, names));
    } else {
      const auto ev = evaluate(stages_of(results), labels);
      const std::array<std::string, 3> names{"Wake", "NREM3", "REM"};
      j.update(confusion_json(ev, names));
    }

    if (!per_epoch.empty()) {
      Output pe(per_epoch);
      pe.stream() << "time_s,slope,predicted,annotated\n";
      for (std::size_t i = 0; i < results.size(); ++i)
        pe.stream() << num(results[i].start_s) << "," << num(results[i].feature.slope) << ","
                    << (binary ? to_string(results[i].arousal) : to_string(results[i].stage)) << ","
                    << to_string(labels[i]) << "\n";
      pe.finish();
    }
    Output out(output);
    out.stream() << j.dump(2) << "\n";
    out.finish();
  }

  void run_synth() {
    Recording rec;
    Hypnogram hyp;
    if (corpus == "none") {
      Channel ch;
      ch.label = cfg.channel_label;
      ch.sample_rate_hz = synth_rate;
      ch.samples = synthesize_powerlaw({beta, duration, synth_rate, seed, variance});
      rec.recording_id = "synthetic power-law beta=" + num(beta);
      rec.channels.push_back(std::move(ch));
    } else {
      const auto plan = corpus == "self"
                            ? self_consistent_corpus_plan(corpus_epochs, seed, {{1.6, 2.3}, {2.6, 3.05}, {3.35, 4.0}})
                            : modeled_corpus_plan(corpus_epochs, seed);
      const auto c = synthesize_corpus(plan, cfg.epoch_s, synth_rate, seed, variance);
      rec = corpus_recording(c, cfg.channel_label);
      hyp = c.hypnogram;
    }
    const bool edf = output.size() > 4 && (output.ends_with(".edf") || output.ends_with(".EDF"));
    if (edf) {
      // Symmetric range with headroom so no sample clips.
      for (auto& ch : rec.channels) {
        double peak = 0.0;
        for (double v : ch.samples) peak = std::max(peak, std::abs(v));
        const double range = std::ceil(peak * 1.05 + 1.0);
        ch.physical_min = -range;
        ch.physical_max = range;
      }
      write_edf_file(output, quantized_for_edf(std::move(rec)));
    } else {
      Output out(output);
      out.stream() << write_csv_recording(rec);
      out.finish();
    }
    if (!hyp_out.empty()) {
      if (corpus == "none") throw Error(ErrorKind::InvalidInput, "--hypnogram-out needs --corpus self|modeled");
      Output out(hyp_out);
      out.stream() << write_hypnogram_csv(hyp);
      out.finish();
    }
  }

  void run_bench_cmd() {
    const auto p = make_pipeline();
    const auto rep = run_bench(p, bench_epochs, bench_epsilon, seed);
    auto stage = [](const StageTiming& t) { return ordered_json{{"median_ms", t.median_ms}, {"p95_ms", t.p95_ms}}; };
    ordered_json j;
    j["config"] = to_json(cfg);
    j["epochs"] = rep.epochs;
    j["epoch_samples"] = rep.epoch_samples;
    j["n_tapers"] = rep.n_tapers;
    j["threads"] = 1;
    j["stages"] = {{"filtering", stage(rep.filtering)},
                   {"psd", stage(rep.psd)},
                   {"slope", stage(rep.slope)},
                   {"classify", stage(rep.classify)},
                   {"total_per_epoch", stage(rep.total)}};
    j["taper_storage_bytes"] = {{"dense", rep.dense_taper_bytes},
                                {"sparse", rep.sparse_taper_bytes},
                                {"epsilon", rep.sparse_epsilon},
                                {"density", rep.sparse_density}};
    j["live_buffer_bytes"] = {{"filtering", rep.filtering_buffer_bytes}, {"psd", rep.psd_buffer_bytes}};
    j["energy"] = "not measured";
    Output out(output);
    out.stream() << j.dump(2) << "\n";
    out.finish();
  }
};

}  // namespace

int main(int argc, char** argv) {
  App app;
  try {
    app.cli.parse(argc, argv);
    return kOk;
  } catch (const CLI::CallForHelp& e) {
    return app.cli.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.cli.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.cli.exit(e);
  } catch (const CLI::ConversionError& e) {
    std::cerr << "bad value: " << e.what() << "\n";
    return kParse;
  } catch (const CLI::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kParse;
  } catch (const CLI::FileError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const CLI::ValidationError& e) {
    std::cerr << "invalid option: " << e.what() << "\n";
    return kValidation;
  } catch (const CLI::ParseError& e) {
    app.cli.exit(e);
    return kUsage;
  } catch (const arousal::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    if (e.kind() == ErrorKind::MissingChannel) std::cerr << "use --channel to pick one of the listed channels\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternal;
  }
}
