#include <gtest/gtest.h>
#include <sys/wait.h>

#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliRun {
  int code = -1;
  std::string out;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("arousal_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path path(const std::string& name) const { return dir_ / name; }

  // Runs the CLI with stdout captured and stderr sent to err.txt.
  CliRun run(const std::string& args, const std::string& env = "") const {
    const std::string cmd = "cd '" + dir_.string() + "' && " + env + " '" AROUSAL_CLI_PATH "' " + args + " 2>err.txt";
    CliRun r;
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) return r;
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
  }

  std::string err() const { return slurp(path("err.txt")); }

  void write(const std::string& name, const std::string& text) const { std::ofstream(path(name)) << text; }

  // label column of classify output
  static std::map<std::string, int> label_counts(const std::string& csv, int* rows = nullptr) {
    std::map<std::string, int> counts;
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    int n = 0;
    while (std::getline(in, line)) {
      counts[line.substr(line.rfind(',') + 1)]++;
      ++n;
    }
    if (rows) *rows = n;
    return counts;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, TapersSleepAndAnesthesiaCounts) {
  auto r = run("tapers");
  ASSERT_EQ(r.code, 0) << err();
  auto j = json::parse(r.out);
  EXPECT_EQ(j["n_tapers"], 29);
  EXPECT_EQ(j["eigenvalues"].size(), 29u);
  EXPECT_LT(j["gram_deviation"].get<double>(), 1e-8);
  r = run("--preset anesthesia tapers");
  ASSERT_EQ(r.code, 0) << err();
  EXPECT_EQ(json::parse(r.out)["n_tapers"], 9);
}

TEST_F(Cli, TapersCacheFileWritten) {
  auto r = run("tapers --cache-dir cache");
  ASSERT_EQ(r.code, 0) << err();
  const auto j = json::parse(r.out);
  ASSERT_TRUE(j.contains("cache_file"));
  EXPECT_TRUE(fs::exists(j["cache_file"].get<std::string>()) || fs::exists(path(j["cache_file"].get<std::string>())));
  EXPECT_EQ(run("tapers --cache-dir cache").out, r.out);
}

TEST_F(Cli, TapersSparseDensityReport) {
  const auto r = run("tapers --epsilon 1e-6");
  ASSERT_EQ(r.code, 0) << err();
  const auto j = json::parse(r.out);
  ASSERT_TRUE(j.contains("sparse"));
  const auto& d = j["sparse"]["density"];
  ASSERT_EQ(d.size(), 29u);
  for (const auto& v : d) {
    EXPECT_GT(v.get<double>(), 0.0);
    EXPECT_LE(v.get<double>(), 1.0);
  }
  EXPECT_LT(d[0].get<double>(), 1.0);
  EXPECT_LE(j["sparse"]["sparse_bytes"].get<long>(), j["dense_bytes"].get<long>());
}

TEST_F(Cli, ClassifyBrownNoiseIsNearlyAllWake) {
  ASSERT_EQ(run("synth -o b2.edf --beta 2 --duration 1200 --seed 1").code, 0) << err();
  const auto r = run("classify b2.edf");
  ASSERT_EQ(r.code, 0) << err();
  int rows = 0;
  auto c = label_counts(r.out, &rows);
  ASSERT_EQ(rows, 40);
  EXPECT_GE(c["Wake"], 36) << "Wake " << c["Wake"] << " NREM3 " << c["NREM3"] << " REM " << c["REM"];
}

TEST_F(Cli, ClassifySteepSpectrumIsRem) {
  ASSERT_EQ(run("synth -o b35.edf --beta 3.5 --duration 1200 --seed 1").code, 0) << err();
  const auto r = run("classify b35.edf");
  ASSERT_EQ(r.code, 0) << err();
  int rows = 0;
  auto c = label_counts(r.out, &rows);
  ASSERT_EQ(rows, 40);
  EXPECT_GE(c["REM"], 36) << "Wake " << c["Wake"] << " NREM3 " << c["NREM3"] << " REM " << c["REM"];
}

TEST_F(Cli, ClassifyBinaryAndCsvInput) {
  ASSERT_EQ(run("synth -o s.csv --beta 1 --duration 90 --seed 2").code, 0) << err();
  const auto r = run("classify --binary s.csv");
  ASSERT_EQ(r.code, 0) << err();
  int rows = 0;
  auto c = label_counts(r.out, &rows);
  EXPECT_EQ(rows, 3);
  EXPECT_EQ(c["Wake"] + c["ReducedArousal"], 3);
}

TEST_F(Cli, SlopeAndPsdOutputs) {
  ASSERT_EQ(run("synth -o s.edf --beta 2 --duration 60 --seed 3").code, 0) << err();
  auto r = run("slope s.edf");
  ASSERT_EQ(r.code, 0) << err();
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "epoch_start_s,slope,intercept,residual_rms");
  r = run("psd s.edf --epoch-index 1");
  ASSERT_EQ(r.code, 0) << err();
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "freq_hz,power");
  int lines = 0;
  for (char ch : r.out) lines += ch == '\n';
  EXPECT_EQ(lines, 1 + 1336);  // 0.5 .. 45 Hz at 1/30 Hz
  r = run("psd s.edf --format json --band-lo 30 --band-hi 45");
  ASSERT_EQ(r.code, 0) << err();
  const auto j = json::parse(r.out);
  ASSERT_TRUE(j.is_array() || j.contains("epochs"));
}

TEST_F(Cli, EmptyChannelIsNoData) {
  write("empty.csv", "# sample_rate_hz=200\nCz\n");
  EXPECT_EQ(run("classify empty.csv").code, 5) << err();
}

TEST_F(Cli, MissingChannelListsAvailable) {
  ASSERT_EQ(run("synth -o s.edf --beta 2 --duration 60 --seed 3").code, 0) << err();
  EXPECT_EQ(run("--channel Pz classify s.edf").code, 5);
  EXPECT_NE(err().find("Cz"), std::string::npos) << err();
}

TEST_F(Cli, UnreadableFileIsIoError) {
  EXPECT_EQ(run("classify does_not_exist.edf").code, 4);
  ASSERT_EQ(run("synth -o s.edf --beta 2 --duration 60 --seed 3").code, 0);
  EXPECT_EQ(run("classify s.edf -o no_such_dir/out.csv").code, 4);
}

TEST_F(Cli, CorruptEdfIsParseError) {
  write("bad.edf", std::string(300, 'x'));
  EXPECT_EQ(run("classify bad.edf").code, 2);
}

TEST_F(Cli, InvalidConfigRejectedBeforeWork) {
  EXPECT_EQ(run("--filter-cutoff 150 tapers").code, 3);
  EXPECT_EQ(run("--fit-lo 45 --fit-hi 30 tapers").code, 3);
  EXPECT_EQ(run("--epoch 30.0025 tapers").code, 3);
  EXPECT_EQ(run("--tapers 31 tapers").code, 3);
  EXPECT_EQ(run("--wake-cut -3.5 --rem-cut -2 tapers").code, 3);
}

TEST_F(Cli, DistinctExitCodes) {
  EXPECT_EQ(run("--no-such-flag tapers").code, 1);
  write("hyp.csv", "onset_s,duration_s,stage\n0,30,W\n30,x,N3\n");
  ASSERT_EQ(run("synth -o s.edf --beta 2 --duration 60 --seed 3").code, 0);
  EXPECT_EQ(run("evaluate s.edf hyp.csv").code, 2);
  write("unknown.ini", "bogus_key=1\n");
  EXPECT_EQ(run("--config unknown.ini tapers").code, 2);
  write("badvalue.ini", "epoch=abc\n");
  EXPECT_EQ(run("--config badvalue.ini tapers").code, 2);
  EXPECT_EQ(run("--epoch abc tapers").code, 2);
  EXPECT_EQ(run("--config missing.ini tapers").code, 4);
}

TEST_F(Cli, ConfigFileEnvAndFlagPrecedence) {
  write("anes.ini", "epoch=10\n");
  auto r = run("--config anes.ini tapers");
  ASSERT_EQ(r.code, 0) << err();
  EXPECT_EQ(json::parse(r.out)["n_tapers"], 9);
  r = run("tapers", "AROUSAL_CONFIG=anes.ini");
  ASSERT_EQ(r.code, 0) << err();
  EXPECT_EQ(json::parse(r.out)["n_tapers"], 9);
  r = run("--config anes.ini --epoch 30 tapers");
  ASSERT_EQ(r.code, 0) << err();
  EXPECT_EQ(json::parse(r.out)["n_tapers"], 29);
  r = run("--epoch 30 tapers", "AROUSAL_CONFIG=anes.ini");
  ASSERT_EQ(r.code, 0) << err();
  EXPECT_EQ(json::parse(r.out)["n_tapers"], 29);
}

TEST_F(Cli, DeterministicOutputs) {
  ASSERT_EQ(run("synth -o a.edf --beta 2.5 --duration 300 --seed 11").code, 0);
  ASSERT_EQ(run("synth -o b.edf --beta 2.5 --duration 300 --seed 11").code, 0);
  EXPECT_EQ(slurp(path("a.edf")), slurp(path("b.edf")));
  const auto x = run("slope a.edf");
  const auto y = run("slope b.edf");
  ASSERT_EQ(x.code, 0);
  EXPECT_EQ(x.out, y.out);
  EXPECT_EQ(run("classify a.edf").out, run("classify a.edf").out);
}

TEST_F(Cli, ThreadsKeepEpochOrder) {
  ASSERT_EQ(run("synth -o a.edf --beta 2.5 --duration 900 --seed 12").code, 0);
  const auto serial = run("classify a.edf");
  const auto par = run("--threads 4 classify a.edf");
  ASSERT_EQ(par.code, 0) << err();
  EXPECT_EQ(serial.out, par.out);
  std::istringstream in(par.out);
  std::string line;
  std::getline(in, line);
  double prev = -1.0;
  while (std::getline(in, line)) {
    const double t = std::stod(line.substr(0, line.find(',')));
    EXPECT_GT(t, prev);
    prev = t;
  }
}

TEST_F(Cli, EvaluateSelfConsistentCorpus) {
  ASSERT_EQ(run("synth -o c.edf --corpus self --epochs 120 --seed 5 --hypnogram-out c.csv").code, 0) << err();
  const auto r = run("evaluate c.edf c.csv");
  ASSERT_EQ(r.code, 0) << err();
  const auto j = json::parse(r.out);
  EXPECT_EQ(j["retained_epochs"], 120);
  EXPECT_GT(j["accuracy"].get<double>(), 0.95);
}

TEST_F(Cli, EvaluateModeledCorpus) {
  ASSERT_EQ(run("synth -o m.edf --corpus modeled --epochs 150 --seed 6 --hypnogram-out m.csv").code, 0) << err();
  const auto r = run("evaluate m.edf m.csv --per-epoch m_epochs.csv");
  ASSERT_EQ(r.code, 0) << err();
  const auto j = json::parse(r.out);
  EXPECT_TRUE(fs::exists(path("m_epochs.csv")));
  const auto& n = j["confusion_row_normalized"];
  for (std::size_t i = 0; i < 3; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < 3; ++k) s += n[i][k].get<double>();
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
  EXPECT_GT(j["accuracy"].get<double>(), 0.80);
}

TEST_F(Cli, EvaluateMismatchedHypnogramIsAlignmentError) {
  ASSERT_EQ(run("synth -o s.edf --beta 2 --duration 90 --seed 3").code, 0);
  std::string hyp = "onset_s,duration_s,stage\n";
  for (int i = 0; i < 10; ++i) hyp += std::to_string(30 * i) + ",30,W\n";
  write("long.csv", hyp);
  EXPECT_EQ(run("evaluate s.edf long.csv").code, 5) << err();
  write("short.csv", "onset_s,duration_s,stage\n0,30,W\n");
  EXPECT_EQ(run("evaluate s.edf short.csv").code, 5) << err();
  EXPECT_EQ(run("evaluate s.edf short.csv --allow-partial").code, 0) << err();
}

TEST_F(Cli, BenchReport) {
  const auto r = run("bench --epochs 100 --compare-epsilon 1e-6");
  ASSERT_EQ(r.code, 0) << err();
  const auto j = json::parse(r.out);
  EXPECT_EQ(j["epochs"], 100);
  for (const char* s : {"filtering", "psd", "slope", "classify", "total_per_epoch"}) {
    ASSERT_TRUE(j["stages"].contains(s)) << s;
    EXPECT_LE(j["stages"][s]["median_ms"].get<double>(), j["stages"][s]["p95_ms"].get<double>()) << s;
  }
  EXPECT_LT(j["stages"]["total_per_epoch"]["median_ms"].get<double>(), 50.0);
  EXPECT_LE(j["taper_storage_bytes"]["sparse"].get<long>(), j["taper_storage_bytes"]["dense"].get<long>());
  EXPECT_EQ(j["energy"], "not measured");
}
