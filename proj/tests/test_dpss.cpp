#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <vector>

#include "arousal/dpss.hpp"

using namespace arousal;

namespace {

constexpr double kPi = std::numbers::pi;

// Full N x N sinc kernel sin(2 pi w (m-n)) / (pi (m-n)), w in cycles/sample.
Eigen::MatrixXd sinc_kernel(std::size_t n, double w) {
  Eigen::MatrixXd a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double d = double(i) - double(j);
      a(i, j) = d == 0.0 ? 2.0 * w : std::sin(2.0 * kPi * w * d) / (kPi * d);
    }
  return a;
}

struct DenseOracle {
  std::vector<double> eigenvalues;       // descending
  std::vector<Eigen::VectorXd> vectors;  // matching order
};

DenseOracle dense_dpss(std::size_t n, double w, std::size_t k) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sinc_kernel(n, w));
  DenseOracle o;
  for (std::size_t i = 0; i < k; ++i) {
    const auto col = static_cast<Eigen::Index>(n - 1 - i);
    o.eigenvalues.push_back(es.eigenvalues()(col));
    o.vectors.push_back(es.eigenvectors().col(col));
  }
  return o;
}

TaperParams params_for(std::size_t n, double nw) {
  // Unit sample rate: W in Hz equals W in cycles/sample.
  TaperParams p;
  p.n_samples = n;
  p.sample_rate_hz = 1.0;
  p.half_bandwidth_hz = nw / double(n);
  p.n_tapers = p.max_well_concentrated();
  return p;
}

}  // namespace

TEST(TaperParams, SleepAndAnesthesiaCounts) {
  const auto sleep = TaperParams::for_epoch(30.0, 200.0, 0.5);
  EXPECT_EQ(sleep.n_samples, 6000u);
  EXPECT_DOUBLE_EQ(sleep.nw(), 15.0);
  EXPECT_EQ(sleep.n_tapers, 29u);
  const auto anes = TaperParams::for_epoch(10.0, 200.0, 0.5);
  EXPECT_EQ(anes.n_samples, 2000u);
  EXPECT_DOUBLE_EQ(anes.nw(), 5.0);
  EXPECT_EQ(anes.n_tapers, 9u);
}

TEST(TaperParams, Validation) {
  auto p = TaperParams::for_epoch(30.0, 200.0, 0.5);
  p.n_tapers = 30;
  try {
    p.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::PoorConcentration);
  }
  EXPECT_NO_THROW(p.validate(true));
  auto q = TaperParams::for_epoch(1.0, 200.0, 100.0);
  q.n_tapers = 1;
  try {
    q.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidSpec);
  }
}

class DenseOracleTest : public ::testing::TestWithParam<std::tuple<std::size_t, double>> {};

TEST_P(DenseOracleTest, MatchesDenseKernelEigensolve) {
  const auto [n, nw] = GetParam();
  const auto p = params_for(n, nw);
  const auto set = compute_tapers(p);
  const auto o = dense_dpss(n, p.half_bandwidth_cycles(), p.n_tapers);
  ASSERT_EQ(set.size(), p.n_tapers);
  for (std::size_t k = 0; k < p.n_tapers; ++k) {
    EXPECT_NEAR(set.eigenvalues[k], o.eigenvalues[k], 1e-8) << "k=" << k;
    const auto g = set.tapers[k].to_dense();
    double dot = 0.0;
    for (std::size_t i = 0; i < n; ++i) dot += g[i] * o.vectors[k](static_cast<Eigen::Index>(i));
    const double sign = dot < 0.0 ? -1.0 : 1.0;
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      worst = std::max(worst, std::abs(g[i] - sign * o.vectors[k](static_cast<Eigen::Index>(i))));
    EXPECT_LT(worst, 1e-6) << "k=" << k;
  }
}

INSTANTIATE_TEST_SUITE_P(SmallN, DenseOracleTest,
                         ::testing::Combine(::testing::Values<std::size_t>(32, 64, 128, 256),
                                            ::testing::Values(2.5, 4.0)));

TEST(Tapers, N64Nw4LeadingEigenvalue) {
  const auto set = compute_tapers(params_for(64, 4.0));
  ASSERT_EQ(set.size(), 7u);
  EXPECT_GT(set.eigenvalues[0], 0.9999);
}

TEST(Tapers, InvariantsAtFullEpochLength) {
  for (double seconds : {30.0, 10.0}) {
    const auto set = compute_tapers(TaperParams::for_epoch(seconds, 200.0, 0.5));
    const std::size_t n = set.params.n_samples;
    EXPECT_LT(set.gram_deviation(), 1e-8);
    for (std::size_t k = 0; k < set.size(); ++k) {
      const auto g = set.tapers[k].to_dense();
      double e = 0.0;
      for (double v : g) e += v * v;
      EXPECT_NEAR(e, 1.0, 1e-10);
      const double parity = k % 2 == 0 ? 1.0 : -1.0;
      for (std::size_t i = 0; i < n / 2; ++i) ASSERT_NEAR(g[i], parity * g[n - 1 - i], 1e-8);
      EXPECT_GT(set.eigenvalues[k], 0.5);
      EXPECT_LE(set.eigenvalues[k], 1.0);
      // Strict decrease wherever double precision can still tell the values apart.
      if (k > 0) {
        EXPECT_LE(set.eigenvalues[k], set.eigenvalues[k - 1] + 1e-14);
        if (1.0 - set.eigenvalues[k] > 1e-12) EXPECT_LT(set.eigenvalues[k], set.eigenvalues[k - 1]);
      }
    }
    EXPECT_GT(set.eigenvalues[0], 0.99);
  }
}

TEST(Tapers, EigenvaluesStrictlyDecreasingWhenRepresentable) {
  const auto set = compute_tapers(params_for(256, 4.0));
  for (std::size_t k = 1; k < set.size(); ++k) EXPECT_LT(set.eigenvalues[k], set.eigenvalues[k - 1]);
  for (double l : set.eigenvalues) {
    EXPECT_GT(l, 0.0);
    EXPECT_LT(l, 1.0);
  }
}

TEST(Tapers, SignConvention) {
  const auto set = compute_tapers(params_for(128, 4.0));
  for (std::size_t k = 0; k < set.size(); ++k) {
    const auto g = set.tapers[k].to_dense();
    if (k % 2 == 0) {
      double s = 0.0;
      for (double v : g) s += v;
      EXPECT_GT(s, 0.0);
    } else {
      // First sample with appreciable magnitude is positive, so the first lobe rises.
      for (double v : g)
        if (v * v > 1.0 / 128.0) {
          EXPECT_GT(v, 0.0) << k;
          break;
        }
    }
  }
}

TEST(Tapers, DeterministicAcrossCalls) {
  const auto a = compute_tapers(params_for(200, 3.0));
  const auto b = compute_tapers(params_for(200, 3.0));
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(a.tapers[k].to_dense(), b.tapers[k].to_dense());
}

TEST(Concentration, RayleighQuotientOfLeadingTaper) {
  const auto p = params_for(64, 4.0);
  const auto set = compute_tapers(p);
  const auto o = dense_dpss(64, p.half_bandwidth_cycles(), 1);
  EXPECT_NEAR(concentration_of(set.tapers[0].to_dense(), p.half_bandwidth_hz, p.sample_rate_hz), o.eigenvalues[0],
              1e-8);
}

TEST(Concentration, DcAndNyquistExtremes) {
  const std::vector<double> dc(64, 1.0);
  EXPECT_GT(concentration_of(dc, 0.49, 1.0), 0.99);
  std::vector<double> alt(64);
  for (std::size_t i = 0; i < alt.size(); ++i) alt[i] = i % 2 ? -1.0 : 1.0;
  const double lam = concentration_of(alt, 0.05, 1.0);
  // Direct quadratic form with the dense kernel.
  const auto a = sinc_kernel(64, 0.05);
  Eigen::Map<const Eigen::VectorXd> v(alt.data(), 64);
  EXPECT_NEAR(lam, v.dot(a * v) / v.squaredNorm(), 1e-12);
  EXPECT_LT(lam, 0.01);
}

TEST(Concentration, MatchesFineGridIntegral) {
  // In-band fraction of |X(f)|^2 by midpoint integration over [-1/2, 1/2).
  const auto p = params_for(48, 3.0);
  const auto g = compute_tapers(p).tapers[2].to_dense();
  const int grid = 20000;
  double in = 0.0, all = 0.0;
  for (int i = 0; i < grid; ++i) {
    const double f = -0.5 + (i + 0.5) / grid;
    std::complex<double> x = 0.0;
    for (std::size_t n = 0; n < g.size(); ++n) x += g[n] * std::polar(1.0, -2.0 * kPi * f * double(n));
    all += std::norm(x);
    if (std::abs(f) <= p.half_bandwidth_hz) in += std::norm(x);
  }
  EXPECT_NEAR(concentration_of(g, p.half_bandwidth_hz, 1.0), in / all, 1e-4);
}

TEST(Concentration, RejectsZeroEnergy) {
  try {
    concentration_of(std::vector<double>(16, 0.0), 0.1, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidInput);
  }
}

TEST(Sparsify, EpsilonZeroIsIdentity) {
  const auto set = compute_tapers(params_for(128, 4.0));
  const auto sp = sparsify_tapers(set, 0.0);
  for (std::size_t k = 0; k < set.size(); ++k) {
    EXPECT_EQ(sp.tapers.tapers[k].to_dense(), set.tapers[k].to_dense());
    EXPECT_DOUBLE_EQ(sp.report.density[k], 1.0);
  }
}

TEST(Sparsify, SleepSetAtOneInAMillion) {
  const auto set = compute_tapers(TaperParams::for_epoch(30.0, 200.0, 0.5));
  const double eps = 1e-6;
  const auto sp = sparsify_tapers(set, eps);
  // Low-order tapers are concentrated mid-epoch, so they thin out most.
  EXPECT_LT(sp.report.density.front(), sp.report.density.back());
  EXPECT_LT(sp.report.density.front(), 1.0);
  EXPECT_LE(sp.report.sparse_bytes, sp.report.dense_bytes);
  for (std::size_t k = 0; k < set.size(); ++k) {
    const auto d = set.tapers[k].to_dense();
    const auto s = sp.tapers.tapers[k].to_dense();
    if (const auto* v = sp.tapers.tapers[k].sparse()) {
      for (std::size_t i = 1; i < v->indices.size(); ++i) EXPECT_LT(v->indices[i - 1], v->indices[i]);
      for (double x : v->values) EXPECT_NE(x, 0.0);
    }
    for (std::size_t i = 0; i < d.size(); ++i) ASSERT_LE(std::abs(d[i] - s[i]), eps);
  }
  EXPECT_LT(sp.report.gram_deviation, 1e-5);
  EXPECT_TRUE(sp.tapers.tapers.front().is_sparse());
}

TEST(Sparsify, RefusesLargeEnergyLoss) {
  const auto set = compute_tapers(params_for(128, 4.0));
  try {
    sparsify_tapers(set, 0.2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Degradation);
  }
  EXPECT_THROW(sparsify_tapers(set, -1.0), Error);
}

TEST(TaperCache, RoundTripAndCorruption) {
  const auto set = compute_tapers(params_for(100, 2.5));
  const auto bytes = encode_taper_cache(set);
  ASSERT_EQ(bytes.size(), kTaperCacheHeaderBytes + (set.size() * 100 + set.size()) * 8);
  const auto back = decode_taper_cache(bytes);
  EXPECT_TRUE(back.params == set.params);
  EXPECT_EQ(back.eigenvalues, set.eigenvalues);
  for (std::size_t k = 0; k < set.size(); ++k) EXPECT_EQ(back.tapers[k].to_dense(), set.tapers[k].to_dense());

  auto bad = bytes;
  bad[0] = 'X';
  try {
    decode_taper_cache(bad);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.position(), 0u);
  }
  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  EXPECT_THROW(decode_taper_cache(truncated), ParseError);
}

TEST(TaperCache, LoadOrComputeReusesFile) {
  const auto dir = std::filesystem::temp_directory_path() / "arousal_taper_cache_test";
  std::filesystem::remove_all(dir);
  const auto p = params_for(90, 2.5);
  const auto first = load_or_compute_tapers(p, dir);
  const auto path = taper_cache_path(dir, p);
  ASSERT_TRUE(std::filesystem::exists(path));
  const auto second = load_or_compute_tapers(p, dir);
  for (std::size_t k = 0; k < first.size(); ++k) EXPECT_EQ(first.tapers[k].to_dense(), second.tapers[k].to_dense());
  std::filesystem::remove_all(dir);
}
