#pragma once

// Discrete prolate spheroidal (Slepian) sequences.
//
// The tapers are the top eigenvectors of the N x N sinc kernel
//   A(n, m) = sin(2 pi w (n - m)) / (pi (n - m)),   w = W / Fs (cycles/sample),
// whose eigenvalues are the in-band energy concentrations. Solving that dense
// problem at N = 6000 is impractical, so the production path uses the
// symmetric tridiagonal matrix that commutes with A:
//   diag(n)        = ((N - 1 - 2n) / 2)^2 cos(2 pi w)
//   offdiag(n-1,n) = n (N - n) / 2
// It has the same eigenvectors with well separated eigenvalues. Eigenvalues
// are isolated by Sturm-sequence bisection and the vectors recovered by
// inverse iteration. Concentrations are then the Rayleigh quotients with A,
// evaluated in O(N log N) from the taper autocorrelation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "arousal/byte_io.hpp"
#include "arousal/error.hpp"
#include "arousal/fft.hpp"

namespace arousal {

struct TaperParams {
  std::size_t n_samples = 0;
  double half_bandwidth_hz = 0.0;
  double sample_rate_hz = 0.0;
  std::size_t n_tapers = 0;

  // Time-half-bandwidth product N W / Fs.
  double nw() const noexcept { return double(n_samples) * half_bandwidth_hz / sample_rate_hz; }
  double half_bandwidth_cycles() const noexcept { return half_bandwidth_hz / sample_rate_hz; }

  // Tapers beyond 2NW - 1 have poor concentration.
  std::size_t max_well_concentrated() const noexcept {
    const long k = std::lround(2.0 * nw()) - 1;
    return k < 1 ? 1 : static_cast<std::size_t>(k);
  }

  // Parameters for an epoch of `duration_s` seconds smoothed over
  // `smoothing_hz` (the half-bandwidth W). NW = duration * W; K defaults to
  // 2NW - 1, which yields 29 tapers for 30 s and 9 for 10 s at 0.5 Hz.
  static TaperParams for_epoch(double duration_s, double sample_rate_hz, double smoothing_hz,
                               std::size_t n_tapers = 0) {
    TaperParams p;
    p.n_samples = static_cast<std::size_t>(std::llround(duration_s * sample_rate_hz));
    p.half_bandwidth_hz = smoothing_hz;
    p.sample_rate_hz = sample_rate_hz;
    p.n_tapers = n_tapers == 0 ? p.max_well_concentrated() : n_tapers;
    return p;
  }

  void validate(bool allow_poor_concentration = false) const {
    if (n_samples < 2) throw Error(ErrorKind::InvalidSpec, "taper length must be >= 2");
    if (!(sample_rate_hz > 0.0)) throw Error(ErrorKind::InvalidSpec, "sample rate must be > 0");
    if (!(half_bandwidth_hz > 0.0) || !(half_bandwidth_hz < sample_rate_hz / 2.0))
      throw Error(ErrorKind::InvalidSpec, "half-bandwidth must satisfy 0 < W < Fs/2");
    if (n_tapers < 1) throw Error(ErrorKind::InvalidSpec, "at least one taper is required");
    if (n_tapers > n_samples) throw Error(ErrorKind::InvalidSpec, "more tapers than samples");
    if (!allow_poor_concentration && n_tapers > max_well_concentrated())
      throw Error(ErrorKind::PoorConcentration,
                  "K = " + std::to_string(n_tapers) + " exceeds 2NW - 1 = " +
                      std::to_string(max_well_concentrated()) + "; trailing tapers leak");
  }

  bool operator==(const TaperParams&) const = default;
};

struct SparseVector {
  std::vector<std::uint32_t> indices;  // strictly increasing
  std::vector<double> values;          // nonzero
  std::size_t length = 0;
  double truncation_epsilon = 0.0;

  std::size_t nonzeros() const noexcept { return values.size(); }
  double density() const noexcept { return length == 0 ? 0.0 : double(values.size()) / double(length); }
  std::size_t storage_bytes() const noexcept {
    return indices.size() * sizeof(std::uint32_t) + values.size() * sizeof(double);
  }

  std::vector<double> to_dense() const {
    std::vector<double> out(length, 0.0);
    for (std::size_t i = 0; i < values.size(); ++i) out[indices[i]] = values[i];
    return out;
  }

  static SparseVector from_dense(std::span<const double> dense, double epsilon) {
    SparseVector s;
    s.length = dense.size();
    s.truncation_epsilon = epsilon;
    for (std::size_t i = 0; i < dense.size(); ++i) {
      if (dense[i] != 0.0 && std::abs(dense[i]) >= epsilon) {
        s.indices.push_back(static_cast<std::uint32_t>(i));
        s.values.push_back(dense[i]);
      }
    }
    return s;
  }
};

// One taper, stored dense or sparse.
class Taper {
 public:
  Taper() = default;
  explicit Taper(std::vector<double> dense) : data_(std::move(dense)) {}
  explicit Taper(SparseVector sparse) : data_(std::move(sparse)) {}

  bool is_sparse() const noexcept { return std::holds_alternative<SparseVector>(data_); }

  std::size_t size() const noexcept {
    if (auto* d = std::get_if<std::vector<double>>(&data_)) return d->size();
    return std::get<SparseVector>(data_).length;
  }

  std::size_t nonzeros() const noexcept {
    if (auto* d = std::get_if<std::vector<double>>(&data_)) return d->size();
    return std::get<SparseVector>(data_).nonzeros();
  }

  std::size_t storage_bytes() const noexcept {
    if (auto* d = std::get_if<std::vector<double>>(&data_)) return d->size() * sizeof(double);
    return std::get<SparseVector>(data_).storage_bytes();
  }

  std::vector<double> to_dense() const {
    if (auto* d = std::get_if<std::vector<double>>(&data_)) return *d;
    return std::get<SparseVector>(data_).to_dense();
  }

  const SparseVector* sparse() const noexcept { return std::get_if<SparseVector>(&data_); }
  const std::vector<double>* dense() const noexcept { return std::get_if<std::vector<double>>(&data_); }

  // out[n] = g[n] * x[n]
  void apply(std::span<const double> x, std::span<double> out) const {
    if (auto* d = std::get_if<std::vector<double>>(&data_)) {
      for (std::size_t n = 0; n < d->size(); ++n) out[n] = (*d)[n] * x[n];
      return;
    }
    const auto& s = std::get<SparseVector>(data_);
    std::fill(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(s.length), 0.0);
    for (std::size_t i = 0; i < s.values.size(); ++i) out[s.indices[i]] = s.values[i] * x[s.indices[i]];
  }

  double dot(const Taper& other) const {
    const auto a = to_dense();
    const auto b = other.to_dense();
    double acc = 0.0;
    for (std::size_t n = 0; n < a.size(); ++n) acc += a[n] * b[n];
    return acc;
  }

 private:
  std::variant<std::vector<double>, SparseVector> data_;
};

struct TaperSet {
  TaperParams params;
  std::vector<Taper> tapers;
  std::vector<double> eigenvalues;  // concentration, non-increasing

  std::size_t size() const noexcept { return tapers.size(); }

  std::size_t storage_bytes() const noexcept {
    std::size_t total = eigenvalues.size() * sizeof(double);
    for (const auto& t : tapers) total += t.storage_bytes();
    return total;
  }

  std::size_t dense_storage_bytes() const noexcept {
    return (tapers.size() * params.n_samples + eigenvalues.size()) * sizeof(double);
  }

  // max |G - I| over the Gram matrix of the tapers.
  double gram_deviation() const {
    std::vector<std::vector<double>> dense;
    dense.reserve(tapers.size());
    for (const auto& t : tapers) dense.push_back(t.to_dense());
    double worst = 0.0;
    for (std::size_t i = 0; i < dense.size(); ++i) {
      for (std::size_t j = i; j < dense.size(); ++j) {
        double acc = 0.0;
        for (std::size_t n = 0; n < dense[i].size(); ++n) acc += dense[i][n] * dense[j][n];
        worst = std::max(worst, std::abs(acc - (i == j ? 1.0 : 0.0)));
      }
    }
    return worst;
  }
};

namespace detail {

// Autocorrelation-based quadratic form g' A g for the sinc kernel with
// half-bandwidth w (cycles/sample).
inline double sinc_quadratic_form(std::span<const double> g, double w) {
  const std::size_t n = g.size();
  RealFft fft(2 * n);
  auto buf = fft.real();
  std::fill(buf.begin(), buf.end(), 0.0);
  std::copy(g.begin(), g.end(), buf.begin());
  fft.forward();
  for (auto& c : fft.spectrum()) c = std::norm(c);
  fft.inverse();
  const double scale = 1.0 / double(2 * n);
  double acc = 2.0 * w * buf[0] * scale;
  for (std::size_t m = 1; m < n; ++m) {
    const double kernel = std::sin(2.0 * std::numbers::pi * w * double(m)) / (std::numbers::pi * double(m));
    acc += 2.0 * kernel * buf[m] * scale;
  }
  return acc;
}

// Symmetric tridiagonal matrix; off[i] couples rows i and i+1.
struct Tridiagonal {
  std::vector<double> diag;
  std::vector<double> off;

  std::size_t size() const noexcept { return diag.size(); }

  // Number of eigenvalues strictly below x (Sturm sequence of the LDL' pivots).
  std::size_t count_below(double x) const {
    const double tiny = std::numeric_limits<double>::min();
    std::size_t count = 0;
    double q = diag[0] - x;
    if (q < 0.0) ++count;
    for (std::size_t i = 1; i < diag.size(); ++i) {
      if (q == 0.0) q = tiny;
      q = diag[i] - x - off[i - 1] * off[i - 1] / q;
      if (q < 0.0) ++count;
    }
    return count;
  }

  void gershgorin(double& lo, double& hi) const {
    lo = std::numeric_limits<double>::infinity();
    hi = -lo;
    for (std::size_t i = 0; i < diag.size(); ++i) {
      const double r = (i > 0 ? std::abs(off[i - 1]) : 0.0) + (i + 1 < diag.size() ? std::abs(off[i]) : 0.0);
      lo = std::min(lo, diag[i] - r);
      hi = std::max(hi, diag[i] + r);
    }
  }

  // Eigenvalue number `index` in ascending order, to machine precision.
  double eigenvalue(std::size_t index, double lo, double hi) const {
    for (int iter = 0; iter < 256; ++iter) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      if (count_below(mid) > index)
        hi = mid;
      else
        lo = mid;
    }
    return 0.5 * (lo + hi);
  }
};

// LU factorization with partial pivoting of (T - shift I), LAPACK dgttrf layout.
class ShiftedTridiagonalLu {
 public:
  ShiftedTridiagonalLu(const Tridiagonal& t, double shift, double norm)
      : n_(t.size()), dl_(t.off), d_(t.diag), du_(t.off), du2_(n_ > 2 ? n_ - 2 : 0, 0.0), pivot_(n_, false) {
    for (auto& v : d_) v -= shift;
    for (std::size_t i = 0; i + 1 < n_; ++i) {
      if (std::abs(d_[i]) >= std::abs(dl_[i])) {
        if (d_[i] != 0.0) {
          const double fact = dl_[i] / d_[i];
          dl_[i] = fact;
          d_[i + 1] -= fact * du_[i];
        }
      } else {
        const double fact = d_[i] / dl_[i];
        d_[i] = dl_[i];
        dl_[i] = fact;
        const double temp = du_[i];
        du_[i] = d_[i + 1];
        d_[i + 1] = temp - fact * d_[i + 1];
        if (i + 2 < n_) {
          du2_[i] = du_[i + 1];
          du_[i + 1] = -fact * du_[i + 1];
        }
        pivot_[i] = true;
      }
    }
    // Near-singular by construction (the shift is an eigenvalue); keep pivots
    // away from exact zero so the solve stays finite.
    const double floor = std::numeric_limits<double>::epsilon() * norm;
    for (auto& v : d_) {
      if (std::abs(v) < floor) v = std::copysign(floor, v == 0.0 ? 1.0 : v);
    }
  }

  void solve(std::span<double> b) const {
    for (std::size_t i = 0; i + 1 < n_; ++i) {
      if (!pivot_[i]) {
        b[i + 1] -= dl_[i] * b[i];
      } else {
        const double temp = b[i] - dl_[i] * b[i + 1];
        b[i] = b[i + 1];
        b[i + 1] = temp;
      }
    }
    b[n_ - 1] /= d_[n_ - 1];
    if (n_ > 1) b[n_ - 2] = (b[n_ - 2] - du_[n_ - 2] * b[n_ - 1]) / d_[n_ - 2];
    for (std::size_t k = n_; k-- > 2;) {
      const std::size_t i = k - 2;
      b[i] = (b[i] - du_[i] * b[i + 1] - du2_[i] * b[i + 2]) / d_[i];
    }
  }

 private:
  std::size_t n_;
  std::vector<double> dl_, d_, du_, du2_;
  std::vector<bool> pivot_;
};

inline void normalize(std::span<double> v) {
  double e = 0.0;
  for (double x : v) e += x * x;
  const double inv = 1.0 / std::sqrt(e);
  for (double& x : v) x *= inv;
}

inline void orthogonalize(std::span<double> v, const std::vector<std::vector<double>>& basis) {
  for (const auto& b : basis) {
    double proj = 0.0;
    for (std::size_t n = 0; n < v.size(); ++n) proj += v[n] * b[n];
    for (std::size_t n = 0; n < v.size(); ++n) v[n] -= proj * b[n];
  }
}

inline Tridiagonal slepian_tridiagonal(std::size_t n, double w) {
  Tridiagonal t;
  t.diag.resize(n);
  t.off.resize(n - 1);
  const double c = std::cos(2.0 * std::numbers::pi * w);
  for (std::size_t i = 0; i < n; ++i) {
    const double h = (double(n) - 1.0 - 2.0 * double(i)) / 2.0;
    t.diag[i] = h * h * c;
  }
  for (std::size_t i = 1; i < n; ++i) t.off[i - 1] = double(i) * double(n - i) / 2.0;
  return t;
}

}  // namespace detail

// Fraction of a sequence's spectral energy inside [-W, W]: the ratio of the
// in-band integral of |X(f)|^2 to the full-band integral, evaluated as the
// Rayleigh quotient g' A g / g' g with the sinc kernel A.
inline double concentration_of(std::span<const double> taper, double half_bandwidth_hz, double sample_rate_hz) {
  if (!(sample_rate_hz > 0.0) || !(half_bandwidth_hz > 0.0) || !(half_bandwidth_hz < sample_rate_hz / 2.0))
    throw Error(ErrorKind::InvalidSpec, "half-bandwidth must satisfy 0 < W < Fs/2");
  if (taper.empty()) throw Error(ErrorKind::InvalidInput, "empty sequence");
  double energy = 0.0;
  for (double v : taper) {
    if (!std::isfinite(v)) throw Error(ErrorKind::InvalidInput, "sequence is not finite");
    energy += v * v;
  }
  if (!(energy > 0.0) || !std::isfinite(energy))
    throw Error(ErrorKind::InvalidInput, "sequence must have finite, nonzero energy");
  const double q = detail::sinc_quadratic_form(taper, half_bandwidth_hz / sample_rate_hz) / energy;
  return std::clamp(q, 0.0, 1.0);
}

struct TaperOptions {
  bool allow_poor_concentration = false;
  int inverse_iterations = 3;  // plus one refinement pass
};

inline TaperSet compute_tapers(const TaperParams& params, const TaperOptions& options = {}) {
  params.validate(options.allow_poor_concentration);
  const std::size_t n = params.n_samples;
  const std::size_t k_count = params.n_tapers;
  const double w = params.half_bandwidth_cycles();

  const auto tri = detail::slepian_tridiagonal(n, w);
  double lo = 0.0, hi = 0.0;
  tri.gershgorin(lo, hi);
  const double norm = std::max(std::abs(lo), std::abs(hi));

  std::mt19937_64 rng(0x5eed5eedULL);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);

  std::vector<std::vector<double>> vecs;
  vecs.reserve(k_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    // k-th largest eigenvalue of T.
    const double theta = tri.eigenvalue(n - 1 - k, lo, hi);
    detail::ShiftedTridiagonalLu lu(tri, theta, norm);

    std::vector<double> v(n);
    for (auto& x : v) x = uni(rng);
    detail::normalize(v);
    for (int it = 0; it < options.inverse_iterations + 1; ++it) {
      lu.solve(v);
      detail::orthogonalize(v, vecs);
      detail::normalize(v);
    }

    // Exact parity: even k symmetric, odd k antisymmetric about the centre.
    const double parity = (k % 2 == 0) ? 1.0 : -1.0;
    for (std::size_t i = 0; i < n / 2; ++i) {
      const double a = 0.5 * (v[i] + parity * v[n - 1 - i]);
      v[i] = a;
      v[n - 1 - i] = parity * a;
    }
    if (n % 2 == 1 && parity < 0.0) v[n / 2] = 0.0;
    detail::normalize(v);

    // Sign convention: positive mean for symmetric tapers, positive first
    // lobe (first sample above the noise floor) for antisymmetric ones.
    if (k % 2 == 0) {
      double sum = 0.0;
      for (double x : v) sum += x;
      if (sum < 0.0)
        for (double& x : v) x = -x;
    } else {
      const double thresh = std::max(1e-7, 1.0 / double(n));
      for (double x : v) {
        if (x * x > thresh) {
          if (x < 0.0)
            for (double& y : v) y = -y;
          break;
        }
      }
    }
    vecs.push_back(std::move(v));
  }

  TaperSet set;
  set.params = params;
  set.tapers.reserve(k_count);
  set.eigenvalues.reserve(k_count);
  for (auto& v : vecs) {
    set.eigenvalues.push_back(std::clamp(detail::sinc_quadratic_form(v, w), 0.0, 1.0));
    set.tapers.emplace_back(std::move(v));
  }
  return set;
}

struct SparsifyReport {
  double epsilon = 0.0;
  std::vector<std::size_t> retained;  // per taper
  std::vector<double> density;        // retained / N
  std::vector<double> energy_loss;    // 1 - sum of retained g^2
  double gram_deviation = 0.0;        // worst-case orthonormality after truncation
  std::size_t dense_bytes = 0;
  std::size_t sparse_bytes = 0;
};

struct SparsifiedTapers {
  TaperSet tapers;
  SparsifyReport report;
};

// Largest per-taper energy loss tolerated by sparsification.
inline constexpr double kMaxSparsifyEnergyLoss = 0.01;

// Drops taper entries with |g| < epsilon. Entries that survive are stored
// bit-for-bit, so the per-element reconstruction error is below epsilon.
inline SparsifiedTapers sparsify_tapers(const TaperSet& set, double epsilon) {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon))
    throw Error(ErrorKind::InvalidInput, "sparsification epsilon must be finite and >= 0");

  SparsifiedTapers out;
  out.tapers.params = set.params;
  out.tapers.eigenvalues = set.eigenvalues;
  out.report.epsilon = epsilon;
  out.report.dense_bytes = set.dense_storage_bytes();

  for (std::size_t k = 0; k < set.size(); ++k) {
    const auto dense = set.tapers[k].to_dense();
    double energy = 0.0;
    for (double v : dense) energy += v * v;
    if (epsilon == 0.0) {
      out.tapers.tapers.emplace_back(dense);
      out.report.retained.push_back(dense.size());
      out.report.density.push_back(1.0);
      out.report.energy_loss.push_back(0.0);
      continue;
    }
    auto sparse = SparseVector::from_dense(dense, epsilon);
    double kept = 0.0;
    for (double v : sparse.values) kept += v * v;
    const double loss = energy > 0.0 ? 1.0 - kept / energy : 0.0;
    if (loss > kMaxSparsifyEnergyLoss) {
      std::ostringstream msg;
      msg << "epsilon " << epsilon << " removes " << loss * 100.0 << "% of taper " << k << "'s energy";
      throw Error(ErrorKind::Degradation, msg.str());
    }
    out.report.retained.push_back(sparse.nonzeros());
    out.report.density.push_back(sparse.density());
    out.report.energy_loss.push_back(loss);
    // Index + value pairs only pay off below about 2/3 density; denser
    // tapers keep the truncated values in place instead.
    if (sparse.storage_bytes() < dense.size() * sizeof(double))
      out.tapers.tapers.emplace_back(std::move(sparse));
    else
      out.tapers.tapers.emplace_back(sparse.to_dense());
  }
  out.report.sparse_bytes = out.tapers.storage_bytes();
  out.report.gram_deviation = out.tapers.gram_deviation();
  return out;
}

// ---------------------------------------------------------------------------
// Taper cache file (all integers and floats little-endian):
//   0   8 bytes  magic "ARSLDPSS"
//   8   u32      format version (1)
//   12  u32      reserved, 0
//   16  u64      N (samples per taper)
//   24  u64      K (taper count)
//   32  f64      half-bandwidth W, Hz
//   40  f64      sample rate Fs, Hz
//   48  f64[K*N] tapers, row-major (taper k, sample n), always dense
//   ..  f64[K]   concentration eigenvalues
// ---------------------------------------------------------------------------

inline constexpr char kTaperCacheMagic[8] = {'A', 'R', 'S', 'L', 'D', 'P', 'S', 'S'};
inline constexpr std::uint32_t kTaperCacheVersion = 1;
inline constexpr std::size_t kTaperCacheHeaderBytes = 48;

inline std::vector<std::uint8_t> encode_taper_cache(const TaperSet& set) {
  std::vector<std::uint8_t> out;
  const std::size_t n = set.params.n_samples;
  const std::size_t k = set.size();
  out.reserve(kTaperCacheHeaderBytes + (k * n + k) * 8);
  for (char c : kTaperCacheMagic) out.push_back(static_cast<std::uint8_t>(c));
  bytes::put_le<std::uint32_t>(out, kTaperCacheVersion);
  bytes::put_le<std::uint32_t>(out, 0);
  bytes::put_le<std::uint64_t>(out, n);
  bytes::put_le<std::uint64_t>(out, k);
  bytes::put_le<double>(out, set.params.half_bandwidth_hz);
  bytes::put_le<double>(out, set.params.sample_rate_hz);
  for (const auto& t : set.tapers)
    for (double v : t.to_dense()) bytes::put_le<double>(out, v);
  for (double l : set.eigenvalues) bytes::put_le<double>(out, l);
  return out;
}

inline TaperSet decode_taper_cache(std::span<const std::uint8_t> data) {
  using PE = ParseError;
  if (data.size() < kTaperCacheHeaderBytes)
    throw PE(ErrorKind::Parse, PE::Where::Byte, data.size(), "taper cache truncated inside header");
  for (std::size_t i = 0; i < 8; ++i)
    if (data[i] != static_cast<std::uint8_t>(kTaperCacheMagic[i]))
      throw PE(ErrorKind::Parse, PE::Where::Byte, i, "bad taper cache magic");
  const auto version = bytes::get_le<std::uint32_t>(data, 8);
  if (version != kTaperCacheVersion)
    throw PE(ErrorKind::Parse, PE::Where::Byte, 8, "unsupported taper cache version " + std::to_string(version));

  TaperSet set;
  set.params.n_samples = bytes::get_le<std::uint64_t>(data, 16);
  set.params.n_tapers = bytes::get_le<std::uint64_t>(data, 24);
  set.params.half_bandwidth_hz = bytes::get_le<double>(data, 32);
  set.params.sample_rate_hz = bytes::get_le<double>(data, 40);
  const std::size_t n = set.params.n_samples;
  const std::size_t k = set.params.n_tapers;
  if (n == 0 || k == 0 || n > (std::size_t{1} << 32) || k > n)
    throw PE(ErrorKind::Parse, PE::Where::Byte, 16, "implausible taper cache dimensions");
  const std::size_t expected = kTaperCacheHeaderBytes + (k * n + k) * 8;
  if (data.size() != expected)
    throw PE(ErrorKind::Parse, PE::Where::Byte, std::min(data.size(), expected),
             "taper cache payload is " + std::to_string(data.size()) + " bytes, expected " +
                 std::to_string(expected));

  std::size_t off = kTaperCacheHeaderBytes;
  for (std::size_t t = 0; t < k; ++t) {
    std::vector<double> v(n);
    for (auto& x : v) {
      x = bytes::get_le<double>(data, off);
      off += 8;
    }
    set.tapers.emplace_back(std::move(v));
  }
  for (std::size_t t = 0; t < k; ++t, off += 8) set.eigenvalues.push_back(bytes::get_le<double>(data, off));
  return set;
}

inline std::filesystem::path taper_cache_path(const std::filesystem::path& dir, const TaperParams& p) {
  std::ostringstream name;
  name << "dpss_N" << p.n_samples << "_NW" << p.nw() << "_K" << p.n_tapers << "_fs" << p.sample_rate_hz << ".bin";
  return dir / name.str();
}

inline void save_taper_cache(const std::filesystem::path& path, const TaperSet& set) {
  bytes::write_file(path, encode_taper_cache(set));
}

inline TaperSet load_taper_cache(const std::filesystem::path& path) {
  return decode_taper_cache(bytes::read_file(path));
}

// Reads the cached set for `params` from `dir`, computing and storing it on a
// miss or on a stale file whose header disagrees with `params`.
inline TaperSet load_or_compute_tapers(const TaperParams& params, const std::filesystem::path& dir,
                                       const TaperOptions& options = {}) {
  const auto path = taper_cache_path(dir, params);
  if (std::filesystem::exists(path)) {
    try {
      auto set = load_taper_cache(path);
      if (set.params == params) return set;
    } catch (const Error&) {
      // fall through and rebuild
    }
  }
  auto set = compute_tapers(params, options);
  std::filesystem::create_directories(dir);
  save_taper_cache(path, set);
  return set;
}

}  // namespace arousal
