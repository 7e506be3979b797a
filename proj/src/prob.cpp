#include "rainsim/prob.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rainsim/errors.hpp"

namespace rainsim {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// SplitMix64 finalizer (Stafford mix 13 variant).
std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

double gamma_log_pdf(const GammaParams& params, double x) {
  if (!(params.shape > 0.0) || !(params.scale > 0.0)) {
    throw std::domain_error("gamma_log_pdf: shape and scale must be positive");
  }
  if (!(x > 0.0)) {
    throw std::domain_error("gamma_log_pdf: x must be positive");
  }
  return -std::lgamma(params.shape) - params.shape * std::log(params.scale) +
         (params.shape - 1.0) * std::log(x) - x / params.scale;
}

double gaussian_log_pdf(const GaussianParams& params, double y) {
  if (!(params.stddev > 0.0)) {
    throw std::domain_error("gaussian_log_pdf: stddev must be positive");
  }
  const double z = (y - params.mean) / params.stddev;
  return -0.5 * std::log(kTwoPi) - std::log(params.stddev) - 0.5 * z * z;
}

GammaParams fit_gamma_moments(std::span<const double> samples) {
  if (samples.size() < 2) {
    throw NumericError("fit_gamma_moments: need at least 2 samples");
  }
  double mean = 0.0;
  for (double x : samples) mean += x;
  mean /= static_cast<double>(samples.size());
  double var = 0.0;
  for (double x : samples) var += (x - mean) * (x - mean);
  var /= static_cast<double>(samples.size());
  if (!(var > 0.0)) {
    throw NumericError("fit_gamma_moments: degenerate sample (zero variance)");
  }
  if (!(mean > 0.0)) {
    throw NumericError("fit_gamma_moments: sample mean must be positive");
  }
  return GammaParams{mean * mean / var, var / mean};
}

std::optional<GammaParams> fit_gamma_weighted(std::span<const double> samples,
                                              std::span<const double> weights) {
  if (samples.size() != weights.size()) {
    throw DimensionError("fit_gamma_weighted: size mismatch");
  }
  double wsum = 0.0, mean = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    wsum += weights[i];
    mean += weights[i] * samples[i];
  }
  if (wsum < 1e-12) return std::nullopt;
  mean /= wsum;
  double var = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    var += weights[i] * (samples[i] - mean) * (samples[i] - mean);
  }
  var /= wsum;
  if (!(var > 1e-12) || !(mean > 0.0)) return std::nullopt;
  return GammaParams{mean * mean / var, var / mean};
}

TransitionMatrix::TransitionMatrix(std::vector<std::vector<double>> rows)
    : rows_(std::move(rows)) {
  const std::size_t n = rows_.size();
  if (n == 0) throw ValidationError("TransitionMatrix: empty");
  for (const auto& row : rows_) {
    if (row.size() != n) {
      throw DimensionError("TransitionMatrix: not square");
    }
    double sum = 0.0;
    for (double v : row) {
      if (v < 0.0) throw ValidationError("TransitionMatrix: negative entry");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-12) {
      throw ValidationError("TransitionMatrix: row does not sum to 1");
    }
  }
}

TransitionMatrix TransitionMatrix::from_counts_add_one(
    const std::vector<std::vector<double>>& counts) {
  std::vector<std::vector<double>> rows(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const auto& c = counts[i];
    double total = 0.0;
    for (double v : c) total += v + 1.0;
    rows[i].resize(c.size());
    for (std::size_t j = 0; j < c.size(); ++j) rows[i][j] = (c[j] + 1.0) / total;
  }
  return TransitionMatrix(std::move(rows));
}

namespace {

double stationary_residual(const TransitionMatrix& tm,
                           const std::vector<double>& pi) {
  const std::size_t n = tm.size();
  double worst = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) v += pi[i] * tm.at(i, j);
    worst = std::max(worst, std::abs(v - pi[j]));
  }
  return worst;
}

std::vector<double> multiply_left(const TransitionMatrix& tm,
                                  const std::vector<double>& pi) {
  const std::size_t n = tm.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[j] += pi[i] * tm.at(i, j);
  }
  return out;
}

}  // namespace

std::vector<double> stationary_distribution(const TransitionMatrix& tm) {
  const std::size_t n = tm.size();
  std::vector<double> pi(n, 1.0 / static_cast<double>(n));
  std::vector<double> prev, prev2;
  constexpr int kMaxIters = 100000;
  constexpr double kStepTol = 1e-12;
  constexpr double kResidualTol = 1e-10;

  for (int iter = 0; iter < kMaxIters; ++iter) {
    prev2 = std::move(prev);
    prev = pi;
    pi = multiply_left(tm, pi);

    double step = 0.0;
    for (std::size_t j = 0; j < n; ++j) step = std::max(step, std::abs(pi[j] - prev[j]));
    if (step < kStepTol && stationary_residual(tm, pi) < kResidualTol) return pi;

    // Aitken extrapolation rescues slowly mixing (near-identity) chains;
    // accepted only if the residual verifies.
    if (iter >= 2 && iter % 8 == 0 && !prev2.empty()) {
      std::vector<double> acc(n);
      bool ok = true;
      double total = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double d1 = prev[j] - prev2[j];
        const double d2 = pi[j] - prev[j];
        const double denom = d2 - d1;
        acc[j] = (std::abs(denom) > 1e-300) ? prev2[j] - d1 * d1 / denom : pi[j];
        if (!(acc[j] >= 0.0) || !std::isfinite(acc[j])) ok = false;
        total += acc[j];
      }
      if (ok && total > 0.0) {
        for (double& v : acc) v /= total;
        if (stationary_residual(tm, acc) < kResidualTol) return acc;
      }
    }
  }
  if (stationary_residual(tm, pi) < kResidualTol) return pi;
  throw NumericError("stationary_distribution: no convergence after max iterations");
}

double pearson_correlation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DimensionError("pearson_correlation: length mismatch");
  }
  if (a.size() < 2) {
    throw DimensionError("pearson_correlation: need at least 2 points");
  }
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  if (!(va > 0.0) || !(vb > 0.0)) return 0.0;  // constant-series convention
  return std::clamp(cov / std::sqrt(va * vb), -1.0, 1.0);
}

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed),
      stream_id_(stream_id),
      key_(mix64(mix64(seed) ^ mix64(~stream_id))) {}

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t stream_id,
                           std::uint64_t key)
    : seed_(seed), stream_id_(stream_id), key_(key) {}

std::uint64_t RandomStream::next_u64() {
  return mix64(key_ ^ mix64(counter_++ + 0x632BE59BD9B4E019ull));
}

double RandomStream::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RandomStream::next_gaussian() {
  if (has_spare_gaussian_) {
    has_spare_gaussian_ = false;
    return spare_gaussian_;
  }
  const double u1 = 1.0 - next_double();  // (0, 1]
  const double u2 = next_double();
  const double r = std::sqrt(-2.0 * std::log(u1));
  spare_gaussian_ = r * std::sin(kTwoPi * u2);
  has_spare_gaussian_ = true;
  return r * std::cos(kTwoPi * u2);
}

double RandomStream::next_gamma(const GammaParams& params) {
  if (!(params.shape > 0.0) || !(params.scale > 0.0)) {
    throw std::domain_error("next_gamma: shape and scale must be positive");
  }
  double shape = params.shape;
  double boost = 1.0;
  if (shape < 1.0) {
    // Gamma(a) = Gamma(a+1) * U^{1/a}
    double u = next_double();
    if (u <= 0.0) u = std::numeric_limits<double>::min();
    boost = std::pow(u, 1.0 / shape);
    shape += 1.0;
  }
  // Marsaglia-Tsang squeeze
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    const double x = next_gaussian();
    const double t = 1.0 + c * x;
    if (t <= 0.0) continue;
    const double v = t * t * t;
    double u = next_double();
    if (u <= 0.0) u = std::numeric_limits<double>::min();
    if (u < 1.0 - 0.0331 * x * x * x * x) return boost * d * v * params.scale;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) {
      return boost * d * v * params.scale;
    }
  }
}

std::vector<double> RandomStream::next_dirichlet(double concentration,
                                                 std::size_t n) {
  if (!(concentration > 0.0)) {
    throw std::domain_error("next_dirichlet: concentration must be positive");
  }
  if (n == 0) throw std::domain_error("next_dirichlet: n must be positive");
  std::vector<double> out(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = next_gamma(GammaParams{concentration, 1.0});
    total += out[i];
  }
  if (total <= 0.0) {
    // all draws underflowed; fall back to uniform
    for (double& v : out) v = 1.0 / static_cast<double>(n);
    return out;
  }
  for (double& v : out) v /= total;
  return out;
}

RandomStream RandomStream::split(std::uint64_t key) const {
  return RandomStream(seed_, stream_id_,
                      mix64(key_ ^ mix64(key ^ 0xA5A5A5A55A5A5A5Aull)));
}

std::size_t sample_categorical(RandomStream& stream,
                               std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw SamplingError("sample_categorical: negative weight");
    total += w;
  }
  if (!(total > 0.0)) {
    throw SamplingError("sample_categorical: all weights are zero");
  }
  const double u = stream.next_double() * total;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] > 0.0) last_positive = i;
    acc += weights[i];
    if (u < acc) return i;
  }
  return last_positive;  // guard against accumulated rounding
}

double log_sum_exp(std::span<const double> v) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double x : v) hi = std::max(hi, x);
  if (!std::isfinite(hi)) return hi;
  double sum = 0.0;
  for (double x : v) sum += std::exp(x - hi);
  return hi + std::log(sum);
}

}  // namespace rainsim
