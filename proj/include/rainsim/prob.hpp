#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace rainsim {

// Shape-scale parametrization: mean = shape*scale, variance = shape*scale^2.
struct GammaParams {
  double shape = 1.0;
  double scale = 1.0;
  double mean() const { return shape * scale; }
  double variance() const { return shape * scale * scale; }
};

struct GaussianParams {
  double mean = 0.0;
  double stddev = 1.0;
};

double gamma_log_pdf(const GammaParams& params, double x);
double gaussian_log_pdf(const GaussianParams& params, double y);

// Method-of-moments fit from population (1/n) moments.
// Throws NumericError for fewer than 2 samples or zero variance.
GammaParams fit_gamma_moments(std::span<const double> samples);

// Weighted variant used by EM responsibilities. Returns nullopt when the
// effective sample is degenerate (tiny total weight or zero variance).
std::optional<GammaParams> fit_gamma_weighted(std::span<const double> samples,
                                              std::span<const double> weights);

// Row-stochastic matrix; each row sums to 1 within 1e-12, entries >= 0.
class TransitionMatrix {
 public:
  TransitionMatrix() = default;
  explicit TransitionMatrix(std::vector<std::vector<double>> rows);

  // Add-one (Dirichlet(1)) smoothing: row k = (counts[k] + 1) / (sum + n).
  static TransitionMatrix from_counts_add_one(
      const std::vector<std::vector<double>>& counts);

  std::size_t size() const { return rows_.size(); }
  const std::vector<double>& row(std::size_t i) const { return rows_.at(i); }
  double at(std::size_t from, std::size_t to) const {
    return rows_.at(from).at(to);
  }
  const std::vector<std::vector<double>>& rows() const { return rows_; }

 private:
  std::vector<std::vector<double>> rows_;
};

// Solves pi P = pi, sum(pi) = 1 by power iteration (max 1e5 sweeps,
// tolerance 1e-12) with periodic Aitken extrapolation for near-identity
// chains. Result satisfies ||pi P - pi||_inf < 1e-10 or NumericError.
std::vector<double> stationary_distribution(const TransitionMatrix& tm);

// Standard Pearson coefficient; 0 when either series is constant.
// Throws DimensionError on length mismatch or length < 2.
double pearson_correlation(std::span<const double> a, std::span<const double> b);

// Deterministic counter-based stream: same (seed, stream_id) and the same
// call sequence reproduce the same draws on every platform. split() derives
// an independent substream; a substream must not be shared across threads.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed, std::uint64_t stream_id = 0);

  std::uint64_t next_u64();
  double next_double();  // uniform [0, 1)
  double next_gaussian();
  double next_gamma(const GammaParams& params);
  std::vector<double> next_dirichlet(double concentration, std::size_t n);

  RandomStream split(std::uint64_t key) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

 private:
  RandomStream(std::uint64_t seed, std::uint64_t stream_id, std::uint64_t key);

  std::uint64_t seed_ = 0;
  std::uint64_t stream_id_ = 0;
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  bool has_spare_gaussian_ = false;
  double spare_gaussian_ = 0.0;
};

// Index i with probability weights[i] / sum(weights).
// Throws SamplingError when all weights are zero (or any is negative).
std::size_t sample_categorical(RandomStream& stream,
                               std::span<const double> weights);

// Numerically stable log(sum(exp(v))).
double log_sum_exp(std::span<const double> v);

}  // namespace rainsim
