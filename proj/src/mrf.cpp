#include "rainsim/mrf.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "rainsim/errors.hpp"

namespace rainsim {

namespace {

double floored(double x, double floor_mm) { return std::max(x, floor_mm); }

struct MomentAcc {
  double n = 0.0, sum = 0.0, sumsq = 0.0;
  void add(double x) {
    n += 1.0;
    sum += x;
    sumsq += x * x;
  }
  double mean() const { return n > 0 ? sum / n : 0.0; }
  double var() const {
    if (n <= 0) return 0.0;
    const double m = mean();
    return std::max(0.0, sumsq / n - m * m);
  }
};

std::optional<GammaParams> fit_from_acc(const MomentAcc& acc) {
  if (acc.n < 2.0) return std::nullopt;
  const double m = acc.mean(), v = acc.var();
  if (!(v > 1e-12) || !(m > 0.0)) return std::nullopt;
  return GammaParams{m * m / v, v / m};
}

}  // namespace

double PotentialTable::a_scale(int s) const { return std::exp(scale_corr[s]); }

PotentialTable build_potentials(const RainfallField& field,
                                const NeighborSet& nb,
                                const TrainConfig& config) {
  if (field.days() < 2) {
    throw DimensionError("build_potentials: need at least 2 days");
  }
  if (static_cast<int>(nb.size()) != field.locations()) {
    throw DimensionError("build_potentials: neighbor set size mismatch");
  }
  PotentialTable pots;
  pots.rho_z = config.temporal_ratio_z;
  pots.rho_u = config.temporal_ratio_u;
  const int s_count = field.locations();
  const AggregateSeries agg = aggregate(field);

  pots.spatial.resize(s_count);
  for (int s = 0; s < s_count; ++s) {
    for (int other : nb[s]) {
      if (other > s) {
        const double corr = pearson_correlation(field.series(s), field.series(other));
        pots.spatial[s].emplace_back(other, corr);
        pots.spatial[other].emplace_back(s, corr);
      }
    }
  }
  for (auto& edges : pots.spatial) {
    std::sort(edges.begin(), edges.end());
  }
  pots.scale_corr.resize(s_count);
  for (int s = 0; s < s_count; ++s) {
    pots.scale_corr[s] = pearson_correlation(field.series(s), agg.y);
  }
  pots.gamma.assign(s_count, {GammaParams{1.0, 1.0}, GammaParams{1.0, 1.0}});
  pots.gauss = {GaussianParams{0.0, 1.0}, GaussianParams{0.0, 1.0},
                GaussianParams{0.0, 1.0}};
  return pots;
}

namespace {

struct MixtureFit {
  std::array<GammaParams, 2> comp;  // [0] = state 1 (higher mean)
  std::vector<std::uint8_t> labels;
  bool degenerate = false;
  bool converged = true;
};

MixtureFit fit_gamma_mixture(std::span<const double> raw, double floor_mm,
                             int max_iters, double tol) {
  MixtureFit fit;
  const std::size_t n = raw.size();
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = floored(raw[i], floor_mm);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  if (n < 4 || x[order.front()] == x[order.back()]) {
    const double m = std::accumulate(x.begin(), x.end(), 0.0) / std::max<std::size_t>(n, 1);
    fit.degenerate = true;
    fit.comp = {GammaParams{1.0, std::max(m, floor_mm)},
                GammaParams{1.0, std::max(m, floor_mm)}};
    fit.labels.assign(n, 1);
    return fit;
  }

  auto moments_or_flat = [&](std::size_t begin, std::size_t end) {
    MomentAcc acc;
    for (std::size_t i = begin; i < end; ++i) acc.add(x[order[i]]);
    if (auto p = fit_from_acc(acc)) return *p;
    return GammaParams{1.0, std::max(acc.mean(), floor_mm)};
  };
  // low half -> component 1 (state 2), high half -> component 0 (state 1)
  std::array<GammaParams, 2> comp = {moments_or_flat(n / 2, n),
                                     moments_or_flat(0, n / 2)};
  std::array<double, 2> weight = {1.0 - static_cast<double>(n / 2) / n,
                                  static_cast<double>(n / 2) / n};

  std::vector<double> resp0(n);
  double prev_ll = -std::numeric_limits<double>::infinity();
  fit.converged = false;
  for (int iter = 0; iter < max_iters; ++iter) {
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double l0 = std::log(weight[0]) + gamma_log_pdf(comp[0], x[i]);
      const double l1 = std::log(weight[1]) + gamma_log_pdf(comp[1], x[i]);
      const double hi = std::max(l0, l1);
      const double lse = hi + std::log(std::exp(l0 - hi) + std::exp(l1 - hi));
      resp0[i] = std::exp(l0 - lse);
      ll += lse;
    }
    std::vector<double> resp1(n);
    for (std::size_t i = 0; i < n; ++i) resp1[i] = 1.0 - resp0[i];
    double w0 = std::accumulate(resp0.begin(), resp0.end(), 0.0) / n;
    w0 = std::clamp(w0, 1e-6, 1.0 - 1e-6);
    weight = {w0, 1.0 - w0};
    if (auto p = fit_gamma_weighted(x, resp0)) comp[0] = *p;
    if (auto p = fit_gamma_weighted(x, resp1)) comp[1] = *p;
    if (std::abs(ll - prev_ll) < tol * (1.0 + std::abs(ll))) {
      fit.converged = true;
      break;
    }
    prev_ll = ll;
  }

  if (comp[0].mean() < comp[1].mean()) {
    std::swap(comp[0], comp[1]);
    for (double& r : resp0) r = 1.0 - r;
  }
  fit.comp = comp;
  fit.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) fit.labels[i] = resp0[i] >= 0.5 ? 1 : 2;
  return fit;
}

std::vector<std::uint8_t> tercile_u_init(const std::vector<double>& y) {
  const int t_count = static_cast<int>(y.size());
  std::vector<int> order(t_count);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return y[a] < y[b]; });
  std::vector<std::uint8_t> u(t_count, 3);
  const int b1 = t_count / 3;
  const int b2 = 2 * t_count / 3;
  for (int r = 0; r < t_count; ++r) {
    if (r < b1) u[order[r]] = 2;       // driest third
    else if (r < b2) u[order[r]] = 3;  // middle
    else u[order[r]] = 1;              // wettest third
  }
  return u;
}

std::array<GaussianParams, 3> fit_gauss_by_state(
    const std::vector<double>& y, const std::vector<std::uint8_t>& u,
    std::vector<std::string>* warnings) {
  std::array<GaussianParams, 3> out;
  MomentAcc all;
  for (double v : y) all.add(v);
  const double pooled_sd = std::max(std::sqrt(all.var()), 1e-6);
  for (int k = 1; k <= 3; ++k) {
    MomentAcc acc;
    for (std::size_t t = 0; t < y.size(); ++t) {
      if (u[t] == k) acc.add(y[t]);
    }
    if (acc.n >= 2.0 && acc.var() > 0.0) {
      out[k - 1] = GaussianParams{acc.mean(), std::sqrt(acc.var())};
    } else {
      out[k - 1] = GaussianParams{acc.n > 0 ? acc.mean() : all.mean(), pooled_sd};
      if (warnings) {
        warnings->push_back("gaussian fit for U=" + std::to_string(k) +
                            " degenerate; pooled stddev used");
      }
    }
  }
  return out;
}

}  // namespace

EmInit em_initialize(const RainfallField& field, const TrainConfig& config) {
  EmInit init;
  const int s_count = field.locations();
  const int t_count = field.days();
  init.state = LatentState(s_count, t_count);
  init.gamma.resize(s_count);
  for (int s = 0; s < s_count; ++s) {
    MixtureFit fit = fit_gamma_mixture(field.series(s), config.rain_floor_mm,
                                       config.em_max_iters, config.em_tol);
    if (fit.degenerate) {
      init.warnings.push_back("location " + std::to_string(s) +
                              ": degenerate mixture (constant series)");
    } else if (!fit.converged) {
      init.warnings.push_back("location " + std::to_string(s) +
                              ": EM did not converge; last iterate kept");
    }
    init.gamma[s] = fit.comp;
    for (int t = 0; t < t_count; ++t) init.state.set_z(s, t, fit.labels[t]);
  }
  const AggregateSeries agg = aggregate(field);
  init.state.u = tercile_u_init(agg.y);
  init.gauss = fit_gauss_by_state(agg.y, init.state.u, &init.warnings);
  return init;
}

std::array<double, 2> gibbs_conditional_z(int s, int t,
                                          const LatentState& state,
                                          const PotentialTable& pots,
                                          double x) {
  const double log_rho = std::log(pots.rho_z);
  std::array<double, 2> logw{};
  for (int k = 1; k <= 2; ++k) {
    double w = 0.0;
    if (t > 0 && state.z_at(s, t - 1) == k) w += log_rho;
    if (t + 1 < state.days && state.z_at(s, t + 1) == k) w += log_rho;
    for (const auto& [other, corr] : pots.spatial[s]) {
      if (state.z_at(other, t) == k) w += corr;
    }
    if (state.u[t] == k) w += pots.scale_corr[s];
    else if (state.u[t] == 3) w += 0.5 * pots.scale_corr[s];
    w += gamma_log_pdf(pots.gamma[s][k - 1], x);
    logw[k - 1] = w;
  }
  const double lse = log_sum_exp(logw);
  return {std::exp(logw[0] - lse), std::exp(logw[1] - lse)};
}

std::array<double, 3> gibbs_conditional_u(int t, const LatentState& state,
                                          const PotentialTable& pots,
                                          double y) {
  const double log_rho = std::log(pots.rho_u);
  std::array<double, 2> scale_sum{};  // sum of scale corr over {s: Z(s,t)=k}
  for (int s = 0; s < state.locations; ++s) {
    scale_sum[state.z_at(s, t) - 1] += pots.scale_corr[s];
  }
  std::array<double, 3> logw{};
  for (int k = 1; k <= 3; ++k) {
    double w = 0.0;
    if (t > 0 && state.u[t - 1] == k) w += log_rho;
    if (t + 1 < state.days && state.u[t + 1] == k) w += log_rho;
    // U=3 scale edges carry the geometric mean of the agree/disagree
    // values, placing the normal state midway between the other two
    if (k <= 2) w += scale_sum[k - 1];
    else w += 0.5 * (scale_sum[0] + scale_sum[1]);
    w += gaussian_log_pdf(pots.gauss[k - 1], y);
    logw[k - 1] = w;
  }
  const double lse = log_sum_exp(logw);
  return {std::exp(logw[0] - lse), std::exp(logw[1] - lse),
          std::exp(logw[2] - lse)};
}

void gibbs_sweep(LatentState& state, const PotentialTable& pots,
                 const RainfallField& field, const AggregateSeries& agg,
                 const RandomStream& base, int sweep_index,
                 double rain_floor_mm) {
  const int s_count = state.locations;
  const int t_count = state.days;
  const RandomStream sweep_stream =
      base.split(static_cast<std::uint64_t>(sweep_index));
  const std::uint64_t u_offset =
      static_cast<std::uint64_t>(s_count) * static_cast<std::uint64_t>(t_count);
  for (int s = 0; s < s_count; ++s) {
    for (int t = 0; t < t_count; ++t) {
      const auto probs = gibbs_conditional_z(
          s, t, state, pots, floored(field(s, t), rain_floor_mm));
      RandomStream site = sweep_stream.split(
          static_cast<std::uint64_t>(s) * t_count + t);
      state.set_z(s, t, static_cast<std::uint8_t>(
                            1 + sample_categorical(site, probs)));
    }
  }
  for (int t = 0; t < t_count; ++t) {
    const auto probs = gibbs_conditional_u(t, state, pots, agg.y[t]);
    RandomStream site = sweep_stream.split(u_offset + t);
    state.u[t] = static_cast<std::uint8_t>(1 + sample_categorical(site, probs));
  }
}

namespace {

// Point re-estimation of the emission parameters from the current state
// occupancy; degenerate cells keep their previous parameters.
void reestimate_emissions(PotentialTable& pots, const LatentState& state,
                          const RainfallField& field,
                          const AggregateSeries& agg, double rain_floor_mm) {
  const int s_count = state.locations;
  const int t_count = state.days;
  for (int s = 0; s < s_count; ++s) {
    MomentAcc acc[2];
    const auto series = field.series(s);
    for (int t = 0; t < t_count; ++t) {
      acc[state.z_at(s, t) - 1].add(floored(series[t], rain_floor_mm));
    }
    for (int k = 0; k < 2; ++k) {
      if (auto p = fit_from_acc(acc[k])) pots.gamma[s][k] = *p;
    }
  }
  for (int k = 1; k <= 3; ++k) {
    MomentAcc acc;
    for (int t = 0; t < t_count; ++t) {
      if (state.u[t] == k) acc.add(agg.y[t]);
    }
    if (acc.n >= 2.0 && acc.var() > 0.0) {
      pots.gauss[k - 1] = GaussianParams{acc.mean(), std::sqrt(acc.var())};
    }
  }
}

// Flip Z labels at locations where the mode violates the convention
// mean(state 1) >= mean(state 2).
void normalize_labels(LatentState& mode, const RainfallField& field,
                      double rain_floor_mm) {
  for (int s = 0; s < mode.locations; ++s) {
    MomentAcc acc[2];
    const auto series = field.series(s);
    for (int t = 0; t < mode.days; ++t) {
      acc[mode.z_at(s, t) - 1].add(floored(series[t], rain_floor_mm));
    }
    if (acc[0].n > 0 && acc[1].n > 0 && acc[0].mean() < acc[1].mean()) {
      for (int t = 0; t < mode.days; ++t) {
        mode.set_z(s, t, mode.z_at(s, t) == 1 ? 2 : 1);
      }
    }
  }
}

}  // namespace

ModelParams extract_map_params(const LatentState& mode_in,
                               const RainfallField& field,
                               const NeighborSet& nb, double rain_floor_mm) {
  if (mode_in.locations != field.locations() || mode_in.days != field.days()) {
    throw DimensionError("extract_map_params: latent/field shape mismatch");
  }
  if (static_cast<int>(nb.size()) != field.locations()) {
    throw DimensionError("extract_map_params: neighbor set size mismatch");
  }
  LatentState mode = mode_in;
  normalize_labels(mode, field, rain_floor_mm);

  const int s_count = mode.locations;
  const int t_count = mode.days;
  ModelParams params;
  params.rain_floor_mm = rain_floor_mm;
  params.loc.resize(s_count);

  for (int s = 0; s < s_count; ++s) {
    LocationParams& lp = params.loc[s];
    std::vector<std::vector<double>> tau_counts(2, std::vector<double>(2, 0.0));
    std::vector<std::vector<double>> theta_counts(3, std::vector<double>(2, 0.0));
    double pi_counts[2][3][2] = {};
    for (int t = 0; t < t_count; ++t) {
      const int k = mode.z_at(s, t) - 1;
      theta_counts[mode.u[t] - 1][k] += 1.0;
      if (t > 0) {
        const int l = mode.z_at(s, t - 1) - 1;
        tau_counts[l][k] += 1.0;
        pi_counts[l][mode.u[t] - 1][k] += 1.0;
      }
    }
    lp.tau = TransitionMatrix::from_counts_add_one(tau_counts);
    const auto tau_hat = stationary_distribution(lp.tau);
    lp.tau_hat = {tau_hat[0], tau_hat[1]};
    for (int m = 0; m < 3; ++m) {
      const double total = theta_counts[m][0] + theta_counts[m][1] + 2.0;
      lp.theta[m] = {(theta_counts[m][0] + 1.0) / total,
                     (theta_counts[m][1] + 1.0) / total};
    }
    for (int l = 0; l < 2; ++l) {
      for (int m = 0; m < 3; ++m) {
        const double total = pi_counts[l][m][0] + pi_counts[l][m][1] + 2.0;
        lp.pi[l][m] = {(pi_counts[l][m][0] + 1.0) / total,
                       (pi_counts[l][m][1] + 1.0) / total};
      }
    }
    // Emission fits; pooled per-location fallback for thin cells.
    MomentAcc acc[2], pooled;
    const auto series = field.series(s);
    for (int t = 0; t < t_count; ++t) {
      const double x = floored(series[t], rain_floor_mm);
      acc[mode.z_at(s, t) - 1].add(x);
      pooled.add(x);
    }
    auto pooled_fit = fit_from_acc(pooled);
    const GammaParams pooled_params =
        pooled_fit ? *pooled_fit
                   : GammaParams{1.0, std::max(pooled.mean(), rain_floor_mm)};
    for (int k = 0; k < 2; ++k) {
      if (auto p = fit_from_acc(acc[k])) {
        lp.gamma[k] = *p;
      } else {
        lp.gamma[k] = pooled_params;
        lp.gamma_fallback[k] = true;
      }
    }
  }

  std::vector<std::vector<double>> lambda_counts(3, std::vector<double>(3, 0.0));
  for (int t = 1; t < t_count; ++t) {
    lambda_counts[mode.u[t - 1] - 1][mode.u[t] - 1] += 1.0;
  }
  params.lambda = TransitionMatrix::from_counts_add_one(lambda_counts);
  const auto lambda_hat = stationary_distribution(params.lambda);
  params.lambda_hat = {lambda_hat[0], lambda_hat[1], lambda_hat[2]};

  const AggregateSeries agg = aggregate(field);
  params.gauss = fit_gauss_by_state(agg.y, mode.u, nullptr);

  params.u_posterior.assign(t_count, {0.0, 0.0, 0.0});
  for (int t = 0; t < t_count; ++t) {
    params.u_posterior[t][mode.u[t] - 1] = 1.0;
  }
  return params;
}

TrainResult run_gibbs(const RainfallField& field, const NeighborSet& nb,
                      const EmInit& init, const TrainConfig& config) {
  if (config.n_samples < 1) {
    throw ConfigError("run_gibbs: n_samples must be at least 1");
  }
  if (config.thin < 1) throw ConfigError("run_gibbs: thin must be at least 1");
  if (config.burn_in < 0) throw ConfigError("run_gibbs: burn_in must be >= 0");
  if (init.state.locations != field.locations() ||
      init.state.days != field.days()) {
    throw DimensionError("run_gibbs: init state shape mismatch");
  }

  PotentialTable pots = build_potentials(field, nb, config);
  pots.gamma = init.gamma;
  pots.gauss = init.gauss;
  const AggregateSeries agg = aggregate(field);
  LatentState state = init.state;
  const RandomStream base(config.seed, 0);

  TrainResult result;
  result.warnings = init.warnings;

  int sweep = 0;
  for (int i = 0; i < config.burn_in; ++i, ++sweep) {
    gibbs_sweep(state, pots, field, agg, base, sweep, config.rain_floor_mm);
    reestimate_emissions(pots, state, field, agg, config.rain_floor_mm);
  }
  const int s_count = state.locations;
  const int t_count = state.days;
  std::vector<std::uint32_t> z1_counts(
      static_cast<std::size_t>(s_count) * t_count, 0);
  std::vector<std::array<std::uint32_t, 3>> u_counts(t_count, {0, 0, 0});
  result.trace.reserve(config.n_samples);
  for (int j = 0; j < config.n_samples; ++j) {
    for (int step = 0; step < config.thin; ++step, ++sweep) {
      gibbs_sweep(state, pots, field, agg, base, sweep, config.rain_floor_mm);
      reestimate_emissions(pots, state, field, agg, config.rain_floor_mm);
    }
    result.trace.push_back(state);
    for (std::size_t i = 0; i < z1_counts.size(); ++i) {
      if (state.z[i] == 1) ++z1_counts[i];
    }
    for (int t = 0; t < t_count; ++t) ++u_counts[t][state.u[t] - 1];
  }

  LatentState mode(s_count, t_count);
  const std::uint32_t n = static_cast<std::uint32_t>(config.n_samples);
  for (std::size_t i = 0; i < z1_counts.size(); ++i) {
    mode.z[i] = (2 * z1_counts[i] >= n) ? 1 : 2;  // ties toward state 1
  }
  for (int t = 0; t < t_count; ++t) {
    int best = 0;
    for (int k = 1; k < 3; ++k) {
      if (u_counts[t][k] > u_counts[t][best]) best = k;
    }
    mode.u[t] = static_cast<std::uint8_t>(best + 1);
  }
  normalize_labels(mode, field, config.rain_floor_mm);

  result.params = extract_map_params(mode, field, nb, config.rain_floor_mm);
  for (int t = 0; t < t_count; ++t) {
    for (int k = 0; k < 3; ++k) {
      result.params.u_posterior[t][k] =
          static_cast<double>(u_counts[t][k]) / config.n_samples;
    }
  }
  result.mode = std::move(mode);
  return result;
}

TrainResult train(const RainfallField& field, const NeighborSet& nb,
                  const TrainConfig& config) {
  return run_gibbs(field, nb, em_initialize(field, config), config);
}

namespace {

nlohmann::ordered_json gamma_to_json(const GammaParams& g) {
  return {{"shape", g.shape}, {"scale", g.scale}};
}

GammaParams gamma_from_json(const nlohmann::json& j) {
  return GammaParams{j.at("shape").get<double>(), j.at("scale").get<double>()};
}

}  // namespace

void write_params_json(const ModelParams& params, const TrainConfig& config,
                       const std::vector<std::string>& warnings,
                       const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["schema"] = "rainsim-params/1";
  j["s"] = params.locations();
  j["rain_floor_mm"] = params.rain_floor_mm;
  j["config"] = {{"burn_in", config.burn_in},
                 {"n_samples", config.n_samples},
                 {"thin", config.thin},
                 {"seed", config.seed},
                 {"temporal_ratio_z", config.temporal_ratio_z},
                 {"temporal_ratio_u", config.temporal_ratio_u},
                 {"rain_floor_mm", config.rain_floor_mm}};
  j["warnings"] = warnings;
  j["lambda"] = params.lambda.rows();
  j["lambda_hat"] = params.lambda_hat;
  auto gauss = nlohmann::ordered_json::array();
  for (const auto& g : params.gauss) {
    gauss.push_back({{"mean", g.mean}, {"stddev", g.stddev}});
  }
  j["gauss"] = std::move(gauss);
  auto locations = nlohmann::ordered_json::array();
  for (int s = 0; s < params.locations(); ++s) {
    const LocationParams& lp = params.loc[s];
    nlohmann::ordered_json loc;
    loc["id"] = s;
    loc["gamma"] = {gamma_to_json(lp.gamma[0]), gamma_to_json(lp.gamma[1])};
    loc["gamma_fallback"] = {lp.gamma_fallback[0], lp.gamma_fallback[1]};
    loc["tau"] = lp.tau.rows();
    loc["tau_hat"] = lp.tau_hat;
    loc["theta"] = lp.theta;
    loc["pi"] = lp.pi;
    locations.push_back(std::move(loc));
  }
  j["locations"] = std::move(locations);
  j["u_posterior"] = params.u_posterior;
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write params: " + path.string());
  out << j.dump(2) << '\n';
}

ModelParams read_params_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open params: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("params " + path.string() + ": " + e.what());
  }
  try {
    if (j.at("schema").get<std::string>() != "rainsim-params/1") {
      throw FormatError("params " + path.string() + ": unknown schema");
    }
    ModelParams params;
    params.rain_floor_mm = j.at("rain_floor_mm").get<double>();
    params.lambda =
        TransitionMatrix(j.at("lambda").get<std::vector<std::vector<double>>>());
    const auto lh = j.at("lambda_hat").get<std::vector<double>>();
    params.lambda_hat = {lh.at(0), lh.at(1), lh.at(2)};
    for (int k = 0; k < 3; ++k) {
      params.gauss[k] = GaussianParams{j.at("gauss")[k].at("mean").get<double>(),
                                       j.at("gauss")[k].at("stddev").get<double>()};
    }
    for (const auto& loc : j.at("locations")) {
      LocationParams lp;
      lp.gamma = {gamma_from_json(loc.at("gamma")[0]),
                  gamma_from_json(loc.at("gamma")[1])};
      const auto fb = loc.at("gamma_fallback").get<std::vector<bool>>();
      lp.gamma_fallback = {fb.at(0), fb.at(1)};
      lp.tau = TransitionMatrix(loc.at("tau").get<std::vector<std::vector<double>>>());
      const auto th = loc.at("tau_hat").get<std::vector<double>>();
      lp.tau_hat = {th.at(0), th.at(1)};
      const auto theta = loc.at("theta").get<std::vector<std::vector<double>>>();
      for (int m = 0; m < 3; ++m) lp.theta[m] = {theta.at(m).at(0), theta.at(m).at(1)};
      const auto pi =
          loc.at("pi").get<std::vector<std::vector<std::vector<double>>>>();
      for (int l = 0; l < 2; ++l) {
        for (int m = 0; m < 3; ++m) {
          lp.pi[l][m] = {pi.at(l).at(m).at(0), pi.at(l).at(m).at(1)};
        }
      }
      params.loc.push_back(std::move(lp));
    }
    if (static_cast<int>(params.loc.size()) != j.at("s").get<int>()) {
      throw FormatError("params " + path.string() + ": location count mismatch");
    }
    if (j.contains("u_posterior")) {
      for (const auto& row : j.at("u_posterior")) {
        params.u_posterior.push_back(
            {row.at(0).get<double>(), row.at(1).get<double>(), row.at(2).get<double>()});
      }
    }
    return params;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("params " + path.string() + ": " + e.what());
  }
}

void write_latent_csv(const LatentState& state,
                      const std::vector<DayLabel>& days,
                      const std::filesystem::path& path) {
  if (static_cast<int>(days.size()) != state.days) {
    throw DimensionError("write_latent_csv: day label count mismatch");
  }
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write latent file: " + path.string());
  out << "day,u";
  for (int s = 0; s < state.locations; ++s) out << ",z_loc_" << s;
  out << '\n';
  for (int t = 0; t < state.days; ++t) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", days[t].year,
                  days[t].month, days[t].day);
    out << buf << ',' << static_cast<int>(state.u[t]);
    for (int s = 0; s < state.locations; ++s) {
      out << ',' << static_cast<int>(state.z_at(s, t));
    }
    out << '\n';
  }
}

LatentState read_latent_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open latent file: " + path.string());
  std::string line;
  if (!std::getline(in, line)) {
    throw FormatError(path.string() + ": line 1: empty file");
  }
  std::vector<std::string> header;
  {
    std::string cur;
    for (char c : line) {
      if (c == ',') {
        header.push_back(cur);
        cur.clear();
      } else if (c != '\r') {
        cur += c;
      }
    }
    header.push_back(cur);
  }
  if (header.size() < 3 || header[0] != "day" || header[1] != "u") {
    throw FormatError(path.string() + ": line 1: header must be day,u,z_loc_0,...");
  }
  const int s_count = static_cast<int>(header.size()) - 2;
  for (int s = 0; s < s_count; ++s) {
    if (header[s + 2] != "z_loc_" + std::to_string(s)) {
      throw FormatError(path.string() + ": line 1: expected column z_loc_" +
                        std::to_string(s));
    }
  }
  std::vector<std::uint8_t> u;
  std::vector<std::vector<std::uint8_t>> z_rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
      if (c == ',') {
        fields.push_back(cur);
        cur.clear();
      } else if (c != '\r') {
        cur += c;
      }
    }
    fields.push_back(cur);
    if (static_cast<int>(fields.size()) != s_count + 2) {
      throw FormatError(path.string() + ": line " + std::to_string(line_no) +
                        ": wrong field count");
    }
    auto parse_state = [&](const std::string& f, int lo, int hi) {
      int v = 0;
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc{} || ptr != f.data() + f.size() || v < lo || v > hi) {
        throw ValidationError(path.string() + ": line " + std::to_string(line_no) +
                              ": state '" + f + "' out of range");
      }
      return static_cast<std::uint8_t>(v);
    };
    u.push_back(parse_state(fields[1], 1, 3));
    std::vector<std::uint8_t> row(s_count);
    for (int s = 0; s < s_count; ++s) row[s] = parse_state(fields[s + 2], 1, 2);
    z_rows.push_back(std::move(row));
  }
  if (z_rows.empty()) throw FormatError(path.string() + ": no data rows");
  LatentState state(s_count, static_cast<int>(z_rows.size()));
  state.u = std::move(u);
  for (int t = 0; t < state.days; ++t) {
    for (int s = 0; s < s_count; ++s) state.set_z(s, t, z_rows[t][s]);
  }
  return state;
}

TrainConfig read_train_config_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  TrainConfig config;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "burn_in") config.burn_in = value.get<int>();
      else if (key == "n_samples") config.n_samples = value.get<int>();
      else if (key == "thin") config.thin = value.get<int>();
      else if (key == "seed") config.seed = value.get<std::uint64_t>();
      else if (key == "temporal_ratio_z") config.temporal_ratio_z = value.get<double>();
      else if (key == "temporal_ratio_u") config.temporal_ratio_u = value.get<double>();
      else if (key == "rain_floor_mm") config.rain_floor_mm = value.get<double>();
      else if (key == "em_max_iters") config.em_max_iters = value.get<int>();
      else if (key == "em_tol") config.em_tol = value.get<double>();
      else throw ConfigError("config " + path.string() + ": unknown key '" + key + "'");
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config " + path.string() + ": key '" + key + "': " + e.what());
    }
  }
  if (config.temporal_ratio_z <= 0.0 || config.temporal_ratio_u <= 0.0) {
    throw ConfigError("config: temporal ratios must be positive");
  }
  if (config.rain_floor_mm <= 0.0) {
    throw ConfigError("config: rain_floor_mm must be positive");
  }
  return config;
}

}  // namespace rainsim
