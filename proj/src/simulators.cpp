#include "rainsim/simulators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rainsim/errors.hpp"

namespace rainsim {

namespace {

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

void validate_config(const ModelParams& params, const SimulationConfig& config) {
  if (config.model_id < 1 || config.model_id > 6) {
    throw ConfigError("simulate: model_id must be in 1..6");
  }
  if (config.t_sim < 1) throw ConfigError("simulate: t_sim must be >= 1");
  if (params.loc.empty()) throw ConfigError("simulate: empty parameter set");
  if (config.u_override &&
      static_cast<int>(config.u_override->size()) != config.t_sim) {
    throw ConfigError("simulate: u_override length does not match t_sim");
  }
  if (config.u_override) {
    for (std::uint8_t u : *config.u_override) {
      if (u < 1 || u > 3) throw ConfigError("simulate: u_override values must be 1..3");
    }
  }
  if (config.q < 0.0 || config.q > 1.0) {
    throw ConfigError("simulate: q must be in [0, 1]");
  }
  if (!(config.dirichlet_r > 0.0)) {
    throw ConfigError("simulate: dirichlet_r must be positive");
  }
  for (const ObservedCell& cell : config.observed) {
    if (cell.s < 0 || cell.s >= params.locations() || cell.t < 0 ||
        cell.t >= config.t_sim || !(cell.x >= 0.0)) {
      throw ConfigError("simulate: observed cell out of range");
    }
  }
}

std::vector<std::uint8_t> sample_u_chain(const ModelParams& params,
                                         const SimulationConfig& config,
                                         const RandomStream& base) {
  if (config.u_override) return *config.u_override;
  std::vector<std::uint8_t> u(config.t_sim);
  RandomStream stream = base.split(0);
  std::size_t prev = sample_categorical(
      stream, std::span<const double>(params.lambda_hat.data(), 3));
  u[0] = static_cast<std::uint8_t>(prev + 1);
  for (int t = 1; t < config.t_sim; ++t) {
    prev = sample_categorical(stream, params.lambda.row(prev));
    u[t] = static_cast<std::uint8_t>(prev + 1);
  }
  return u;
}

// Copy observed cells verbatim, rebuild Y, assemble the output field.
SimulationOutput finish_output(int model_id, long long param_count,
                               const SimulationConfig& config, int s_count,
                               std::vector<double> x, LatentState latent) {
  for (const ObservedCell& cell : config.observed) {
    x[static_cast<std::size_t>(cell.s) * config.t_sim + cell.t] = cell.x;
  }
  SimulationOutput out{
      RainfallField(s_count, monsoon_season_labels(config.t_sim, config.start_year),
                    std::move(x)),
      std::move(latent), AggregateSeries{}, model_id, param_count, std::nullopt};
  out.y = aggregate(out.x);
  return out;
}

// One substream per (t, s) cell: the Z draw then the X draw.
RandomStream cell_stream(const RandomStream& base, int s_count, int t, int s) {
  return base.split(1).split(static_cast<std::uint64_t>(t) * s_count + s);
}

RandomStream zone_stream(const RandomStream& base, int k_count, int t, int z) {
  return base.split(2).split(static_cast<std::uint64_t>(t) * k_count + z);
}

}  // namespace

long long parameter_count(int model_id, long long s, long long k_p) {
  switch (model_id) {
    case 1: return 5 * s;
    case 2: return 6 * s;
    case 3: return 7 * s + 6;
    case 4: return 10 * s + 6;
    case 5: return 5 * s + 6 * k_p + 7;
    case 6: return 10 * k_p + 2 * s + 7;
    default: throw ConfigError("parameter_count: model_id must be in 1..6");
  }
}

SimulationOutput simulate_m1(const ModelParams& params,
                             const SimulationConfig& config) {
  validate_config(params, config);
  const int s_count = params.locations();
  const int t_count = config.t_sim;
  const RandomStream base(config.seed, 1);
  LatentState latent(s_count, t_count);
  std::vector<double> x(static_cast<std::size_t>(s_count) * t_count);
  RandomStream u_stream = base.split(0);
  for (int t = 0; t < t_count; ++t) {
    latent.u[t] = static_cast<std::uint8_t>(
        1 + sample_categorical(u_stream,
                               std::span<const double>(params.lambda_hat.data(), 3)));
  }
  for (int s = 0; s < s_count; ++s) {
    const LocationParams& lp = params.loc[s];
    for (int t = 0; t < t_count; ++t) {
      RandomStream site = cell_stream(base, s_count, t, s);
      const std::size_t k = sample_categorical(
          site, std::span<const double>(lp.tau_hat.data(), 2));
      latent.set_z(s, t, static_cast<std::uint8_t>(k + 1));
      x[static_cast<std::size_t>(s) * t_count + t] = site.next_gamma(lp.gamma[k]);
    }
  }
  return finish_output(1, parameter_count(1, s_count, 0), config, s_count,
                       std::move(x), std::move(latent));
}

SimulationOutput simulate_m2(const ModelParams& params,
                             const SimulationConfig& config) {
  validate_config(params, config);
  const int s_count = params.locations();
  const int t_count = config.t_sim;
  const RandomStream base(config.seed, 2);
  LatentState latent(s_count, t_count);
  std::vector<double> x(static_cast<std::size_t>(s_count) * t_count);
  RandomStream u_stream = base.split(0);
  for (int t = 0; t < t_count; ++t) {
    latent.u[t] = static_cast<std::uint8_t>(
        1 + sample_categorical(u_stream,
                               std::span<const double>(params.lambda_hat.data(), 3)));
  }
  for (int s = 0; s < s_count; ++s) {
    const LocationParams& lp = params.loc[s];
    std::size_t prev = 0;
    for (int t = 0; t < t_count; ++t) {
      RandomStream site = cell_stream(base, s_count, t, s);
      const std::size_t k =
          (t == 0) ? sample_categorical(
                         site, std::span<const double>(lp.tau_hat.data(), 2))
                   : sample_categorical(site, lp.tau.row(prev));
      latent.set_z(s, t, static_cast<std::uint8_t>(k + 1));
      x[static_cast<std::size_t>(s) * t_count + t] = site.next_gamma(lp.gamma[k]);
      prev = k;
    }
  }
  return finish_output(2, parameter_count(2, s_count, 0), config, s_count,
                       std::move(x), std::move(latent));
}

SimulationOutput simulate_m3(const ModelParams& params,
                             const SimulationConfig& config) {
  validate_config(params, config);
  const int s_count = params.locations();
  const int t_count = config.t_sim;
  const RandomStream base(config.seed, 3);
  LatentState latent(s_count, t_count);
  latent.u = sample_u_chain(params, config, base);
  std::vector<double> x(static_cast<std::size_t>(s_count) * t_count);
  for (int s = 0; s < s_count; ++s) {
    const LocationParams& lp = params.loc[s];
    for (int t = 0; t < t_count; ++t) {
      RandomStream site = cell_stream(base, s_count, t, s);
      const auto& row = lp.theta[latent.u[t] - 1];
      const std::size_t k =
          sample_categorical(site, std::span<const double>(row.data(), 2));
      latent.set_z(s, t, static_cast<std::uint8_t>(k + 1));
      x[static_cast<std::size_t>(s) * t_count + t] = site.next_gamma(lp.gamma[k]);
    }
  }
  return finish_output(3, parameter_count(3, s_count, 0), config, s_count,
                       std::move(x), std::move(latent));
}

SimulationOutput simulate_m4(const ModelParams& params,
                             const SimulationConfig& config) {
  validate_config(params, config);
  const int s_count = params.locations();
  const int t_count = config.t_sim;
  const RandomStream base(config.seed, 4);
  LatentState latent(s_count, t_count);
  latent.u = sample_u_chain(params, config, base);
  std::vector<double> x(static_cast<std::size_t>(s_count) * t_count);
  for (int s = 0; s < s_count; ++s) {
    const LocationParams& lp = params.loc[s];
    std::size_t prev = 0;
    for (int t = 0; t < t_count; ++t) {
      RandomStream site = cell_stream(base, s_count, t, s);
      if (t == 0) {
        // the first day needs a previous state; draw it from the marginal
        prev = sample_categorical(site,
                                  std::span<const double>(lp.tau_hat.data(), 2));
      }
      const auto& row = lp.pi[prev][latent.u[t] - 1];
      const std::size_t k =
          sample_categorical(site, std::span<const double>(row.data(), 2));
      latent.set_z(s, t, static_cast<std::uint8_t>(k + 1));
      x[static_cast<std::size_t>(s) * t_count + t] = site.next_gamma(lp.gamma[k]);
      prev = k;
    }
  }
  return finish_output(4, parameter_count(4, s_count, 0), config, s_count,
                       std::move(x), std::move(latent));
}

namespace {

void validate_zone_args(const ModelParams& params, const ZoneParams& zone_params,
                        const ZonePartition& partition) {
  if (static_cast<int>(partition.h.size()) != params.locations()) {
    throw DimensionError("simulate: partition size does not match params");
  }
  if (static_cast<int>(zone_params.zones.size()) != partition.k()) {
    throw DimensionError("simulate: zone params do not match partition");
  }
}

// pi marginalized over U with stationary lambda weights, then its
// stationary distribution; used to seed the first-day previous state.
std::array<double, 2> zone_c_marginal(const ZoneParams::PerZone& zone,
                                      const std::array<double, 3>& lambda_hat) {
  std::vector<std::vector<double>> rows(2, std::vector<double>(2, 0.0));
  for (int l = 0; l < 2; ++l) {
    for (int m = 0; m < 3; ++m) {
      for (int k = 0; k < 2; ++k) rows[l][k] += lambda_hat[m] * zone.pi[l][m][k];
    }
    const double total = rows[l][0] + rows[l][1];
    rows[l][0] /= total;
    rows[l][1] /= total;
  }
  const auto pi_hat = stationary_distribution(TransitionMatrix(rows));
  return {pi_hat[0], pi_hat[1]};
}

// Zone canonical chains C(z, .) for models 5-6.
std::vector<std::vector<std::uint8_t>> sample_zone_chains(
    const ModelParams& params, const ZoneParams& zone_params,
    const std::vector<std::uint8_t>& u, const SimulationConfig& config,
    const RandomStream& base) {
  const int k_count = static_cast<int>(zone_params.zones.size());
  std::vector<std::vector<std::uint8_t>> c(
      k_count, std::vector<std::uint8_t>(config.t_sim));
  for (int z = 0; z < k_count; ++z) {
    const auto& zone = zone_params.zones[z];
    std::size_t prev = 0;
    for (int t = 0; t < config.t_sim; ++t) {
      RandomStream stream = zone_stream(base, k_count, t, z);
      if (t == 0) {
        const auto marginal = zone_c_marginal(zone, params.lambda_hat);
        prev = sample_categorical(
            stream, std::span<const double>(marginal.data(), 2));
      }
      const auto& row = zone.pi[prev][u[t] - 1];
      prev = sample_categorical(stream, std::span<const double>(row.data(), 2));
      c[z][t] = static_cast<std::uint8_t>(prev + 1);
    }
  }
  return c;
}

}  // namespace

SimulationOutput simulate_m5(const ModelParams& params,
                             const ZoneParams& zone_params,
                             const ZonePartition& partition,
                             const SimulationConfig& config) {
  validate_config(params, config);
  validate_zone_args(params, zone_params, partition);
  const int s_count = params.locations();
  const int t_count = config.t_sim;
  const double p = partition.p;
  const RandomStream base(config.seed, 5);
  LatentState latent(s_count, t_count);
  latent.u = sample_u_chain(params, config, base);
  const auto c = sample_zone_chains(params, zone_params, latent.u, config, base);
  std::vector<double> x(static_cast<std::size_t>(s_count) * t_count);
  for (int s = 0; s < s_count; ++s) {
    const LocationParams& lp = params.loc[s];
    const auto& zone_c = c[partition.h[s]];
    for (int t = 0; t < t_count; ++t) {
      RandomStream site = cell_stream(base, s_count, t, s);
      const std::uint8_t zonal = zone_c[t];
      const bool agree = site.next_double() < p;
      const std::uint8_t k = agree ? zonal : static_cast<std::uint8_t>(3 - zonal);
      latent.set_z(s, t, k);
      x[static_cast<std::size_t>(s) * t_count + t] =
          site.next_gamma(lp.gamma[k - 1]);
    }
  }
  return finish_output(5, parameter_count(5, s_count, partition.k()), config,
                       s_count, std::move(x), std::move(latent));
}

SimulationOutput simulate_m6(const ModelParams& params,
                             const ZoneParams& zone_params,
                             const ZonePartition& partition,
                             const SimulationConfig& config) {
  validate_config(params, config);
  validate_zone_args(params, zone_params, partition);
  const int s_count = params.locations();
  const int t_count = config.t_sim;
  const int k_count = partition.k();
  const RandomStream base(config.seed, 6);
  LatentState latent(s_count, t_count);
  latent.u = sample_u_chain(params, config, base);
  const auto c = sample_zone_chains(params, zone_params, latent.u, config, base);

  std::vector<std::vector<double>> w(k_count, std::vector<double>(t_count));
  std::vector<double> x(static_cast<std::size_t>(s_count) * t_count);
  for (int z = 0; z < k_count; ++z) {
    const auto& zone = zone_params.zones[z];
    const std::size_t members = zone.members.size();
    for (int t = 0; t < t_count; ++t) {
      RandomStream stream = zone_stream(base, k_count, t, z).split(1);
      w[z][t] = stream.next_gamma(zone.gamma_c[c[z][t] - 1]);
      std::vector<double> share = zone.phi;
      if (config.q < 1.0) {
        const auto noise = stream.next_dirichlet(config.dirichlet_r, members);
        for (std::size_t i = 0; i < members; ++i) {
          share[i] = config.q * zone.phi[i] + (1.0 - config.q) * noise[i];
        }
      }
      for (std::size_t i = 0; i < members; ++i) {
        const int s = zone.members[i];
        x[static_cast<std::size_t>(s) * t_count + t] = share[i] * w[z][t];
      }
    }
  }
  for (int s = 0; s < s_count; ++s) {
    const auto& zone_c = c[partition.h[s]];
    for (int t = 0; t < t_count; ++t) latent.set_z(s, t, zone_c[t]);
  }
  SimulationOutput out =
      finish_output(6, parameter_count(6, s_count, k_count), config, s_count,
                    std::move(x), std::move(latent));
  out.zone_volume = std::move(w);
  return out;
}

SimulationOutput simulate(const ModelParams& params,
                          const SimulationConfig& config,
                          const ZoneParams* zone_params,
                          const ZonePartition* partition) {
  switch (config.model_id) {
    case 1: return simulate_m1(params, config);
    case 2: return simulate_m2(params, config);
    case 3: return simulate_m3(params, config);
    case 4: return simulate_m4(params, config);
    case 5:
    case 6:
      if (zone_params == nullptr || partition == nullptr) {
        throw UsageError("simulate: models 5 and 6 require zone parameters");
      }
      return config.model_id == 5
                 ? simulate_m5(params, *zone_params, *partition, config)
                 : simulate_m6(params, *zone_params, *partition, config);
    default:
      throw ConfigError("simulate: model_id must be in 1..6");
  }
}

ZoneParams learn_zone_params(const LatentState& mode, const RainfallField& field,
                             const ZonePartition& partition) {
  if (mode.locations != field.locations() || mode.days != field.days()) {
    throw DimensionError("learn_zone_params: latent/field shape mismatch");
  }
  if (static_cast<int>(partition.h.size()) != field.locations()) {
    throw DimensionError("learn_zone_params: partition size mismatch");
  }
  const int t_count = field.days();
  ZoneParams out;
  out.zones.resize(partition.k());
  const auto member_lists = partition.members();
  for (int z = 0; z < partition.k(); ++z) {
    ZoneParams::PerZone& zone = out.zones[z];
    zone.members = member_lists[z];
    if (zone.members.empty()) {
      throw ValidationError("learn_zone_params: empty zone " + std::to_string(z));
    }

    // canonical chain by per-day majority (ties -> 2)
    std::vector<std::uint8_t> c(t_count);
    for (int t = 0; t < t_count; ++t) {
      int ones = 0;
      for (int s : zone.members) {
        if (mode.z_at(s, t) == 1) ++ones;
      }
      c[t] = (2 * ones > static_cast<int>(zone.members.size())) ? 1 : 2;
    }

    double pi_counts[2][3][2] = {};
    for (int t = 1; t < t_count; ++t) {
      pi_counts[c[t - 1] - 1][mode.u[t] - 1][c[t] - 1] += 1.0;
    }
    for (int l = 0; l < 2; ++l) {
      for (int m = 0; m < 3; ++m) {
        const double total = pi_counts[l][m][0] + pi_counts[l][m][1] + 2.0;
        zone.pi[l][m] = {(pi_counts[l][m][0] + 1.0) / total,
                         (pi_counts[l][m][1] + 1.0) / total};
      }
    }

    std::vector<double> w_data(t_count, 0.0);
    for (int s : zone.members) {
      const auto series = field.series(s);
      for (int t = 0; t < t_count; ++t) w_data[t] += series[t];
    }
    MomentAcc acc[2], pooled;
    for (int t = 0; t < t_count; ++t) {
      acc[c[t] - 1].add(w_data[t]);
      pooled.add(w_data[t]);
    }
    const auto pooled_fit = fit_from_acc(pooled);
    const GammaParams pooled_params =
        pooled_fit ? *pooled_fit : GammaParams{1.0, std::max(pooled.mean(), 0.1)};
    for (int k = 0; k < 2; ++k) {
      if (auto fit = fit_from_acc(acc[k])) {
        zone.gamma_c[k] = *fit;
      } else {
        zone.gamma_c[k] = pooled_params;
      }
    }

    double zone_total = 0.0;
    std::vector<double> member_totals(zone.members.size(), 0.0);
    for (std::size_t i = 0; i < zone.members.size(); ++i) {
      const auto series = field.series(zone.members[i]);
      for (int t = 0; t < t_count; ++t) member_totals[i] += series[t];
      zone_total += member_totals[i];
    }
    zone.phi.resize(zone.members.size());
    if (zone_total > 0.0) {
      for (std::size_t i = 0; i < zone.members.size(); ++i) {
        zone.phi[i] = member_totals[i] / zone_total;
      }
    } else {
      std::fill(zone.phi.begin(), zone.phi.end(),
                1.0 / static_cast<double>(zone.members.size()));
    }
  }
  return out;
}

}  // namespace rainsim
