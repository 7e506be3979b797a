#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "rainsim/grid.hpp"
#include "rainsim/mrf.hpp"
#include "rainsim/zones.hpp"

namespace rainsim {

struct ObservedCell {
  int s = 0;
  int t = 0;
  double x = 0.0;
};

struct SimulationConfig {
  int model_id = 1;  // 1..6
  int t_sim = 0;
  std::uint64_t seed = 0;
  std::optional<std::vector<std::uint8_t>> u_override;  // consumed by models 3-6
  double q = 0.8;           // model 6 share mixing weight
  double dirichlet_r = 1.0; // model 6 share-corruption concentration
  std::vector<ObservedCell> observed;  // copied verbatim, excluded from sampling
  int start_year = 2000;    // for output day labels
};

// Zone-level tables for models 5 and 6.
struct ZoneParams {
  struct PerZone {
    std::vector<int> members;  // sorted location ids
    std::array<std::array<std::array<double, 2>, 3>, 2> pi = {};  // [l][m][k]
    std::array<GammaParams, 2> gamma_c;  // zone rainfall volume per state
    std::vector<double> phi;             // per-member share, sums to 1
  };
  std::vector<PerZone> zones;
};

struct SimulationOutput {
  RainfallField x;
  LatentState latent;
  AggregateSeries y;
  int model_id = 0;
  long long param_count = 0;
  // Model 6 only: zone rainfall volume W (K x T), for the share identity
  // sum_{s in z} X(s,t) = W(z,t).
  std::optional<std::vector<std::vector<double>>> zone_volume;
};

long long parameter_count(int model_id, long long s, long long k_p);

SimulationOutput simulate_m1(const ModelParams& params,
                             const SimulationConfig& config);
SimulationOutput simulate_m2(const ModelParams& params,
                             const SimulationConfig& config);
SimulationOutput simulate_m3(const ModelParams& params,
                             const SimulationConfig& config);
SimulationOutput simulate_m4(const ModelParams& params,
                             const SimulationConfig& config);
SimulationOutput simulate_m5(const ModelParams& params,
                             const ZoneParams& zone_params,
                             const ZonePartition& partition,
                             const SimulationConfig& config);
// X comes from zone volumes and shares only; params supplies the U chain
// transition tables.
SimulationOutput simulate_m6(const ModelParams& params,
                             const ZoneParams& zone_params,
                             const ZonePartition& partition,
                             const SimulationConfig& config);

// Dispatch by config.model_id; zone arguments required for models 5-6.
SimulationOutput simulate(const ModelParams& params,
                          const SimulationConfig& config,
                          const ZoneParams* zone_params = nullptr,
                          const ZonePartition* partition = nullptr);

// Zone tables from the training artifacts: canonical state C by per-day
// majority vote (ties -> 2), pi from (C_{t-1}, U_t, C_t) counts + 1, zone
// Gamma by moments over member-sum rainfall, phi from rainfall totals.
ZoneParams learn_zone_params(const LatentState& mode, const RainfallField& field,
                             const ZonePartition& partition);

}  // namespace rainsim
