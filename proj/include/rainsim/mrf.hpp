#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rainsim/grid.hpp"
#include "rainsim/prob.hpp"

namespace rainsim {

// Binary local state field Z (values 1/2, location-major) plus the ternary
// all-country state series U (values 1..3).
struct LatentState {
  int locations = 0;
  int days = 0;
  std::vector<std::uint8_t> z;  // locations*days
  std::vector<std::uint8_t> u;  // days

  LatentState() = default;
  LatentState(int s, int t)
      : locations(s), days(t),
        z(static_cast<std::size_t>(s) * t, 1), u(t, 3) {}

  std::uint8_t z_at(int s, int t) const {
    return z[static_cast<std::size_t>(s) * days + t];
  }
  void set_z(int s, int t, std::uint8_t v) {
    z[static_cast<std::size_t>(s) * days + t] = v;
  }
};

struct TrainConfig {
  int burn_in = 50;
  int n_samples = 50;
  int thin = 5;
  std::uint64_t seed = 0;
  double temporal_ratio_z = 99.0;  // prior odds of Z(s,t) == Z(s,t-1)
  double temporal_ratio_u = 99.0;
  double rain_floor_mm = 0.1;      // Gamma has no mass at 0
  int em_max_iters = 200;
  double em_tol = 1e-9;
};

// Edge weights of the field plus the current emission parameters.
// Log-potentials: an edge contributes its "agree" weight when the incident
// states match and 0 otherwise (disagree weight normalized to 1). Scale
// edges match Z=1 with U=1 and Z=2 with U=2; the scale edge under U=3 is
// the geometric mean of the agree/disagree values (log-weight corr/2), so
// the normal state sits midway between the other two and cancels out of
// the Z conditionals.
struct PotentialTable {
  // Per location: (neighbor id, correlation of the two rainfall series).
  std::vector<std::vector<std::pair<int, double>>> spatial;
  // Per location: correlation of X(s,.) with the aggregate Y.
  std::vector<double> scale_corr;
  double rho_z = 99.0;
  double rho_u = 99.0;
  std::vector<std::array<GammaParams, 2>> gamma;  // per location, state 1/2
  std::array<GaussianParams, 3> gauss;            // per U state

  double a_spatial(int s, int j) const { return spatial[s][j].second; }
  double a_scale(int s) const;  // exp(scale_corr)
};

PotentialTable build_potentials(const RainfallField& field,
                                const NeighborSet& nb,
                                const TrainConfig& config);

struct EmInit {
  LatentState state;
  std::vector<std::array<GammaParams, 2>> gamma;
  std::array<GaussianParams, 3> gauss;
  std::vector<std::string> warnings;
};

// Per-location 2-component Gamma mixture EM (spatial/temporal/scale edges
// ignored); U seeded from terciles of Y (top third -> 1, bottom -> 2,
// middle -> 3).
EmInit em_initialize(const RainfallField& field, const TrainConfig& config);

// Normalized conditional for one Z(s,t) (Eq. of the field), k in {1,2}.
// x is the rainfall value already floored by the caller.
std::array<double, 2> gibbs_conditional_z(int s, int t,
                                          const LatentState& state,
                                          const PotentialTable& pots,
                                          double x);

// Normalized conditional for one U(t), k in {1,2,3}.
std::array<double, 3> gibbs_conditional_u(int t, const LatentState& state,
                                          const PotentialTable& pots,
                                          double y);

// One full sweep: all Z in (location, day) raster order, then all U.
// Draws come from substreams keyed by (sweep_index, site), so a fixed seed
// reproduces the chain regardless of how sites are scheduled.
void gibbs_sweep(LatentState& state, const PotentialTable& pots,
                 const RainfallField& field, const AggregateSeries& agg,
                 const RandomStream& base, int sweep_index,
                 double rain_floor_mm);

struct LocationParams {
  std::array<GammaParams, 2> gamma;
  std::array<bool, 2> gamma_fallback = {false, false};
  TransitionMatrix tau;                                      // 2x2
  std::array<double, 2> tau_hat = {0.5, 0.5};                // stationary of tau
  std::array<std::array<double, 2>, 3> theta = {};           // [u-1][k-1]
  std::array<std::array<std::array<double, 2>, 3>, 2> pi = {};  // [l-1][m-1][k-1]
};

struct ModelParams {
  std::vector<LocationParams> loc;
  TransitionMatrix lambda;  // 3x3
  std::array<double, 3> lambda_hat = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  std::array<GaussianParams, 3> gauss;
  std::vector<std::array<double, 3>> u_posterior;  // per day, from samples
  double rain_floor_mm = 0.1;

  int locations() const { return static_cast<int>(loc.size()); }
};

// MAP tables from the latent mode: add-one smoothed counts for tau, theta,
// pi, lambda; moment fits for the emissions (pooled per-location fallback
// when a state has fewer than 2 member days). Enforces the label convention
// mean(state 1) >= mean(state 2) by flipping locations as needed; the input
// mode is not modified.
ModelParams extract_map_params(const LatentState& mode,
                               const RainfallField& field,
                               const NeighborSet& nb, double rain_floor_mm);

struct TrainResult {
  LatentState mode;
  ModelParams params;
  std::vector<LatentState> trace;  // collected post-burn-in samples
  std::vector<std::string> warnings;
};

// Full training pass: sweeps with per-sweep emission re-estimation,
// burn-in, thinned collection, per-variable posterior mode, MAP parameters.
TrainResult run_gibbs(const RainfallField& field, const NeighborSet& nb,
                      const EmInit& init, const TrainConfig& config);

// Convenience: em_initialize + run_gibbs.
TrainResult train(const RainfallField& field, const NeighborSet& nb,
                  const TrainConfig& config);

void write_params_json(const ModelParams& params, const TrainConfig& config,
                       const std::vector<std::string>& warnings,
                       const std::filesystem::path& path);
ModelParams read_params_json(const std::filesystem::path& path);

void write_latent_csv(const LatentState& state,
                      const std::vector<DayLabel>& days,
                      const std::filesystem::path& path);
LatentState read_latent_csv(const std::filesystem::path& path);

TrainConfig read_train_config_json(const std::filesystem::path& path);

}  // namespace rainsim
