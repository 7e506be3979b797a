#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "rainsim/grid.hpp"
#include "rainsim/mrf.hpp"
#include "rainsim/simulators.hpp"

namespace rainsim {

// Set of revealed rainfall values; no duplicate (s, t), all x >= 0.
struct PartialObservation {
  std::vector<ObservedCell> entries;
  double reveal_fraction = 0.0;
};

// Validates ranges and duplicates against the given shape.
void validate_observation(const PartialObservation& obs, int s_count, int t_count);

enum class UMethod { viterbi_from_y, argmax_from_z };

struct UEstimate {
  std::vector<std::uint8_t> u;  // values 1..3
  UMethod method = UMethod::viterbi_from_y;
};

// Max-product decoding of the 3-state chain with Gaussian emissions
// (initial lambda_hat, transitions lambda); ties break toward the lower
// state index.
UEstimate infer_u_from_y(const AggregateSeries& y, const ModelParams& params);

constexpr std::uint8_t kZUnknown = 0;

// Observed cells classified by Gamma likelihood, then spread along each
// location's day axis: a cell is filled once a temporal neighbor is known,
// keeping earlier estimates fixed. Locations with no observation stay
// entirely unknown. Returns S x T values in {0 (unknown), 1, 2},
// location-major.
std::vector<std::uint8_t> estimate_z_from_partial(const PartialObservation& obs,
                                                  const ModelParams& params,
                                                  int s_count, int t_count);

// U(t) = argmax_l sum over known Z of log theta; days with no known Z fall
// back to argmax lambda_hat.
UEstimate infer_u_from_z(const std::vector<std::uint8_t>& z_estimate,
                         int s_count, int t_count, const ModelParams& params);

// Injects the U override and the copy-through observation mask into a
// simulation config. Throws ConfigError on any shape mismatch.
SimulationConfig apply_conditioning(SimulationConfig base,
                                    const std::optional<UEstimate>& u_estimate,
                                    const PartialObservation* obs,
                                    int s_count);

PartialObservation read_observations_csv(const std::filesystem::path& path);
void write_observations_csv(const PartialObservation& obs,
                            const std::filesystem::path& path);

std::vector<std::uint8_t> read_u_series_csv(const std::filesystem::path& path);
void write_u_series_csv(const std::vector<std::uint8_t>& u,
                        const std::filesystem::path& path);

}  // namespace rainsim
