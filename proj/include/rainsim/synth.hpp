#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "rainsim/grid.hpp"
#include "rainsim/mrf.hpp"
#include "rainsim/zones.hpp"

namespace rainsim {

// Planted-truth generator for desk-scale verification. Process m5 draws a
// canonical chain per planted zone and flips each cell against it with
// probability 1 - agreement; process m4 runs an independent chain per
// location conditioned on U.
struct SynthSpec {
  int rows = 10;
  int cols = 10;
  int days = 200;
  int zones = 3;
  std::uint64_t seed = 0;
  enum class Process { m4, m5 } process = Process::m5;
  double agreement = 0.95;
  int start_year = 2000;
};

struct SynthDataset {
  GridManifest manifest;
  RainfallField field;
  LatentState truth;
  ZonePartition zones;  // planted partition; v holds the zonal chains
  std::vector<std::array<GammaParams, 2>> gamma;  // per-location truth
  TransitionMatrix lambda;
  std::array<std::array<std::array<double, 2>, 3>, 2> pi;  // shared [l][m][k]
};

SynthDataset generate_synthetic(const SynthSpec& spec);

}  // namespace rainsim
