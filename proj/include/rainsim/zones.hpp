#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "rainsim/grid.hpp"

namespace rainsim {

// Spatially coherent partition: every zone's member set is connected under
// grid adjacency; V holds one canonical binary vector per zone.
struct ZonePartition {
  std::vector<int> h;                           // per-location zone id, dense 0..K-1
  std::vector<std::vector<std::uint8_t>> v;     // K canonical vectors, values 1/2
  double p = 0.9;                               // agreement probability, (0, 1]
  double crp_alpha = 1.0;
  std::vector<int> n_k;                         // member count per zone

  int k() const { return static_cast<int>(v.size()); }
  std::vector<std::vector<int>> members() const;
};

// Passing kNewZone as the zone id scores opening a fresh zone.
constexpr int kNewZone = -1;

// log n_k (count excluding s) for an existing zone adjacent to s;
// log(crp_alpha) for a new zone; -inf for a non-adjacent existing zone.
double sccrp_log_prior(const std::vector<int>& h, int s, int zone,
                       const NeighborSet& nb, double crp_alpha);

// m log p + (T - m) log(1-p) with m = #{t : z_s(t) == v_k(t)}.
// p in (0, 1]; zero-count terms are skipped so p = 1 scores exact matches 0
// and any disagreement -inf.
double zone_likelihood(std::span<const std::uint8_t> z_s,
                       std::span<const std::uint8_t> v_k, double p);

struct SccrpConfig {
  int sweeps = 200;
  std::uint64_t seed = 0;
};

// Gibbs sampling over zone assignments with per-sweep majority-vote
// re-estimation of the canonical vectors. A location whose removal would
// disconnect its zone is left in place for that sweep, which keeps the
// connectivity invariant exact.
ZonePartition run_sccrp(const std::vector<std::vector<std::uint8_t>>& z_rows,
                        const NeighborSet& nb, double p, double crp_alpha,
                        const SccrpConfig& config);

// Agreement of two partitions up to label permutation, in [-1, 1].
double adjusted_rand_index(std::span<const int> a, std::span<const int> b);

void write_zones_json(const ZonePartition& partition,
                      const std::filesystem::path& path);
ZonePartition read_zones_json(const std::filesystem::path& path);

}  // namespace rainsim
