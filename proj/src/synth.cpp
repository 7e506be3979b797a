#include "rainsim/synth.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include "rainsim/errors.hpp"
#include "rainsim/prob.hpp"

namespace rainsim {

namespace {

// Contiguous planted zones: spread seeds greedily by grid distance, then
// grow all of them breadth-first until the grid is covered.
std::vector<int> plant_zones(int rows, int cols, int zones, RandomStream stream) {
  const int n = rows * cols;
  std::vector<int> seed_cells;
  std::vector<int> candidates(n);
  std::iota(candidates.begin(), candidates.end(), 0);
  seed_cells.push_back(
      static_cast<int>(stream.next_u64() % static_cast<std::uint64_t>(n)));
  while (static_cast<int>(seed_cells.size()) < zones) {
    int best = -1;
    long long best_dist = -1;
    for (int cell : candidates) {
      long long dist = std::numeric_limits<long long>::max();
      for (int seed : seed_cells) {
        const long long dr = cell / cols - seed / cols;
        const long long dc = cell % cols - seed % cols;
        dist = std::min(dist, std::abs(dr) + std::abs(dc));
      }
      if (dist > best_dist) {
        best_dist = dist;
        best = cell;
      }
    }
    seed_cells.push_back(best);
  }
  std::vector<int> assignment(n, -1);
  std::deque<int> frontier;
  for (int z = 0; z < zones; ++z) {
    assignment[seed_cells[z]] = z;
    frontier.push_back(seed_cells[z]);
  }
  while (!frontier.empty()) {
    const int cell = frontier.front();
    frontier.pop_front();
    const int r = cell / cols, c = cell % cols;
    const int dr[4] = {-1, 1, 0, 0};
    const int dc[4] = {0, 0, -1, 1};
    for (int k = 0; k < 4; ++k) {
      const int nr = r + dr[k], nc = c + dc[k];
      if (nr < 0 || nr >= rows || nc < 0 || nc >= cols) continue;
      const int other = nr * cols + nc;
      if (assignment[other] == -1) {
        assignment[other] = assignment[cell];
        frontier.push_back(other);
      }
    }
  }
  return assignment;
}

std::size_t fraction_differing(const std::vector<std::uint8_t>& a,
                               const std::vector<std::uint8_t>& b) {
  std::size_t diff = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) ++diff;
  }
  return diff;
}

}  // namespace

SynthDataset generate_synthetic(const SynthSpec& spec) {
  if (spec.zones < 1) throw ConfigError("synth: zones must be >= 1");
  if (spec.rows < 1 || spec.cols < 1) {
    throw ConfigError("synth: grid dimensions must be positive");
  }
  if (spec.days < 2) throw ConfigError("synth: days must be >= 2");
  if (spec.zones > spec.rows * spec.cols) {
    throw ConfigError("synth: more zones than grid cells");
  }
  if (!(spec.agreement > 0.5) || spec.agreement > 1.0) {
    throw ConfigError("synth: agreement must be in (0.5, 1]");
  }

  const int s_count = spec.rows * spec.cols;
  const int t_count = spec.days;
  const RandomStream base(spec.seed, 77);

  GridSpec grid{spec.rows, spec.cols, 6.5, 66.5, 1.0, 1.0};
  std::vector<GridLocation> locations;
  for (int r = 0; r < spec.rows; ++r) {
    for (int c = 0; c < spec.cols; ++c) {
      locations.push_back(GridLocation{r * spec.cols + c, r, c});
    }
  }
  GridManifest manifest(grid, std::move(locations));

  SynthDataset out{std::move(manifest),
                   RainfallField(1, {DayLabel{2000, 6, 1}}, {0.0}),
                   LatentState(s_count, t_count),
                   ZonePartition{},
                   {},
                   TransitionMatrix({{0.70, 0.05, 0.25},
                                     {0.05, 0.70, 0.25},
                                     {0.15, 0.15, 0.70}}),
                   {}};

  // wet-state probability by (previous state, U); stationary wet fractions
  // come out near 0.97 / 0.02 / 0.50, so the three aggregate regimes are
  // crisply separated
  out.pi[0][0] = {0.97, 0.03};  // prev wet, U=1
  out.pi[0][1] = {0.10, 0.90};  // prev wet, U=2
  out.pi[0][2] = {0.60, 0.40};  // prev wet, U=3
  out.pi[1][0] = {0.90, 0.10};  // prev dry, U=1
  out.pi[1][1] = {0.02, 0.98};
  out.pi[1][2] = {0.40, 0.60};

  // U chain
  {
    RandomStream stream = base.split(0);
    const auto lambda_hat = stationary_distribution(out.lambda);
    std::size_t prev = sample_categorical(stream, lambda_hat);
    out.truth.u[0] = static_cast<std::uint8_t>(prev + 1);
    for (int t = 1; t < t_count; ++t) {
      prev = sample_categorical(stream, out.lambda.row(prev));
      out.truth.u[t] = static_cast<std::uint8_t>(prev + 1);
    }
  }

  // planted partition
  out.zones.h = plant_zones(spec.rows, spec.cols, spec.zones, base.split(1));
  out.zones.p = spec.agreement;
  out.zones.crp_alpha = 1.0;
  out.zones.n_k.assign(spec.zones, 0);
  for (int zone : out.zones.h) ++out.zones.n_k[zone];

  auto sample_chain = [&](RandomStream stream) {
    std::vector<std::uint8_t> chain(t_count);
    std::size_t prev = stream.next_double() < 0.5 ? 0 : 1;
    for (int t = 0; t < t_count; ++t) {
      const auto& row = out.pi[prev][out.truth.u[t] - 1];
      prev = sample_categorical(stream, std::span<const double>(row.data(), 2));
      chain[t] = static_cast<std::uint8_t>(prev + 1);
    }
    return chain;
  };

  if (spec.process == SynthSpec::Process::m5) {
    // zonal chains, resampled when two come out nearly identical
    out.zones.v.resize(spec.zones);
    for (int z = 0; z < spec.zones; ++z) {
      for (int attempt = 0; attempt < 20; ++attempt) {
        out.zones.v[z] = sample_chain(base.split(2).split(z * 32 + attempt));
        bool distinct = true;
        for (int other = 0; other < z; ++other) {
          if (fraction_differing(out.zones.v[z], out.zones.v[other]) <
              static_cast<std::size_t>(0.2 * t_count)) {
            distinct = false;
            break;
          }
        }
        if (distinct) break;
      }
    }
    RandomStream flip_stream = base.split(3);
    for (int s = 0; s < s_count; ++s) {
      const auto& chain = out.zones.v[out.zones.h[s]];
      for (int t = 0; t < t_count; ++t) {
        const bool agree = flip_stream.next_double() < spec.agreement;
        out.truth.set_z(s, t,
                        agree ? chain[t] : static_cast<std::uint8_t>(3 - chain[t]));
      }
    }
  } else {
    // per-location chains; zone canonical vectors recorded by majority
    for (int s = 0; s < s_count; ++s) {
      const auto chain = sample_chain(base.split(2).split(s));
      for (int t = 0; t < t_count; ++t) out.truth.set_z(s, t, chain[t]);
    }
    out.zones.v.assign(spec.zones, std::vector<std::uint8_t>(t_count, 2));
    for (int z = 0; z < spec.zones; ++z) {
      for (int t = 0; t < t_count; ++t) {
        int ones = 0;
        for (int s = 0; s < s_count; ++s) {
          if (out.zones.h[s] == z && out.truth.z_at(s, t) == 1) ++ones;
        }
        out.zones.v[z][t] = (2 * ones > out.zones.n_k[z]) ? 1 : 2;
      }
    }
  }

  // per-location emission truth with mild jitter
  out.gamma.resize(s_count);
  {
    RandomStream jitter = base.split(4);
    for (int s = 0; s < s_count; ++s) {
      const double j1 = 0.9 + 0.2 * jitter.next_double();
      const double j2 = 0.9 + 0.2 * jitter.next_double();
      out.gamma[s] = {GammaParams{8.0 * j1, 2.5 * j2},
                      GammaParams{2.0 * j1, 0.75 * j2}};
    }
  }

  std::vector<double> x(static_cast<std::size_t>(s_count) * t_count);
  for (int s = 0; s < s_count; ++s) {
    for (int t = 0; t < t_count; ++t) {
      RandomStream cell = base.split(5).split(
          static_cast<std::uint64_t>(t) * s_count + s);
      x[static_cast<std::size_t>(s) * t_count + t] =
          cell.next_gamma(out.gamma[s][out.truth.z_at(s, t) - 1]);
    }
  }
  out.field = RainfallField(s_count, monsoon_season_labels(t_count, spec.start_year),
                            std::move(x));
  return out;
}

}  // namespace rainsim
