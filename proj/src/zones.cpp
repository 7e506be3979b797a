#include "rainsim/zones.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>

#include <json.hpp>

#include "rainsim/errors.hpp"
#include "rainsim/prob.hpp"

namespace rainsim {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

std::vector<std::vector<int>> ZonePartition::members() const {
  std::vector<std::vector<int>> out(v.size());
  for (int s = 0; s < static_cast<int>(h.size()); ++s) out[h[s]].push_back(s);
  return out;
}

double sccrp_log_prior(const std::vector<int>& h, int s, int zone,
                       const NeighborSet& nb, double crp_alpha) {
  if (!(crp_alpha > 0.0)) {
    throw std::domain_error("sccrp_log_prior: crp_alpha must be positive");
  }
  if (zone == kNewZone) return std::log(crp_alpha);
  int count = 0;
  bool adjacent = false;
  for (int other = 0; other < static_cast<int>(h.size()); ++other) {
    if (other != s && h[other] == zone) ++count;
  }
  for (int other : nb[s]) {
    if (other != s && h[other] == zone) adjacent = true;
  }
  if (count == 0 || !adjacent) return kNegInf;
  return std::log(static_cast<double>(count));
}

double zone_likelihood(std::span<const std::uint8_t> z_s,
                       std::span<const std::uint8_t> v_k, double p) {
  if (z_s.size() != v_k.size()) {
    throw DimensionError("zone_likelihood: length mismatch");
  }
  if (!(p > 0.0) || p > 1.0) {
    throw std::domain_error("zone_likelihood: p must be in (0, 1]");
  }
  std::size_t agree = 0;
  for (std::size_t t = 0; t < z_s.size(); ++t) {
    if (z_s[t] == v_k[t]) ++agree;
  }
  const std::size_t disagree = z_s.size() - agree;
  double ll = 0.0;
  if (agree > 0) ll += static_cast<double>(agree) * std::log(p);
  if (disagree > 0) ll += static_cast<double>(disagree) * std::log(1.0 - p);
  return ll;
}

namespace {

std::vector<std::uint8_t> majority_vector(
    const std::vector<std::vector<std::uint8_t>>& z_rows,
    const std::vector<int>& members, std::size_t t_count) {
  std::vector<std::uint8_t> v(t_count, 2);
  for (std::size_t t = 0; t < t_count; ++t) {
    int ones = 0;
    for (int s : members) {
      if (z_rows[s][t] == 1) ++ones;
    }
    // ties -> state 2
    v[t] = (2 * ones > static_cast<int>(members.size())) ? 1 : 2;
  }
  return v;
}

// Connected components of `members` under nb adjacency, deterministic order.
std::vector<std::vector<int>> connected_components(const std::vector<int>& members,
                                                   const NeighborSet& nb) {
  std::vector<int> sorted = members;
  std::sort(sorted.begin(), sorted.end());
  std::map<int, bool> seen;
  for (int s : sorted) seen[s] = false;
  std::vector<std::vector<int>> components;
  for (int root : sorted) {
    if (seen[root]) continue;
    std::vector<int> comp, stack{root};
    seen[root] = true;
    while (!stack.empty()) {
      const int cur = stack.back();
      stack.pop_back();
      comp.push_back(cur);
      for (int other : nb[cur]) {
        auto it = seen.find(other);
        if (it != seen.end() && !it->second) {
          it->second = true;
          stack.push_back(other);
        }
      }
    }
    std::sort(comp.begin(), comp.end());
    components.push_back(std::move(comp));
  }
  return components;
}

struct ZoneRec {
  std::vector<int> members;  // sorted
  std::vector<std::uint8_t> v;
};

struct SamplerState {
  std::vector<int> h;
  std::map<int, ZoneRec> zones;  // ordered for deterministic iteration
  int next_id = 0;

  int create_zone(std::vector<int> members, std::vector<std::uint8_t> v) {
    const int id = next_id++;
    zones[id] = ZoneRec{std::move(members), std::move(v)};
    for (int s : zones[id].members) h[s] = id;
    return id;
  }
};

void check_connectivity(const SamplerState& st, const NeighborSet& nb) {
  for (const auto& [id, rec] : st.zones) {
    if (connected_components(rec.members, nb).size() != 1) {
      throw std::logic_error("sccrp: zone lost connectivity");
    }
  }
}

}  // namespace

ZonePartition run_sccrp(const std::vector<std::vector<std::uint8_t>>& z_rows,
                        const NeighborSet& nb, double p, double crp_alpha,
                        const SccrpConfig& config) {
  const int s_count = static_cast<int>(z_rows.size());
  if (s_count == 0) throw ValidationError("run_sccrp: empty field");
  if (static_cast<int>(nb.size()) != s_count) {
    throw DimensionError("run_sccrp: neighbor set size mismatch");
  }
  const std::size_t t_count = z_rows[0].size();
  for (const auto& row : z_rows) {
    if (row.size() != t_count) {
      throw DimensionError("run_sccrp: ragged Z rows");
    }
    for (std::uint8_t v : row) {
      if (v != 1 && v != 2) throw ValidationError("run_sccrp: Z values must be 1 or 2");
    }
  }
  if (!(p > 0.0) || p > 1.0) {
    throw std::domain_error("run_sccrp: p must be in (0, 1]");
  }
  if (!(crp_alpha > 0.0)) {
    throw std::domain_error("run_sccrp: crp_alpha must be positive");
  }
  if (config.sweeps < 1) throw ConfigError("run_sccrp: sweeps must be >= 1");

  SamplerState st;
  st.h.assign(s_count, -1);
  for (int s = 0; s < s_count; ++s) {
    st.create_zone({s}, z_rows[s]);
  }

  const RandomStream base(config.seed, 1);
  for (int sweep = 0; sweep < config.sweeps; ++sweep) {
    const RandomStream sweep_stream = base.split(sweep);
    for (int s = 0; s < s_count; ++s) {
      // detach s from its zone; a cut vertex stays put this sweep so the
      // connectivity invariant holds without amputating its zone
      const int old_zone = st.h[s];
      ZoneRec& old_rec = st.zones[old_zone];
      if (old_rec.members.size() > 1) {
        std::vector<int> remaining;
        remaining.reserve(old_rec.members.size() - 1);
        for (int member : old_rec.members) {
          if (member != s) remaining.push_back(member);
        }
        if (connected_components(remaining, nb).size() > 1) continue;
        old_rec.members = std::move(remaining);
        st.h[s] = -1;
      } else {
        st.zones.erase(old_zone);
        st.h[s] = -1;
      }

      // candidates: distinct zones adjacent to s, plus a new zone
      std::vector<int> candidates;
      for (int other : nb[s]) {
        if (st.h[other] >= 0) candidates.push_back(st.h[other]);
      }
      std::sort(candidates.begin(), candidates.end());
      candidates.erase(std::unique(candidates.begin(), candidates.end()),
                       candidates.end());

      std::vector<double> logw;
      logw.reserve(candidates.size() + 1);
      for (int zone : candidates) {
        const ZoneRec& rec = st.zones.at(zone);
        logw.push_back(std::log(static_cast<double>(rec.members.size())) +
                       zone_likelihood(z_rows[s], rec.v, p));
      }
      // fresh zone: canonical vector marginalized over a uniform prior,
      // prod_t sum_v (1/2) p^[z=v] (1-p)^[z!=v] = (1/2)^T
      logw.push_back(std::log(crp_alpha) +
                     static_cast<double>(t_count) * std::log(0.5));

      const double lse = log_sum_exp(logw);
      std::vector<double> weights(logw.size());
      for (std::size_t i = 0; i < logw.size(); ++i) {
        weights[i] = std::exp(logw[i] - lse);
      }
      RandomStream site = sweep_stream.split(static_cast<std::uint64_t>(s));
      const std::size_t pick = sample_categorical(site, weights);
      if (pick < candidates.size()) {
        ZoneRec& rec = st.zones[candidates[pick]];
        rec.members.insert(
            std::lower_bound(rec.members.begin(), rec.members.end(), s), s);
        st.h[s] = candidates[pick];
      } else {
        st.create_zone({s}, z_rows[s]);
      }
    }
    for (auto& [id, rec] : st.zones) {
      rec.v = majority_vector(z_rows, rec.members, t_count);
    }
    check_connectivity(st, nb);
  }

  // dense relabel in order of smallest member id
  std::vector<std::pair<int, int>> order;  // (min member, zone id)
  for (const auto& [id, rec] : st.zones) {
    order.emplace_back(rec.members.front(), id);
  }
  std::sort(order.begin(), order.end());
  ZonePartition partition;
  partition.p = p;
  partition.crp_alpha = crp_alpha;
  partition.h.assign(s_count, -1);
  for (const auto& [min_member, id] : order) {
    const ZoneRec& rec = st.zones.at(id);
    const int dense = static_cast<int>(partition.v.size());
    partition.v.push_back(rec.v);
    partition.n_k.push_back(static_cast<int>(rec.members.size()));
    for (int s : rec.members) partition.h[s] = dense;
  }
  return partition;
}

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) {
    throw DimensionError("adjusted_rand_index: length mismatch");
  }
  const double n = static_cast<double>(a.size());
  if (a.size() < 2) throw DimensionError("adjusted_rand_index: need >= 2 items");
  std::map<std::pair<int, int>, double> cell;
  std::map<int, double> row, col;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cell[{a[i], b[i]}] += 1.0;
    row[a[i]] += 1.0;
    col[b[i]] += 1.0;
  }
  auto choose2 = [](double m) { return m * (m - 1.0) / 2.0; };
  double sum_cell = 0.0, sum_row = 0.0, sum_col = 0.0;
  for (const auto& [key, v] : cell) sum_cell += choose2(v);
  for (const auto& [key, v] : row) sum_row += choose2(v);
  for (const auto& [key, v] : col) sum_col += choose2(v);
  const double total = choose2(n);
  const double expected = sum_row * sum_col / total;
  const double maximum = 0.5 * (sum_row + sum_col);
  if (std::abs(maximum - expected) < 1e-300) return 1.0;  // both trivial
  return (sum_cell - expected) / (maximum - expected);
}

void write_zones_json(const ZonePartition& partition,
                      const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["p"] = partition.p;
  j["crp_alpha"] = partition.crp_alpha;
  j["K"] = partition.k();
  auto assignments = nlohmann::ordered_json::array();
  for (int s = 0; s < static_cast<int>(partition.h.size()); ++s) {
    assignments.push_back({{"loc_id", s}, {"zone_id", partition.h[s]}});
  }
  j["assignments"] = std::move(assignments);
  auto canonical = nlohmann::ordered_json::array();
  for (int z = 0; z < partition.k(); ++z) {
    auto v = nlohmann::ordered_json::array();
    for (std::uint8_t state : partition.v[z]) v.push_back(static_cast<int>(state));
    canonical.push_back({{"zone_id", z}, {"v", std::move(v)}});
  }
  j["canonical"] = std::move(canonical);
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write zones: " + path.string());
  out << j.dump(2) << '\n';
}

ZonePartition read_zones_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open zones: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("zones " + path.string() + ": " + e.what());
  }
  try {
    ZonePartition partition;
    partition.p = j.at("p").get<double>();
    partition.crp_alpha = j.at("crp_alpha").get<double>();
    const int k = j.at("K").get<int>();
    partition.h.assign(j.at("assignments").size(), -1);
    for (const auto& item : j.at("assignments")) {
      const int loc = item.at("loc_id").get<int>();
      const int zone = item.at("zone_id").get<int>();
      if (loc < 0 || loc >= static_cast<int>(partition.h.size()) || zone < 0 ||
          zone >= k) {
        throw ValidationError("zones " + path.string() + ": id out of range");
      }
      partition.h[loc] = zone;
    }
    partition.v.resize(k);
    for (const auto& item : j.at("canonical")) {
      const int zone = item.at("zone_id").get<int>();
      if (zone < 0 || zone >= k) {
        throw ValidationError("zones " + path.string() + ": zone id out of range");
      }
      for (int v : item.at("v").get<std::vector<int>>()) {
        if (v != 1 && v != 2) {
          throw ValidationError("zones " + path.string() + ": canonical value");
        }
        partition.v[zone].push_back(static_cast<std::uint8_t>(v));
      }
    }
    partition.n_k.assign(k, 0);
    for (int zone : partition.h) {
      if (zone < 0) throw ValidationError("zones " + path.string() + ": unassigned location");
      ++partition.n_k[zone];
    }
    return partition;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("zones " + path.string() + ": " + e.what());
  }
}

}  // namespace rainsim
