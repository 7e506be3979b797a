#include "rainsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "rainsim/errors.hpp"
#include "rainsim/prob.hpp"

namespace rainsim {

LatentMetrics latent_metrics(const LatentState& state, const AggregateSeries& y,
                             const NeighborSet& nb) {
  const int s_count = state.locations;
  const int t_count = state.days;
  if (static_cast<int>(y.y.size()) != t_count) {
    throw DimensionError("latent_metrics: aggregate length mismatch");
  }
  if (static_cast<int>(nb.size()) != s_count) {
    throw DimensionError("latent_metrics: neighbor set size mismatch");
  }
  LatentMetrics m;

  std::vector<double> wet_count(t_count, 0.0);
  for (int s = 0; s < s_count; ++s) {
    for (int t = 0; t < t_count; ++t) {
      if (state.z_at(s, t) == 1) {
        ++m.zz1;
        wet_count[t] += 1.0;
      }
    }
  }

  double scoh_sum = 0.0;
  long long scoh_n = 0;
  for (int s = 0; s < s_count; ++s) {
    if (nb[s].empty()) continue;  // no neighbors, no coherence contribution
    for (int t = 0; t < t_count; ++t) {
      int match = 0;
      for (int other : nb[s]) {
        if (state.z_at(other, t) == state.z_at(s, t)) ++match;
      }
      scoh_sum += static_cast<double>(match) / static_cast<double>(nb[s].size());
      ++scoh_n;
    }
  }
  m.scoh = scoh_n > 0 ? scoh_sum / static_cast<double>(scoh_n) : 0.0;

  double tcoh_sum = 0.0;
  for (int s = 0; s < s_count; ++s) {
    int persist = 0;
    for (int t = 1; t < t_count; ++t) {
      if (state.z_at(s, t) == state.z_at(s, t - 1)) ++persist;
    }
    tcoh_sum += t_count > 1
                    ? static_cast<double>(persist) / static_cast<double>(t_count - 1)
                    : 1.0;
  }
  m.tcoh = tcoh_sum / static_cast<double>(s_count);

  m.spdiv = pearson_correlation(y.y, wet_count);

  for (int target = 1; target <= 2; ++target) {
    double sum = 0.0;
    int days = 0;
    for (int t = 0; t < t_count; ++t) {
      if (state.u[t] == target) {
        sum += wet_count[t];
        ++days;
      }
    }
    std::optional<double> value;
    if (days > 0) value = sum / static_cast<double>(days);
    (target == 1 ? m.nz1u1 : m.nz1u2) = value;
  }
  return m;
}

RainfallField standardize(const RainfallField& sim, const RainfallField& ref) {
  double sim_mean = 0.0, ref_mean = 0.0;
  for (double v : sim.values()) sim_mean += v;
  for (double v : ref.values()) ref_mean += v;
  sim_mean /= static_cast<double>(sim.values().size());
  ref_mean /= static_cast<double>(ref.values().size());
  if (!(sim_mean > 0.0)) {
    throw NumericError("standardize: simulated field has zero grand mean");
  }
  const double c = ref_mean / sim_mean;
  std::vector<double> scaled = sim.values();
  for (double& v : scaled) v *= c;
  return RainfallField(sim.locations(), sim.day_index(), std::move(scaled));
}

namespace {

void location_stats(const RainfallField& field, std::vector<double>& means,
                    std::vector<double>& sds) {
  const int s_count = field.locations();
  const double t = static_cast<double>(field.days());
  means.resize(s_count);
  sds.resize(s_count);
  for (int s = 0; s < s_count; ++s) {
    double mean = 0.0;
    for (double v : field.series(s)) mean += v;
    mean /= t;
    double var = 0.0;
    for (double v : field.series(s)) var += (v - mean) * (v - mean);
    var /= t;
    means[s] = mean;
    sds[s] = std::sqrt(var);
  }
}

}  // namespace

ObservedMetrics observed_metrics(const RainfallField& sim_raw,
                                 const RainfallField& ref,
                                 const NeighborSet& nb,
                                 const MetricThresholds& thresholds) {
  if (sim_raw.locations() != ref.locations()) {
    throw DimensionError("observed_metrics: location count mismatch");
  }
  if (static_cast<int>(nb.size()) != ref.locations()) {
    throw DimensionError("observed_metrics: neighbor set size mismatch");
  }
  const RainfallField sim = standardize(sim_raw, ref);
  const int s_count = sim.locations();
  const int t_sim = sim.days();
  ObservedMetrics m;

  std::vector<double> sim_means, sim_sds, ref_means, ref_sds;
  location_stats(sim, sim_means, sim_sds);
  location_stats(ref, ref_means, ref_sds);
  double dmx = 0.0, dsx = 0.0;
  int dmx_n = 0, dsx_n = 0;
  for (int s = 0; s < s_count; ++s) {
    if (ref_means[s] > 0.0) {
      dmx += std::abs(sim_means[s] - ref_means[s]) / ref_means[s];
      ++dmx_n;
    }
    if (ref_sds[s] > 0.0) {
      dsx += std::abs(sim_sds[s] - ref_sds[s]) / ref_sds[s];
      ++dsx_n;
    }
  }
  m.dmx = dmx_n > 0 ? dmx / dmx_n : 0.0;
  m.dsx = dsx_n > 0 ? dsx / dsx_n : 0.0;

  const AggregateSeries y_sim = aggregate(sim);
  const AggregateSeries y_ref = aggregate(ref);
  {
    double mean = 0.0;
    for (double v : y_sim.y) mean += v;
    mean /= static_cast<double>(t_sim);
    double var = 0.0;
    for (double v : y_sim.y) var += (v - mean) * (v - mean);
    m.sy = std::sqrt(var / static_cast<double>(t_sim));
  }

  for (double v : sim.values()) {
    if (v > thresholds.extreme_mm) ++m.x100;
  }

  {
    double spell_sum = 0.0;
    int spell_locs = 0;
    for (int s = 0; s < s_count; ++s) {
      int runs = 0;
      long long total = 0;
      int current = 0;
      for (double v : sim.series(s)) {
        if (v > thresholds.wet_mm) {
          ++current;
        } else if (current > 0) {
          ++runs;
          total += current;
          current = 0;
        }
      }
      if (current > 0) {
        ++runs;
        total += current;
      }
      if (runs > 0) {
        spell_sum += static_cast<double>(total) / runs;
        ++spell_locs;
      }
    }
    if (spell_locs > 0) m.wetln = spell_sum / spell_locs;
  }

  if (t_sim == ref.days()) {
    m.dcr = pearson_correlation(y_ref.y, y_sim.y);
  }

  {
    double sum = 0.0;
    int pairs = 0;
    for (int s = 0; s < s_count; ++s) {
      for (int other : nb[s]) {
        if (other > s) {
          sum += pearson_correlation(sim.series(s), sim.series(other));
          ++pairs;
        }
      }
    }
    m.scr = pairs > 0 ? sum / pairs : 0.0;
  }

  if (s_count >= 2) {
    std::vector<double> today(s_count), yesterday(s_count);
    double sum = 0.0;
    for (int t = 1; t < t_sim; ++t) {
      for (int s = 0; s < s_count; ++s) {
        today[s] = sim(s, t);
        yesterday[s] = sim(s, t - 1);
      }
      sum += pearson_correlation(yesterday, today);
    }
    m.tcr = t_sim > 1 ? sum / (t_sim - 1) : 0.0;
  }

  if (s_count >= 2) {
    m.spatcr = pearson_correlation(sim_means, ref_means);
  }
  return m;
}

namespace {

std::string fmt_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v) {
  return v ? fmt_value(*v) : "-";
}

std::string render_text_table(const std::vector<std::string>& header,
                              const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      width[c] = std::max(width[c], row[c].size());
    }
  }
  std::ostringstream out;
  auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out << "  ";
      out << row[c];
      for (std::size_t pad = row[c].size(); pad < width[c]; ++pad) out << ' ';
    }
    out << '\n';
  };
  emit(header);
  for (const auto& row : rows) emit(row);
  return out.str();
}

}  // namespace

Report render_report(const std::vector<ReportRow>& rows) {
  if (rows.empty()) throw UsageError("render_report: no rows");
  const bool latent = std::holds_alternative<LatentMetrics>(rows[0].metrics);
  for (const ReportRow& row : rows) {
    if (std::holds_alternative<LatentMetrics>(row.metrics) != latent) {
      throw UsageError("render_report: mixed metric kinds in one table");
    }
  }
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> cells;
  if (latent) {
    header = {"Model", "ZZ1", "SCoh", "TCoh", "SpDiv", "nZ1U1", "nZ1U2"};
    for (const ReportRow& row : rows) {
      const auto& m = std::get<LatentMetrics>(row.metrics);
      cells.push_back({row.label, std::to_string(m.zz1), fmt_value(m.scoh),
                       fmt_value(m.tcoh), fmt_value(m.spdiv), fmt_opt(m.nz1u1),
                       fmt_opt(m.nz1u2)});
    }
  } else {
    header = {"Model", "dMX", "dSX", "SY", "X100", "wetln", "dcr", "scr", "tcr"};
    for (const ReportRow& row : rows) {
      const auto& m = std::get<ObservedMetrics>(row.metrics);
      cells.push_back({row.label, fmt_value(m.dmx), fmt_value(m.dsx),
                       fmt_value(m.sy), std::to_string(m.x100), fmt_opt(m.wetln),
                       fmt_opt(m.dcr), fmt_value(m.scr), fmt_value(m.tcr)});
    }
  }
  Report report;
  report.text = render_text_table(header, cells);
  std::ostringstream csv;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c) csv << ',';
    csv << header[c];
  }
  csv << '\n';
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) csv << ',';
      csv << row[c];
    }
    csv << '\n';
  }
  report.csv = csv.str();
  return report;
}

}  // namespace rainsim
