#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "rainsim/grid.hpp"
#include "rainsim/mrf.hpp"

namespace rainsim {

struct LatentMetrics {
  long long zz1 = 0;             // #{(s,t) : Z = 1}
  double scoh = 0.0;             // mean fraction of matching neighbors
  double tcoh = 0.0;             // mean fraction of persisting days
  double spdiv = 0.0;            // corr(Y, daily Z=1 count)
  std::optional<double> nz1u1;   // mean Z=1 count on U=1 days; absent if none
  std::optional<double> nz1u2;
};

struct ObservedMetrics {
  double dmx = 0.0;              // mean relative error of per-location means
  double dsx = 0.0;              // same for stddevs
  double sy = 0.0;               // stddev of simulated daily aggregate
  long long x100 = 0;            // cells above the extreme threshold
  std::optional<double> wetln;   // mean wet-spell length; absent if all dry
  std::optional<double> dcr;     // corr(Y_ref, Y_sim); absent if periods differ
  double scr = 0.0;              // mean neighbor-series correlation
  double tcr = 0.0;              // mean day-to-day spatial-pattern correlation
  double spatcr = 0.0;           // corr of time-mean spatial patterns
};

struct MetricThresholds {
  double wet_mm = 10.0;
  double extreme_mm = 100.0;
};

LatentMetrics latent_metrics(const LatentState& state, const AggregateSeries& y,
                             const NeighborSet& nb);

// Rescales sim by grand-mean(ref) / grand-mean(sim).
RainfallField standardize(const RainfallField& sim, const RainfallField& ref);

// Standardizes sim internally; reference statistics use raw values.
ObservedMetrics observed_metrics(const RainfallField& sim,
                                 const RainfallField& ref,
                                 const NeighborSet& nb,
                                 const MetricThresholds& thresholds = {});

struct ReportRow {
  std::string label;
  std::variant<LatentMetrics, ObservedMetrics> metrics;
};

struct Report {
  std::string text;
  std::string csv;
};

// One table per metric kind; mixing kinds or an empty row list is a usage
// error. Observed columns: Model,dMX,dSX,SY,X100,wetln,dcr,scr,tcr.
// Latent columns: Model,ZZ1,SCoh,TCoh,SpDiv,nZ1U1,nZ1U2.
Report render_report(const std::vector<ReportRow>& rows);

}  // namespace rainsim
