#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace rainsim {

struct GridSpec {
  int rows = 0;
  int cols = 0;
  double lat0 = 0.0;
  double lon0 = 0.0;
  double dlat = 1.0;
  double dlon = 1.0;
};

struct GridLocation {
  int id = 0;
  int row = 0;
  int col = 0;
};

// Spatial domain: only land locations appear; sea cells are simply absent.
// Location ids are 0..S-1, dense; (row, col) pairs unique.
class GridManifest {
 public:
  GridManifest(GridSpec grid, std::vector<GridLocation> locations);

  int size() const { return static_cast<int>(locations_.size()); }
  const GridSpec& grid() const { return grid_; }
  const std::vector<GridLocation>& locations() const { return locations_; }
  double lat(int id) const;
  double lon(int id) const;
  std::optional<int> location_at(int row, int col) const;

 private:
  GridSpec grid_;
  std::vector<GridLocation> locations_;  // ordered by id
  std::vector<int> cell_to_id_;          // rows*cols, -1 for sea
};

// Per-location list of 4-adjacent land neighbors; symmetric by construction.
using NeighborSet = std::vector<std::vector<int>>;

NeighborSet neighbor_sets(const GridManifest& manifest);

struct DayLabel {
  int year = 0;
  int month = 0;
  int day = 0;
};

// S x T daily rainfall; values finite and >= 0; immutable after construction.
class RainfallField {
 public:
  RainfallField(int locations, std::vector<DayLabel> days,
                std::vector<double> values);  // values location-major

  int locations() const { return s_; }
  int days() const { return t_; }
  double operator()(int s, int t) const { return values_[idx(s, t)]; }
  std::span<const double> series(int s) const {
    return {values_.data() + static_cast<std::size_t>(s) * t_,
            static_cast<std::size_t>(t_)};
  }
  const std::vector<DayLabel>& day_index() const { return days_; }
  const std::vector<double>& values() const { return values_; }

 private:
  std::size_t idx(int s, int t) const {
    return static_cast<std::size_t>(s) * t_ + t;
  }
  int s_ = 0;
  int t_ = 0;
  std::vector<DayLabel> days_;
  std::vector<double> values_;
};

struct AggregateSeries {
  std::vector<double> y;
};

// Y(t) = sum_s X(s, t).
AggregateSeries aggregate(const RainfallField& field);

GridManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const GridManifest& manifest,
                    const std::filesystem::path& path);

RainfallField read_data_csv(const std::filesystem::path& path);
void write_data_csv(const RainfallField& field,
                    const std::filesystem::path& path);

// Loads and cross-validates manifest + data (column count must equal S).
std::pair<GridManifest, RainfallField> load_dataset(
    const std::filesystem::path& manifest_path,
    const std::filesystem::path& data_path);

// June-September labels (30+31+31+30 = 122 days per season), rolling over
// to the next year's season; used for synthetic and simulated outputs.
std::vector<DayLabel> monsoon_season_labels(int days, int start_year = 2000);

// Shortest round-trip decimal rendering of a double.
std::string format_double(double v);

}  // namespace rainsim
