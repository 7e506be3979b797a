#include "rainsim/grid.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rainsim/errors.hpp"

namespace rainsim {

GridManifest::GridManifest(GridSpec grid, std::vector<GridLocation> locations)
    : grid_(grid), locations_(std::move(locations)) {
  if (grid_.rows <= 0 || grid_.cols <= 0) {
    throw ValidationError("manifest: grid rows/cols must be positive");
  }
  if (locations_.empty()) {
    throw ValidationError("manifest: no locations");
  }
  std::sort(locations_.begin(), locations_.end(),
            [](const GridLocation& a, const GridLocation& b) { return a.id < b.id; });
  cell_to_id_.assign(static_cast<std::size_t>(grid_.rows) * grid_.cols, -1);
  for (int i = 0; i < static_cast<int>(locations_.size()); ++i) {
    const GridLocation& loc = locations_[i];
    if (loc.id != i) {
      throw ValidationError("manifest: location ids must be dense 0..S-1 (bad id " +
                            std::to_string(loc.id) + ")");
    }
    if (loc.row < 0 || loc.row >= grid_.rows || loc.col < 0 || loc.col >= grid_.cols) {
      throw ValidationError("manifest: location " + std::to_string(loc.id) +
                            " outside grid bounds");
    }
    const std::size_t cell =
        static_cast<std::size_t>(loc.row) * grid_.cols + loc.col;
    if (cell_to_id_[cell] != -1) {
      throw ValidationError("manifest: duplicate cell (row " + std::to_string(loc.row) +
                            ", col " + std::to_string(loc.col) + ")");
    }
    cell_to_id_[cell] = loc.id;
  }
}

double GridManifest::lat(int id) const {
  return grid_.lat0 + locations_.at(id).row * grid_.dlat;
}

double GridManifest::lon(int id) const {
  return grid_.lon0 + locations_.at(id).col * grid_.dlon;
}

std::optional<int> GridManifest::location_at(int row, int col) const {
  if (row < 0 || row >= grid_.rows || col < 0 || col >= grid_.cols) {
    return std::nullopt;
  }
  const int id = cell_to_id_[static_cast<std::size_t>(row) * grid_.cols + col];
  if (id < 0) return std::nullopt;
  return id;
}

NeighborSet neighbor_sets(const GridManifest& manifest) {
  NeighborSet nb(manifest.size());
  for (const GridLocation& loc : manifest.locations()) {
    const int dr[4] = {-1, 1, 0, 0};
    const int dc[4] = {0, 0, -1, 1};
    for (int k = 0; k < 4; ++k) {
      if (auto other = manifest.location_at(loc.row + dr[k], loc.col + dc[k])) {
        nb[loc.id].push_back(*other);
      }
    }
    std::sort(nb[loc.id].begin(), nb[loc.id].end());
  }
  return nb;
}

RainfallField::RainfallField(int locations, std::vector<DayLabel> days,
                             std::vector<double> values)
    : s_(locations), t_(static_cast<int>(days.size())), days_(std::move(days)),
      values_(std::move(values)) {
  if (s_ <= 0) throw ValidationError("rainfall field: need at least one location");
  if (t_ <= 0) throw ValidationError("rainfall field: need at least one day");
  if (values_.size() != static_cast<std::size_t>(s_) * t_) {
    throw DimensionError("rainfall field: value count does not match S*T");
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i]) || values_[i] < 0.0) {
      throw ValidationError("rainfall field: invalid value at location " +
                            std::to_string(i / t_) + ", day " +
                            std::to_string(i % t_));
    }
  }
}

AggregateSeries aggregate(const RainfallField& field) {
  AggregateSeries agg;
  agg.y.assign(field.days(), 0.0);
  for (int s = 0; s < field.locations(); ++s) {
    const auto series = field.series(s);
    for (int t = 0; t < field.days(); ++t) agg.y[t] += series[t];
  }
  return agg;
}

std::string format_double(double v) {
  char buf[40];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw NumericError("format_double failed");
  return std::string(buf, ptr);
}

GridManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open manifest: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest " + path.string() + ": " + e.what());
  }
  try {
    GridSpec spec;
    const auto& g = j.at("grid");
    spec.rows = g.at("rows").get<int>();
    spec.cols = g.at("cols").get<int>();
    spec.lat0 = g.at("lat0").get<double>();
    spec.lon0 = g.at("lon0").get<double>();
    spec.dlat = g.at("dlat").get<double>();
    spec.dlon = g.at("dlon").get<double>();
    std::vector<GridLocation> locations;
    for (const auto& item : j.at("locations")) {
      locations.push_back(GridLocation{item.at("id").get<int>(),
                                       item.at("row").get<int>(),
                                       item.at("col").get<int>()});
    }
    return GridManifest(spec, std::move(locations));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest " + path.string() + ": " + e.what());
  }
}

void write_manifest(const GridManifest& manifest,
                    const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["grid"] = {{"rows", manifest.grid().rows}, {"cols", manifest.grid().cols},
               {"lat0", manifest.grid().lat0}, {"lon0", manifest.grid().lon0},
               {"dlat", manifest.grid().dlat}, {"dlon", manifest.grid().dlon}};
  auto locations = nlohmann::ordered_json::array();
  for (const GridLocation& loc : manifest.locations()) {
    locations.push_back({{"id", loc.id}, {"row", loc.row}, {"col", loc.col}});
  }
  j["locations"] = std::move(locations);
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write manifest: " + path.string());
  out << j.dump(2) << '\n';
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

DayLabel parse_day_label(const std::string& text, int line_no) {
  DayLabel label;
  const auto fail = [&] {
    throw FormatError("line " + std::to_string(line_no) +
                      ": bad day label '" + text + "' (expected YYYY-MM-DD)");
  };
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') fail();
  auto parse_int = [&](int begin, int len, int& out) {
    auto [ptr, ec] = std::from_chars(text.data() + begin, text.data() + begin + len, out);
    if (ec != std::errc{} || ptr != text.data() + begin + len) fail();
  };
  parse_int(0, 4, label.year);
  parse_int(5, 2, label.month);
  parse_int(8, 2, label.day);
  return label;
}

std::string day_label_to_string(const DayLabel& d) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", d.year, d.month, d.day);
  return buf;
}

}  // namespace

RainfallField read_data_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open data file: " + path.string());
  std::string line;
  if (!std::getline(in, line)) {
    throw FormatError(path.string() + ": line 1: empty file");
  }
  const auto header = split_csv_line(line);
  if (header.size() < 2 || header[0] != "day") {
    throw FormatError(path.string() + ": line 1: header must be day,loc_0,...");
  }
  const int s = static_cast<int>(header.size()) - 1;
  for (int i = 0; i < s; ++i) {
    if (header[i + 1] != "loc_" + std::to_string(i)) {
      throw FormatError(path.string() + ": line 1: expected column loc_" +
                        std::to_string(i) + ", got '" + header[i + 1] + "'");
    }
  }
  std::vector<DayLabel> days;
  std::vector<std::vector<double>> rows;  // day-major while reading
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (static_cast<int>(fields.size()) != s + 1) {
      throw FormatError(path.string() + ": line " + std::to_string(line_no) +
                        ": expected " + std::to_string(s + 1) + " fields, got " +
                        std::to_string(fields.size()));
    }
    days.push_back(parse_day_label(fields[0], line_no));
    std::vector<double> row(s);
    for (int i = 0; i < s; ++i) {
      double v = 0.0;
      const std::string& f = fields[i + 1];
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc{} || ptr != f.data() + f.size()) {
        throw FormatError(path.string() + ": line " + std::to_string(line_no) +
                          ": cannot parse value '" + f + "'");
      }
      if (!std::isfinite(v) || v < 0.0) {
        throw ValidationError(path.string() + ": negative or non-finite rainfall " +
                              f + " at location " + std::to_string(i) + ", day " +
                              std::to_string(static_cast<int>(days.size()) - 1) +
                              " (line " + std::to_string(line_no) + ")");
      }
      row[i] = v;
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) {
    throw FormatError(path.string() + ": no data rows");
  }
  const int t = static_cast<int>(rows.size());
  std::vector<double> values(static_cast<std::size_t>(s) * t);
  for (int si = 0; si < s; ++si) {
    for (int ti = 0; ti < t; ++ti) {
      values[static_cast<std::size_t>(si) * t + ti] = rows[ti][si];
    }
  }
  return RainfallField(s, std::move(days), std::move(values));
}

void write_data_csv(const RainfallField& field,
                    const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write data file: " + path.string());
  out << "day";
  for (int s = 0; s < field.locations(); ++s) out << ",loc_" << s;
  out << '\n';
  for (int t = 0; t < field.days(); ++t) {
    out << day_label_to_string(field.day_index()[t]);
    for (int s = 0; s < field.locations(); ++s) {
      out << ',' << format_double(field(s, t));
    }
    out << '\n';
  }
}

std::pair<GridManifest, RainfallField> load_dataset(
    const std::filesystem::path& manifest_path,
    const std::filesystem::path& data_path) {
  GridManifest manifest = read_manifest(manifest_path);
  RainfallField field = read_data_csv(data_path);
  if (field.locations() != manifest.size()) {
    throw DimensionError("data has " + std::to_string(field.locations()) +
                         " location columns but manifest has " +
                         std::to_string(manifest.size()));
  }
  return {std::move(manifest), std::move(field)};
}

std::vector<DayLabel> monsoon_season_labels(int days, int start_year) {
  // June(30) + July(31) + August(31) + September(30)
  static constexpr int kMonths[4] = {6, 7, 8, 9};
  static constexpr int kLengths[4] = {30, 31, 31, 30};
  std::vector<DayLabel> labels;
  labels.reserve(days);
  int year = start_year, mi = 0, dom = 1;
  for (int t = 0; t < days; ++t) {
    labels.push_back(DayLabel{year, kMonths[mi], dom});
    if (++dom > kLengths[mi]) {
      dom = 1;
      if (++mi == 4) {
        mi = 0;
        ++year;
      }
    }
  }
  return labels;
}

}  // namespace rainsim
