#include "rainsim/conditioning.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>

#include "rainsim/errors.hpp"

namespace rainsim {

void validate_observation(const PartialObservation& obs, int s_count,
                          int t_count) {
  std::set<std::pair<int, int>> seen;
  for (const ObservedCell& cell : obs.entries) {
    if (cell.s < 0 || cell.s >= s_count || cell.t < 0 || cell.t >= t_count) {
      throw ValidationError("observation (" + std::to_string(cell.s) + ", " +
                            std::to_string(cell.t) + ") out of range");
    }
    if (!(cell.x >= 0.0) || !std::isfinite(cell.x)) {
      throw ValidationError("observation value must be finite and >= 0");
    }
    if (!seen.insert({cell.s, cell.t}).second) {
      throw ValidationError("duplicate observation (" + std::to_string(cell.s) +
                            ", " + std::to_string(cell.t) + ")");
    }
  }
}

UEstimate infer_u_from_y(const AggregateSeries& y, const ModelParams& params) {
  const int t_count = static_cast<int>(y.y.size());
  if (t_count == 0) throw DimensionError("infer_u_from_y: empty series");
  std::array<std::array<double, 3>, 3> log_lambda;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) log_lambda[i][j] = std::log(params.lambda.at(i, j));
  }
  std::vector<std::array<double, 3>> best(t_count);
  std::vector<std::array<int, 3>> back(t_count);
  for (int k = 0; k < 3; ++k) {
    best[0][k] = std::log(params.lambda_hat[k]) +
                 gaussian_log_pdf(params.gauss[k], y.y[0]);
  }
  for (int t = 1; t < t_count; ++t) {
    for (int k = 0; k < 3; ++k) {
      int arg = 0;
      double hi = best[t - 1][0] + log_lambda[0][k];
      for (int l = 1; l < 3; ++l) {
        const double v = best[t - 1][l] + log_lambda[l][k];
        if (v > hi) {  // strict: ties keep the lower index
          hi = v;
          arg = l;
        }
      }
      best[t][k] = hi + gaussian_log_pdf(params.gauss[k], y.y[t]);
      back[t][k] = arg;
    }
  }
  UEstimate est;
  est.method = UMethod::viterbi_from_y;
  est.u.resize(t_count);
  int k = 0;
  for (int l = 1; l < 3; ++l) {
    if (best[t_count - 1][l] > best[t_count - 1][k]) k = l;
  }
  est.u[t_count - 1] = static_cast<std::uint8_t>(k + 1);
  for (int t = t_count - 1; t > 0; --t) {
    k = back[t][k];
    est.u[t - 1] = static_cast<std::uint8_t>(k + 1);
  }
  return est;
}

std::vector<std::uint8_t> estimate_z_from_partial(const PartialObservation& obs,
                                                  const ModelParams& params,
                                                  int s_count, int t_count) {
  if (s_count != params.locations()) {
    throw DimensionError("estimate_z_from_partial: S does not match params");
  }
  validate_observation(obs, s_count, t_count);
  std::vector<std::uint8_t> z(static_cast<std::size_t>(s_count) * t_count,
                              kZUnknown);
  auto at = [&](int s, int t) -> std::uint8_t& {
    return z[static_cast<std::size_t>(s) * t_count + t];
  };

  std::vector<char> has_obs(s_count, 0);
  for (const ObservedCell& cell : obs.entries) {
    const LocationParams& lp = params.loc[cell.s];
    const double x = std::max(cell.x, params.rain_floor_mm);
    const double l1 = gamma_log_pdf(lp.gamma[0], x);
    const double l2 = gamma_log_pdf(lp.gamma[1], x);
    at(cell.s, cell.t) = (l1 >= l2) ? 1 : 2;  // ties toward state 1
    has_obs[cell.s] = 1;
  }

  // Synchronous rounds: a cell becomes known once a temporal neighbor was
  // known in the previous round; known cells are never revised.
  for (int round = 0; round < t_count; ++round) {
    bool changed = false;
    std::vector<std::pair<std::size_t, std::uint8_t>> updates;
    for (int s = 0; s < s_count; ++s) {
      if (!has_obs[s]) continue;
      const LocationParams& lp = params.loc[s];
      for (int t = 0; t < t_count; ++t) {
        if (at(s, t) != kZUnknown) continue;
        const std::uint8_t left = (t > 0) ? at(s, t - 1) : kZUnknown;
        const std::uint8_t right = (t + 1 < t_count) ? at(s, t + 1) : kZUnknown;
        if (left == kZUnknown && right == kZUnknown) continue;
        std::array<double, 2> score{};
        for (int k = 0; k < 2; ++k) {
          if (left != kZUnknown) score[k] += std::log(lp.tau.at(left - 1, k));
          if (right != kZUnknown) score[k] += std::log(lp.tau.at(k, right - 1));
        }
        const std::uint8_t pick = (score[0] >= score[1]) ? 1 : 2;
        updates.emplace_back(static_cast<std::size_t>(s) * t_count + t, pick);
        changed = true;
      }
    }
    for (const auto& [idx, v] : updates) z[idx] = v;
    if (!changed) break;
  }
  return z;
}

UEstimate infer_u_from_z(const std::vector<std::uint8_t>& z_estimate,
                         int s_count, int t_count, const ModelParams& params) {
  if (s_count != params.locations() ||
      z_estimate.size() != static_cast<std::size_t>(s_count) * t_count) {
    throw DimensionError("infer_u_from_z: shape mismatch");
  }
  UEstimate est;
  est.method = UMethod::argmax_from_z;
  est.u.resize(t_count);
  int lambda_hat_argmax = 0;
  for (int k = 1; k < 3; ++k) {
    if (params.lambda_hat[k] > params.lambda_hat[lambda_hat_argmax]) {
      lambda_hat_argmax = k;
    }
  }
  for (int t = 0; t < t_count; ++t) {
    std::array<double, 3> score{};
    bool any = false;
    for (int s = 0; s < s_count; ++s) {
      const std::uint8_t zv = z_estimate[static_cast<std::size_t>(s) * t_count + t];
      if (zv == kZUnknown) continue;
      any = true;
      for (int l = 0; l < 3; ++l) {
        score[l] += std::log(params.loc[s].theta[l][zv - 1]);
      }
    }
    if (!any) {
      est.u[t] = static_cast<std::uint8_t>(lambda_hat_argmax + 1);
      continue;
    }
    int best = 0;
    for (int l = 1; l < 3; ++l) {
      if (score[l] > score[best]) best = l;  // ties keep the lower index
    }
    est.u[t] = static_cast<std::uint8_t>(best + 1);
  }
  return est;
}

SimulationConfig apply_conditioning(SimulationConfig base,
                                    const std::optional<UEstimate>& u_estimate,
                                    const PartialObservation* obs,
                                    int s_count) {
  if (u_estimate) {
    if (static_cast<int>(u_estimate->u.size()) != base.t_sim) {
      throw ConfigError("apply_conditioning: U estimate length " +
                        std::to_string(u_estimate->u.size()) +
                        " does not match t_sim " + std::to_string(base.t_sim));
    }
    base.u_override = u_estimate->u;
  }
  if (obs != nullptr) {
    try {
      validate_observation(*obs, s_count, base.t_sim);
    } catch (const ValidationError& e) {
      throw ConfigError(std::string("apply_conditioning: ") + e.what());
    }
    base.observed = obs->entries;
  }
  return base;
}

PartialObservation read_observations_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open observations: " + path.string());
  std::string line;
  if (!std::getline(in, line) || (line != "s,t,x" && line != "s,t,x\r")) {
    throw FormatError(path.string() + ": line 1: header must be s,t,x");
  }
  PartialObservation obs;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    ObservedCell cell;
    const char* ptr = line.data();
    const char* end = line.data() + line.size();
    auto expect_comma = [&] {
      if (ptr == end || *ptr != ',') {
        throw FormatError(path.string() + ": line " + std::to_string(line_no) +
                          ": expected 3 comma-separated fields");
      }
      ++ptr;
    };
    auto r1 = std::from_chars(ptr, end, cell.s);
    if (r1.ec != std::errc{}) {
      throw FormatError(path.string() + ": line " + std::to_string(line_no) +
                        ": bad location id");
    }
    ptr = r1.ptr;
    expect_comma();
    auto r2 = std::from_chars(ptr, end, cell.t);
    if (r2.ec != std::errc{}) {
      throw FormatError(path.string() + ": line " + std::to_string(line_no) +
                        ": bad day index");
    }
    ptr = r2.ptr;
    expect_comma();
    auto r3 = std::from_chars(ptr, end, cell.x);
    if (r3.ec != std::errc{} || r3.ptr != end) {
      throw FormatError(path.string() + ": line " + std::to_string(line_no) +
                        ": bad value");
    }
    obs.entries.push_back(cell);
  }
  return obs;
}

void write_observations_csv(const PartialObservation& obs,
                            const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write observations: " + path.string());
  out << "s,t,x\n";
  for (const ObservedCell& cell : obs.entries) {
    out << cell.s << ',' << cell.t << ',' << format_double(cell.x) << '\n';
  }
}

std::vector<std::uint8_t> read_u_series_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open u series: " + path.string());
  std::string line;
  if (!std::getline(in, line) || (line != "t,u" && line != "t,u\r")) {
    throw FormatError(path.string() + ": line 1: header must be t,u");
  }
  std::vector<std::uint8_t> u;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    int t = 0, v = 0;
    const char* end = line.data() + line.size();
    auto r1 = std::from_chars(line.data(), end, t);
    if (r1.ec != std::errc{} || r1.ptr == end || *r1.ptr != ',') {
      throw FormatError(path.string() + ": line " + std::to_string(line_no) +
                        ": expected t,u");
    }
    auto r2 = std::from_chars(r1.ptr + 1, end, v);
    if (r2.ec != std::errc{} || r2.ptr != end) {
      throw FormatError(path.string() + ": line " + std::to_string(line_no) +
                        ": bad state");
    }
    if (t != static_cast<int>(u.size())) {
      throw ValidationError(path.string() + ": line " + std::to_string(line_no) +
                            ": day indices must be 0,1,2,... in order");
    }
    if (v < 1 || v > 3) {
      throw ValidationError(path.string() + ": line " + std::to_string(line_no) +
                            ": u must be 1..3");
    }
    u.push_back(static_cast<std::uint8_t>(v));
  }
  if (u.empty()) throw FormatError(path.string() + ": no data rows");
  return u;
}

void write_u_series_csv(const std::vector<std::uint8_t>& u,
                        const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write u series: " + path.string());
  out << "t,u\n";
  for (std::size_t t = 0; t < u.size(); ++t) {
    out << t << ',' << static_cast<int>(u[t]) << '\n';
  }
}

}  // namespace rainsim
