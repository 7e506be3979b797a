#include "rainsim/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>

#include <CLI11.hpp>
#include <json.hpp>

#include "rainsim/conditioning.hpp"
#include "rainsim/errors.hpp"
#include "rainsim/grid.hpp"
#include "rainsim/metrics.hpp"
#include "rainsim/mrf.hpp"
#include "rainsim/simulators.hpp"
#include "rainsim/synth.hpp"
#include "rainsim/zones.hpp"

namespace rainsim {

namespace {

namespace fs = std::filesystem;

void write_json_file(const nlohmann::ordered_json& j, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void write_text_file(const std::string& text, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << text;
}

RainfallField filter_days(const RainfallField& field,
                          const std::vector<int>& years,
                          const std::vector<int>& months) {
  const std::set<int> year_set(years.begin(), years.end());
  const std::set<int> month_set(months.begin(), months.end());
  std::vector<int> keep;
  for (int t = 0; t < field.days(); ++t) {
    const DayLabel& d = field.day_index()[t];
    if (!year_set.empty() && !year_set.count(d.year)) continue;
    if (!month_set.empty() && !month_set.count(d.month)) continue;
    keep.push_back(t);
  }
  if (static_cast<int>(keep.size()) == field.days()) return field;
  if (keep.size() < 2) {
    throw ConfigError("year/month filter leaves fewer than 2 days");
  }
  std::vector<DayLabel> days;
  days.reserve(keep.size());
  for (int t : keep) days.push_back(field.day_index()[t]);
  std::vector<double> values(static_cast<std::size_t>(field.locations()) *
                             keep.size());
  for (int s = 0; s < field.locations(); ++s) {
    for (std::size_t i = 0; i < keep.size(); ++i) {
      values[static_cast<std::size_t>(s) * keep.size() + i] = field(s, keep[i]);
    }
  }
  return RainfallField(field.locations(), std::move(days), std::move(values));
}

struct SynthArgs {
  std::string out;
  int rows = 10, cols = 10, days = 200, zones = 3;
  std::uint64_t seed = 0;
  std::string process = "m5";
  double agreement = 0.95;
};

void cmd_synth(const SynthArgs& args) {
  SynthSpec spec;
  spec.rows = args.rows;
  spec.cols = args.cols;
  spec.days = args.days;
  spec.zones = args.zones;
  spec.seed = args.seed;
  spec.agreement = args.agreement;
  if (args.process == "m4") {
    spec.process = SynthSpec::Process::m4;
  } else if (args.process == "m5") {
    spec.process = SynthSpec::Process::m5;
  } else {
    throw ConfigError("synth: --process must be m4 or m5");
  }
  const SynthDataset data = generate_synthetic(spec);
  const fs::path out(args.out);
  fs::create_directories(out);
  write_manifest(data.manifest, out / "manifest.json");
  write_data_csv(data.field, out / "data.csv");
  write_latent_csv(data.truth, data.field.day_index(), out / "truth_latent.csv");
  write_zones_json(data.zones, out / "truth_zones.json");

  nlohmann::ordered_json truth;
  truth["process"] = args.process;
  truth["agreement"] = spec.agreement;
  truth["lambda"] = data.lambda.rows();
  truth["pi"] = data.pi;
  auto gamma = nlohmann::ordered_json::array();
  for (const auto& g : data.gamma) {
    gamma.push_back({{"shape", g[0].shape}, {"scale", g[0].scale},
                     {"shape2", g[1].shape}, {"scale2", g[1].scale}});
  }
  truth["gamma"] = std::move(gamma);
  write_json_file(truth, out / "truth_params.json");

  nlohmann::ordered_json meta;
  meta["command"] = "synth";
  meta["config"] = {{"rows", spec.rows}, {"cols", spec.cols},
                    {"days", spec.days}, {"zones", spec.zones},
                    {"seed", spec.seed}, {"process", args.process},
                    {"agreement", spec.agreement}};
  write_json_file(meta, out / "meta.json");
}

struct TrainArgs {
  std::string manifest, data, out, config;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::vector<int> years, months;
};

void cmd_train(const TrainArgs& args) {
  auto [manifest, raw_field] = load_dataset(args.manifest, args.data);
  const RainfallField field = filter_days(raw_field, args.years, args.months);
  const NeighborSet nb = neighbor_sets(manifest);
  TrainConfig config;
  if (!args.config.empty()) config = read_train_config_json(args.config);
  if (args.seed_given) config.seed = args.seed;
  const TrainResult result = train(field, nb, config);
  const fs::path out(args.out);
  fs::create_directories(out);
  write_params_json(result.params, config, result.warnings, out / "params.json");
  write_latent_csv(result.mode, field.day_index(), out / "latent.csv");
}

struct ZonesArgs {
  std::string manifest, latent, out;
  double p = 0.9;
  double crp_alpha = 1.0;
  int sweeps = 200;
  std::uint64_t seed = 0;
};

void cmd_zones(const ZonesArgs& args) {
  const GridManifest manifest = read_manifest(args.manifest);
  const LatentState latent = read_latent_csv(args.latent);
  if (latent.locations != manifest.size()) {
    throw DimensionError("latent file has " + std::to_string(latent.locations) +
                         " locations but manifest has " +
                         std::to_string(manifest.size()));
  }
  const NeighborSet nb = neighbor_sets(manifest);
  std::vector<std::vector<std::uint8_t>> z_rows(latent.locations);
  for (int s = 0; s < latent.locations; ++s) {
    z_rows[s].resize(latent.days);
    for (int t = 0; t < latent.days; ++t) z_rows[s][t] = latent.z_at(s, t);
  }
  SccrpConfig config{args.sweeps, args.seed};
  const ZonePartition partition =
      run_sccrp(z_rows, nb, args.p, args.crp_alpha, config);
  write_zones_json(partition, args.out);
  nlohmann::ordered_json meta;
  meta["command"] = "zones";
  meta["config"] = {{"p", args.p}, {"crp_alpha", args.crp_alpha},
                    {"sweeps", args.sweeps}, {"seed", args.seed}};
  write_json_file(meta, fs::path(args.out).string() + ".meta.json");
}

struct SimulateArgs {
  int model = 0;
  std::string params, out;
  int days = 0;
  std::uint64_t seed = 0;
  std::string zones, train_latent, train_data, u_override, observations;
  double q = 0.8;
  double dirichlet_r = 1.0;
};

void cmd_simulate(const SimulateArgs& args) {
  const ModelParams params = read_params_json(args.params);
  SimulationConfig config;
  config.model_id = args.model;
  config.t_sim = args.days;
  config.seed = args.seed;
  config.q = args.q;
  config.dirichlet_r = args.dirichlet_r;

  std::optional<PartialObservation> obs;
  if (!args.observations.empty()) {
    obs = read_observations_csv(args.observations);
    validate_observation(*obs, params.locations(), config.t_sim);
    obs->reveal_fraction =
        static_cast<double>(obs->entries.size()) /
        (static_cast<double>(params.locations()) * config.t_sim);
  }

  std::optional<UEstimate> u_estimate;
  std::string u_source = "none";
  if (!args.u_override.empty()) {
    u_estimate = UEstimate{read_u_series_csv(args.u_override),
                           UMethod::viterbi_from_y};
    u_source = "file";
  } else if (obs && args.model >= 3) {
    const auto z_est = estimate_z_from_partial(*obs, params, params.locations(),
                                               config.t_sim);
    u_estimate =
        infer_u_from_z(z_est, params.locations(), config.t_sim, params);
    u_source = "observations";
  }
  if (u_estimate && args.model <= 2) {
    std::cerr << "warning: model " << args.model
              << " cannot use a U series; ignoring it\n";
    u_estimate.reset();
    u_source = "ignored";
  }
  config = apply_conditioning(std::move(config), u_estimate,
                              obs ? &*obs : nullptr, params.locations());

  std::optional<ZonePartition> partition;
  std::optional<ZoneParams> zone_params;
  if (args.model >= 5) {
    if (args.zones.empty() || args.train_latent.empty() ||
        args.train_data.empty()) {
      throw UsageError("models 5 and 6 require --zones, --train-latent and "
                       "--train-data");
    }
    partition = read_zones_json(args.zones);
    const LatentState mode = read_latent_csv(args.train_latent);
    const RainfallField field = read_data_csv(args.train_data);
    zone_params = learn_zone_params(mode, field, *partition);
  }

  const SimulationOutput out = simulate(params, config,
                                        zone_params ? &*zone_params : nullptr,
                                        partition ? &*partition : nullptr);
  const fs::path dir(args.out);
  fs::create_directories(dir);
  const std::string stem = "sim_m" + std::to_string(args.model);
  write_data_csv(out.x, dir / (stem + ".csv"));
  write_latent_csv(out.latent, out.x.day_index(), dir / (stem + "_latent.csv"));
  nlohmann::ordered_json meta;
  meta["command"] = "simulate";
  meta["model"] = args.model;
  meta["parameter_count"] = out.param_count;
  meta["config"] = {{"t_sim", config.t_sim}, {"seed", config.seed},
                    {"q", config.q}, {"dirichlet_r", config.dirichlet_r}};
  meta["conditioning"] = {
      {"u_series", u_source},
      {"observed_cells", static_cast<long long>(config.observed.size())},
      {"reveal_fraction", obs ? obs->reveal_fraction : 0.0}};
  write_json_file(meta, dir / (stem + "_meta.json"));
}

struct InferUArgs {
  std::string params, out, y, data, manifest, observations;
  int days = 0;
};

void cmd_infer_u(const InferUArgs& args) {
  const ModelParams params = read_params_json(args.params);
  UEstimate estimate;
  std::string source;
  if (!args.y.empty()) {
    // CSV "t,y": the aggregate series by day index
    std::ifstream in(args.y);
    if (!in) throw FormatError("cannot open " + args.y);
    std::string line;
    if (!std::getline(in, line) || (line != "t,y" && line != "t,y\r")) {
      throw FormatError(args.y + ": line 1: header must be t,y");
    }
    AggregateSeries agg;
    int line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const auto comma = line.find(',');
      if (comma == std::string::npos) {
        throw FormatError(args.y + ": line " + std::to_string(line_no) +
                          ": expected t,y");
      }
      try {
        agg.y.push_back(std::stod(line.substr(comma + 1)));
      } catch (const std::exception&) {
        throw FormatError(args.y + ": line " + std::to_string(line_no) +
                          ": bad value");
      }
    }
    if (agg.y.empty()) throw FormatError(args.y + ": no data rows");
    estimate = infer_u_from_y(agg, params);
    source = "aggregate file";
  } else if (!args.data.empty()) {
    const RainfallField field = read_data_csv(args.data);
    if (field.locations() != params.locations()) {
      throw DimensionError("data/params location count mismatch");
    }
    estimate = infer_u_from_y(aggregate(field), params);
    source = "data file";
  } else if (!args.observations.empty()) {
    if (args.days < 1) {
      throw ConfigError("infer-u from observations requires --days");
    }
    PartialObservation obs = read_observations_csv(args.observations);
    validate_observation(obs, params.locations(), args.days);
    const auto z_est =
        estimate_z_from_partial(obs, params, params.locations(), args.days);
    estimate = infer_u_from_z(z_est, params.locations(), args.days, params);
    source = "observations";
  } else {
    throw UsageError("infer-u needs one of --y, --data, --observations");
  }
  write_u_series_csv(estimate.u, args.out);
  nlohmann::ordered_json meta;
  meta["command"] = "infer-u";
  meta["source"] = source;
  meta["method"] = estimate.method == UMethod::viterbi_from_y
                       ? "viterbi_from_y"
                       : "argmax_from_z";
  write_json_file(meta, fs::path(args.out).string() + ".meta.json");
}

struct EvaluateArgs {
  std::string manifest, ref, out, latent_ref;
  std::vector<std::string> sims;
};

std::pair<std::string, std::string> split_label(const std::string& arg) {
  const auto eq = arg.find('=');
  if (eq != std::string::npos) return {arg.substr(0, eq), arg.substr(eq + 1)};
  return {fs::path(arg).stem().string(), arg};
}

void cmd_evaluate(const EvaluateArgs& args) {
  auto [manifest, ref] = load_dataset(args.manifest, args.ref);
  const NeighborSet nb = neighbor_sets(manifest);
  std::vector<ReportRow> observed_rows;
  observed_rows.push_back({"DATA", observed_metrics(ref, ref, nb)});

  std::vector<ReportRow> latent_rows;
  if (!args.latent_ref.empty()) {
    const LatentState latent = read_latent_csv(args.latent_ref);
    if (latent.locations != manifest.size()) {
      throw DimensionError("latent reference location count mismatch");
    }
    latent_rows.push_back(
        {"MRF-DATA", latent_metrics(latent, aggregate(ref), nb)});
  }

  for (const std::string& sim_arg : args.sims) {
    const auto [label, path] = split_label(sim_arg);
    const RainfallField sim = read_data_csv(path);
    if (sim.locations() != manifest.size()) {
      throw DimensionError("simulation '" + label +
                           "' location count does not match manifest");
    }
    observed_rows.push_back({label, observed_metrics(sim, ref, nb)});
    if (!args.latent_ref.empty()) {
      fs::path latent_path(path);
      latent_path.replace_filename(latent_path.stem().string() + "_latent.csv");
      if (fs::exists(latent_path)) {
        const LatentState latent = read_latent_csv(latent_path);
        if (latent.locations == manifest.size()) {
          latent_rows.push_back(
              {label, latent_metrics(latent, aggregate(sim), nb)});
        }
      }
    }
  }

  const fs::path out(args.out);
  fs::create_directories(out);
  const Report observed_report = render_report(observed_rows);
  write_text_file(observed_report.csv, out / "report.csv");
  write_text_file(observed_report.text, out / "report.txt");
  if (latent_rows.size() > 1) {
    const Report latent_report = render_report(latent_rows);
    write_text_file(latent_report.csv, out / "report_latent.csv");
    write_text_file(latent_report.text, out / "report_latent.txt");
  }
  nlohmann::ordered_json meta;
  meta["command"] = "evaluate";
  meta["reference"] = args.ref;
  auto sims = nlohmann::ordered_json::array();
  for (const std::string& sim_arg : args.sims) {
    const auto [label, path] = split_label(sim_arg);
    sims.push_back({{"label", label}, {"path", path}});
  }
  meta["simulations"] = std::move(sims);
  write_json_file(meta, out / "report_meta.json");
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"rainsim: latent-state daily rainfall field modeling"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  CLI::App* synth = app.add_subcommand(
      "synth", "Generate a planted-truth synthetic dataset");
  synth->add_option("--out", synth_args.out, "output directory")->required();
  synth->add_option("--rows", synth_args.rows, "grid rows");
  synth->add_option("--cols", synth_args.cols, "grid columns");
  synth->add_option("--days", synth_args.days, "number of days");
  synth->add_option("--zones", synth_args.zones, "planted zone count");
  synth->add_option("--seed", synth_args.seed, "random seed");
  synth->add_option("--process", synth_args.process, "generative process (m4|m5)");
  synth->add_option("--agreement", synth_args.agreement,
                    "zonal agreement probability");
  synth->callback([&] { cmd_synth(synth_args); });

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand(
      "train", "Fit the latent-state field model to a dataset");
  train->add_option("--manifest", train_args.manifest, "manifest JSON")->required();
  train->add_option("--data", train_args.data, "data CSV")->required();
  train->add_option("--out", train_args.out, "output directory")->required();
  train->add_option("--config", train_args.config, "training config JSON");
  auto* seed_opt = train->add_option("--seed", train_args.seed, "random seed");
  train->add_option("--years", train_args.years, "years to keep")->delimiter(',');
  train->add_option("--months", train_args.months, "months to keep")->delimiter(',');
  train->callback([&, seed_opt] {
    train_args.seed_given = seed_opt->count() > 0;
    cmd_train(train_args);
  });

  ZonesArgs zones_args;
  CLI::App* zones = app.add_subcommand(
      "zones", "Cluster locations into coherent zones from a latent file");
  zones->add_option("--manifest", zones_args.manifest, "manifest JSON")->required();
  zones->add_option("--latent", zones_args.latent, "latent CSV")->required();
  zones->add_option("--out", zones_args.out, "output zones JSON")->required();
  zones->add_option("--p", zones_args.p, "agreement probability");
  zones->add_option("--crp-alpha", zones_args.crp_alpha, "CRP concentration");
  zones->add_option("--sweeps", zones_args.sweeps, "Gibbs sweeps");
  zones->add_option("--seed", zones_args.seed, "random seed");
  zones->callback([&] { cmd_zones(zones_args); });

  SimulateArgs sim_args;
  CLI::App* simulate = app.add_subcommand("simulate", "Run one of the six models");
  simulate->add_option("--model", sim_args.model, "model id 1..6")->required();
  simulate->add_option("--params", sim_args.params, "params JSON")->required();
  simulate->add_option("--out", sim_args.out, "output directory")->required();
  simulate->add_option("--days", sim_args.days, "days to simulate")->required();
  simulate->add_option("--seed", sim_args.seed, "random seed");
  simulate->add_option("--zones", sim_args.zones, "zones JSON (models 5-6)");
  simulate->add_option("--train-latent", sim_args.train_latent,
                       "training latent CSV (models 5-6)");
  simulate->add_option("--train-data", sim_args.train_data,
                       "training data CSV (models 5-6)");
  simulate->add_option("--u-override", sim_args.u_override, "U series CSV");
  simulate->add_option("--observations", sim_args.observations,
                       "revealed cells CSV (copied verbatim)");
  simulate->add_option("--q", sim_args.q, "model 6 share mixing weight");
  simulate->add_option("--dirichlet-r", sim_args.dirichlet_r,
                       "model 6 share-corruption concentration");
  simulate->callback([&] { cmd_simulate(sim_args); });

  InferUArgs infer_args;
  CLI::App* infer = app.add_subcommand(
      "infer-u", "Estimate the daily country state series");
  infer->add_option("--params", infer_args.params, "params JSON")->required();
  infer->add_option("--out", infer_args.out, "output u CSV")->required();
  infer->add_option("--y", infer_args.y, "aggregate series CSV (t,y)");
  infer->add_option("--data", infer_args.data, "data CSV (aggregated internally)");
  infer->add_option("--observations", infer_args.observations,
                    "revealed cells CSV");
  infer->add_option("--days", infer_args.days,
                    "day count (with --observations)");
  infer->callback([&] { cmd_infer_u(infer_args); });

  EvaluateArgs eval_args;
  CLI::App* evaluate = app.add_subcommand(
      "evaluate", "Compare simulations against a reference dataset");
  evaluate->add_option("--manifest", eval_args.manifest, "manifest JSON")->required();
  evaluate->add_option("--ref", eval_args.ref, "reference data CSV")->required();
  evaluate->add_option("--sim", eval_args.sims, "label=path (repeatable)")
      ->required();
  evaluate->add_option("--latent-ref", eval_args.latent_ref,
                       "reference latent CSV (adds the latent table)");
  evaluate->add_option("--out", eval_args.out, "output directory")->required();
  evaluate->callback([&] { cmd_evaluate(eval_args); });

  std::vector<const char*> argv;
  argv.push_back("rainsim");
  for (const std::string& arg : args) argv.push_back(arg.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
    return 0;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << '\n';
    return 3;
  } catch (const DimensionError& e) {
    std::cerr << "dimension error: " << e.what() << '\n';
    return 4;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return 5;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 6;
  }
}

}  // namespace rainsim
