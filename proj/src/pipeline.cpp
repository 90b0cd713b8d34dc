#include "regimes/pipeline.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>

#include "regimes/error.hpp"
#include "regimes/serialize.hpp"

namespace regimes {

namespace fs = std::filesystem;

namespace {

void say(const LogFn& log, const std::string& msg) {
  if (log) log(msg);
}

std::string join(const std::string& dir, const char* file) { return (fs::path(dir) / file).string(); }

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data("cannot open input '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_data("cannot write '" + path + "'");
  out << text;
  if (!out) throw_data("failed writing '" + path + "'");
}

std::string prepare_out_dir(const RunConfig& config) {
  const auto dir = resolve_out_dir(config);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw_data("cannot create output directory '" + dir + "': " + ec.message());
  return dir;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct Ingested {
  std::string input_bytes;
  Dataset data;
  FeatureSet features;
  SpreadSeries spread;
};

Ingested ingest_into(const std::string& dir, const RunConfig& config, const LogFn& log) {
  if (config.input.empty()) throw_usage("no input file given (set input)");
  Ingested out;
  out.input_bytes = read_bytes(config.input);
  std::istringstream in(out.input_bytes);
  const auto raw = parse_dataset(in);
  auto imputed = impute_missing(raw, config.imputation);
  out.data = std::move(imputed.data);
  out.features = build_features(out.data, config.features);
  out.spread = compute_spread(out.data, config.aggregation);

  write_json_file(join(dir, kFeaturesFile), to_json(out.features));
  write_json_file(join(dir, kSpreadFile), to_json(out.spread));
  write_json_file(join(dir, "imputation_report.json"), to_json(imputed.report));
  std::ostringstream features_csv;
  write_features_csv(features_csv, out.features);
  write_text(join(dir, "features.csv"), features_csv.str());
  std::ostringstream spread_csv;
  write_spread_csv(spread_csv, out.spread);
  write_text(join(dir, "spread.csv"), spread_csv.str());

  say(log, std::to_string(out.data.size()) + " weeks ingested");
  if (!imputed.report.cells.empty()) say(log, std::to_string(imputed.report.cells.size()) + " cells imputed");
  return out;
}

ContrastOptions contrast_for(const RunConfig& config, ChangeMode mode) {
  ContrastOptions o;
  o.mode = mode;
  o.min_seg_len = mode == ChangeMode::mean_only ? config.cpd_min_seg_mean : config.cpd_min_seg_mv;
  return o;
}

Json em_options_json(const EmOptions& o) {
  return {{"tol", o.tol},
          {"max_iter", o.max_iter},
          {"n_restarts", o.n_restarts},
          {"seed", o.seed},
          {"min_weight", o.min_weight},
          {"mlp_steps", o.mlp_steps}};
}

Json read_artifact(const std::string& dir, const char* file, const char* stage) {
  const auto path = join(dir, file);
  if (!fs::exists(path)) {
    throw_data(std::string("missing ") + file + " in '" + dir + "': run analyze with " + stage);
  }
  return read_json_file(path);
}

}  // namespace

std::string resolve_out_dir(const RunConfig& config) {
  if (!config.out_dir.empty()) return config.out_dir;
  if (const char* env = std::getenv(kOutputDirEnv); env != nullptr && *env != '\0') return env;
  throw_usage(std::string("no output directory (set out_dir or ") + kOutputDirEnv + ")");
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw_numerical("SHA-256 computation failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

std::string config_hash(const RunConfig& config, std::string_view input_bytes) {
  std::string text;
  std::istringstream lines(config.canonical());
  std::string line;
  while (std::getline(lines, line)) {
    if (line.starts_with("input=") || line.starts_with("out_dir=") || line.starts_with("sim_")) continue;
    text += line;
    text += '\n';
  }
  text += "input_sha256=" + sha256_hex(input_bytes) + '\n';
  return sha256_hex(text);
}

std::size_t cmd_ingest(const RunConfig& config, const LogFn& log) {
  const auto dir = prepare_out_dir(config);
  return ingest_into(dir, config, log).data.size();
}

AnalysisBundle cmd_analyze(const RunConfig& config, const LogFn& log) {
  const auto dir = prepare_out_dir(config);
  for (const char* f : {kFeaturesFile, kSpreadFile, kSomGridFile, kClassesFile, kMsParamsFile,
                        kProbabilitiesFile, kSegmentationsFile, kManifestFile}) {
    std::error_code ec;
    fs::remove(join(dir, f), ec);
  }

  AnalysisBundle bundle;
  bundle.out_dir = dir;
  auto record = [&](const char* name, const char* file, const Json& j) {
    const auto path = join(dir, file);
    write_json_file(path, j);
    bundle.artifacts.push_back({name, file, sha256_hex(read_bytes(path))});
  };

  Json manifest;
  std::string stage = "ingest";
  std::optional<Error> failure;
  try {
    const auto in = ingest_into(dir, config, log);
    bundle.config_hash = config_hash(config, in.input_bytes);
    bundle.artifacts.push_back({"features", kFeaturesFile, sha256_hex(read_bytes(join(dir, kFeaturesFile)))});
    bundle.artifacts.push_back({"spread", kSpreadFile, sha256_hex(read_bytes(join(dir, kSpreadFile)))});

    if (config.run_som) {
      stage = "som";
      Observations standardized;
      Observations raw;
      for (const auto& fv : in.features.vectors) {
        standardized.push_back(fv.standardized);
        raw.push_back(fv.raw());
      }
      const auto grid =
          train_som(standardized, config.som_rows, config.som_cols, config.som_schedule, config.som_seed);
      const auto classes = periodize(standardized, raw, grid, hac_macro_classes(grid, config.som_classes));
      record("som_grid", kSomGridFile, to_json(grid));
      Json cj = to_json(classes);
      Json weeks = Json::array();
      for (const auto& w : in.features.weeks) weeks.push_back(w.label());
      cj["weeks"] = std::move(weeks);
      cj["quantization_error"] = quantization_error(grid, standardized);
      record("macro_classes", kClassesFile, cj);
      say(log, "som: " + std::to_string(grid.node_count()) + " nodes, " + std::to_string(classes.k) +
                   " macro-classes, " + std::to_string(classes.intervals.size()) + " intervals");
    }

    if (config.run_ms) {
      stage = "ms";
      const auto fit = em_fit(config.ms_spec, in.spread.values, config.em);
      Json mj = {{"spec", to_json(config.ms_spec)},
                 {"params", to_json(fit.params)},
                 {"stationary", stationary_distribution(fit.params.transition)},
                 {"loglik", fit.probs.loglik},
                 {"converged", fit.converged},
                 {"iterations", fit.trace.size()},
                 {"options", em_options_json(config.em)},
                 {"best_restart", fit.best_restart},
                 {"restart_logliks", fit.restart_logliks},
                 {"degenerate_restarts", fit.degenerate_restarts},
                 {"warnings", fit.warnings},
                 {"trace", fit.trace}};
      record("ms_params", kMsParamsFile, mj);
      Json pj = to_json(fit.probs);
      pj["labels"] = in.spread.labels;
      record("regime_probabilities", kProbabilitiesFile, pj);
      say(log, "ms: log-likelihood " + format_double(fit.probs.loglik) + ", p " + format_double(fit.params.p()) +
                   ", q " + format_double(fit.params.q()));
    }

    if (config.run_cpd) {
      stage = "cpd";
      Json segs = Json::array();
      for (auto mode : config.cpd_modes) {
        const auto result =
            detect(in.spread.values, config.cpd_k_max, contrast_for(config, mode), config.cpd_selection);
        segs.push_back({{"segmentation", to_json(result.segmentation, in.spread.labels)},
                        {"diagnostics", to_json(result.diagnostics)}});
        say(log, "cpd " + std::string(change_mode_name(mode)) + ": " +
                     std::to_string(result.segmentation.tau.size()) + " change-points");
      }
      record("segmentations", kSegmentationsFile,
             {{"series", "spread"}, {"k_max", config.cpd_k_max}, {"segmentations", std::move(segs)}});
    }
  } catch (const Error& e) {
    failure.emplace(e.kind(), stage + " stage: " + e.what());
  }

  if (failure) {
    manifest["status"] = "failed";
    manifest["failed_stage"] = stage;
    manifest["error"] = failure->what();
  } else {
    manifest["status"] = "ok";
    manifest["failed_stage"] = nullptr;
  }
  if (bundle.config_hash.empty()) {
    std::string bytes;
    try {
      bytes = read_bytes(config.input);
    } catch (const Error&) {
    }
    bundle.config_hash = config_hash(config, bytes);
  }
  manifest["config_hash"] = bundle.config_hash;
  manifest["stages"] = {{"som", config.run_som}, {"ms", config.run_ms}, {"cpd", config.run_cpd}};
  manifest["seeds"] = {{"som", config.som_seed}, {"ms", config.em.seed}};
  Json arts = Json::array();
  for (const auto& a : bundle.artifacts) arts.push_back({{"name", a.name}, {"file", a.file}, {"sha256", a.sha256}});
  manifest["artifacts"] = std::move(arts);
  manifest["created"] = utc_now();
  write_json_file(join(dir, kManifestFile), manifest);

  if (failure) throw *failure;
  say(log, std::to_string(bundle.artifacts.size()) + " artifacts written to " + dir);
  return bundle;
}

void cmd_report(const RunConfig& config, const LogFn& log) {
  const auto dir = resolve_out_dir(config);
  const auto spread = spread_from_json(read_artifact(dir, kSpreadFile, "ingest"));
  const auto classes = classes_from_json(read_artifact(dir, kClassesFile, "som=on"));
  const auto probs = probabilities_from_json(read_artifact(dir, kProbabilitiesFile, "ms=on"));
  const auto segs_json = read_artifact(dir, kSegmentationsFile, "cpd=on");
  if (probs.rows() != spread.size()) {
    throw_data("regime probabilities and spread have different lengths; rerun analyze");
  }

  const auto rows = cross_tabulate(probs, classes, spread, config.regime_threshold);
  std::string table = "class, n_obs, pct_regime1, sd_spread\n";
  for (const auto& r : rows) table += std::to_string(r.class_id) + ", " + format_class_row(r) + "\n";
  write_text(join(dir, kClassTableFile), table);

  std::string means = "class,n_weeks";
  for (const auto& n : FeatureSet::raw_names()) means += "," + n;
  means += "\n";
  for (std::size_t c = 0; c < classes.k; ++c) {
    means += std::to_string(c + 1) + "," + std::to_string(classes.class_sizes.at(c));
    const auto& m = classes.class_means.at(c);
    if (m.empty()) {
      for (std::size_t i = 0; i < FeatureSet::raw_names().size(); ++i) means += ",";
    } else {
      for (double v : m) means += "," + format_double(v);
    }
    means += "\n";
  }
  write_text(join(dir, kClassMeansFile), means);

  std::vector<int> cp_mean(spread.size(), 0);
  std::vector<int> cp_mv(spread.size(), 0);
  try {
    for (const auto& s : segs_json.at("segmentations")) {
      const auto seg = segmentation_from_json(s.at("segmentation"));
      auto& col = seg.mode == ChangeMode::mean_only ? cp_mean : cp_mv;
      for (auto t : seg.tau) {
        if (t >= col.size()) throw_data("change-point outside the spread series");
        col[t] = 1;
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw_data(std::string("malformed segmentations artifact: ") + e.what());
  }
  std::string series = "period,spread,p_regime1,cp_mean,cp_mv\n";
  for (std::size_t t = 0; t < spread.size(); ++t) {
    series += spread.labels[t] + "," + format_double(spread.values[t]) + "," +
              format_double(probs.smoothed(static_cast<Eigen::Index>(t), 0)) + "," + std::to_string(cp_mean[t]) +
              "," + std::to_string(cp_mv[t]) + "\n";
  }
  write_text(join(dir, kSeriesFile), series);
  say(log, "report: " + std::to_string(rows.size()) + " classes, " + std::to_string(spread.size()) + " periods");
}

namespace {

// Published transition probabilities and two linear regimes on one lag for
// the deviation of the spread from its level.
constexpr double kSimP = 0.844298;
constexpr double kSimQ = 0.746643;
constexpr double kSimLevels[3] = {0.10, 0.30, 0.12};

double round5(double v) { return std::round(v * 1e5) / 1e5; }

WeekRef week_after(WeekRef w) {
  if (++w.week > 52) {
    w.week = 1;
    ++w.year;
  }
  return w;
}

}  // namespace

void cmd_simulate(const RunConfig& config, const LogFn& log) {
  const std::size_t n = config.sim_weeks;
  if (n < 6) throw_usage("sim_weeks must be at least 6");
  if (!(config.sim_missing >= 0.0 && config.sim_missing < 0.5)) throw_usage("sim_missing must lie in [0, 0.5)");
  if (config.sim_start_year < 1) throw_usage("sim_start_year must be positive");

  std::string output = config.sim_output;
  if (output.empty()) output = join(prepare_out_dir(config), "simulated.csv");
  const auto parent = fs::path(output).parent_path();
  if (!parent.empty()) {
    std::error_code ec;
    fs::create_directories(parent, ec);
    if (ec) throw_data("cannot create directory '" + parent.string() + "': " + ec.message());
  }

  const auto params = linear_two_regime(kSimP, kSimQ, {0.0, 0.5}, {0.0, 0.2}, 0.01, 0.04);
  SimulateOptions so;
  so.seed = config.sim_seed;
  so.burn_in = 100;
  const auto dev = simulate(params, n, so);

  std::mt19937_64 rng(config.sim_seed ^ 0x5bd1e995ULL);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const std::vector<std::size_t> tau{n / 3, 2 * n / 3};
  // (high, low) centre per segment; the remaining one sits in between.
  constexpr Series kHigh[3] = {Series::hoa, Series::poa, Series::lgs};
  constexpr Series kLow[3] = {Series::lgs, Series::hoa, Series::poa};

  double gold = 15.7;
  double log_fx[3] = {std::log(25.2), std::log(13.6), std::log(185.0)};
  Dataset data;
  WeekRef when{config.sim_start_year, 1};
  for (std::size_t t = 0; t < n; ++t, when = week_after(when)) {
    const std::size_t seg = t < tau[0] ? 0 : (t < tau[1] ? 1 : 2);
    const double spread = std::abs(kSimLevels[seg] + dev.series[t]);
    gold = std::clamp(gold + 0.01 * gauss(rng), 15.0, 16.5);
    const double mid_share = 0.2 + 0.6 * unit(rng);
    for (double& x : log_fx) x += 0.002 * gauss(rng);

    QuotationWeek w;
    w.when = when;
    for (int d = 0; d < 2; ++d) {
      const auto day = static_cast<QuoteDay>(d);
      const double base = gold + (d == 1 ? 0.003 * gauss(rng) : 0.0);
      const Series high = kHigh[seg];
      const Series low = kLow[seg];
      for (Series s : {Series::poa, Series::lgs, Series::hoa}) {
        double v = base + mid_share * spread;
        if (s == high) v = base + spread;
        if (s == low) v = base;
        w.at(s, day) = round5(v);
      }
      const double fx_day = d == 1 ? 0.001 : 0.0;
      w.at(Series::lpv, day) = round5(std::exp(log_fx[0] + fx_day * gauss(rng)));
      w.at(Series::hlv, day) = round5(std::exp(log_fx[1] + fx_day * gauss(rng)));
      w.at(Series::phv, day) = round5(std::exp(log_fx[2] + fx_day * gauss(rng)));
    }
    data.push_back(w);
  }

  std::size_t blanked = 0;
  if (config.sim_missing > 0.0) {
    const auto max_gap = static_cast<std::size_t>(std::max(config.imputation.max_gap, 0));
    for (std::size_t s = 0; s < kSeriesCount; ++s) {
      for (std::size_t d = 0; d < kDayCount; ++d) {
        std::size_t run = 0;
        for (std::size_t t = 0; t < n; ++t) {
          auto& cell = data[t].values[s][d];
          if (run < max_gap && unit(rng) < config.sim_missing) {
            cell.reset();
            ++run;
            ++blanked;
          } else {
            run = 0;
          }
        }
      }
    }
  }

  std::ostringstream table;
  write_dataset(table, data);
  write_text(output, table.str());

  const auto complete = impute_missing(data, config.imputation).data;
  const auto spread = compute_spread(complete, SpreadAggregation::weekly_mean);
  std::vector<std::size_t> states;
  for (auto s : dev.states) states.push_back(s + 1);
  std::vector<std::string> tau_labels;
  for (auto t : tau) tau_labels.push_back(data[t].when.label());
  Json truth = {{"seed", config.sim_seed},
                {"weeks", n},
                {"params", to_json(params)},
                {"levels", kSimLevels},
                {"tau", tau},
                {"tau_labels", tau_labels},
                {"blanked_cells", blanked},
                {"states", states},
                {"spread", spread.values}};
  auto sidecar = fs::path(output);
  sidecar.replace_extension(".truth.json");
  write_json_file(sidecar.string(), truth);
  say(log, std::to_string(n) + " weeks simulated to " + output);
}

}  // namespace regimes
