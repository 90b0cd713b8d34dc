#include "regimes/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "regimes/error.hpp"

namespace regimes {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  throw_usage("invalid value '" + std::string(value) + "' for " + std::string(key));
}

template <class T>
T parse_int(std::string_view key, std::string_view value) {
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) bad_value(key, value);
  return out;
}

double parse_real(std::string_view key, std::string_view value) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) bad_value(key, value);
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "on" || value == "true" || value == "1" || value == "yes") return true;
  if (value == "off" || value == "false" || value == "0" || value == "no") return false;
  bad_value(key, value);
}

std::string show(bool b) { return b ? "on" : "off"; }
std::string show(double v) { return format_double(v); }
template <class T>
std::string show_int(T v) {
  return std::to_string(v);
}

std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(',', start);
    const auto item = trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (!item.empty()) out.push_back(item);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

struct Entry {
  ConfigKey key;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define REGIMES_SIZE_KEY(NAME, HELP, FIELD)                                                     \
  Entry {                                                                                       \
    {NAME, HELP}, [](RunConfig& c, std::string_view v) { c.FIELD = parse_int<std::size_t>(NAME, v); }, \
        [](const RunConfig& c) { return show_int(c.FIELD); }                                    \
  }
#define REGIMES_REAL_KEY(NAME, HELP, FIELD)                                          \
  Entry {                                                                            \
    {NAME, HELP}, [](RunConfig& c, std::string_view v) { c.FIELD = parse_real(NAME, v); }, \
        [](const RunConfig& c) { return show(c.FIELD); }                             \
  }
#define REGIMES_BOOL_KEY(NAME, HELP, FIELD)                                          \
  Entry {                                                                            \
    {NAME, HELP}, [](RunConfig& c, std::string_view v) { c.FIELD = parse_bool(NAME, v); }, \
        [](const RunConfig& c) { return show(c.FIELD); }                             \
  }
#define REGIMES_SEED_KEY(NAME, HELP, FIELD)                                                        \
  Entry {                                                                                          \
    {NAME, HELP}, [](RunConfig& c, std::string_view v) { c.FIELD = parse_int<std::uint64_t>(NAME, v); }, \
        [](const RunConfig& c) { return show_int(c.FIELD); }                                       \
  }

const std::vector<Entry>& registry() {
  static const std::vector<Entry> entries = {
      Entry{{"input", "quotation table (CSV)"},
            [](RunConfig& c, std::string_view v) { c.input = std::string(v); },
            [](const RunConfig& c) { return c.input; }},
      Entry{{"out_dir", "directory for artifacts and reports"},
            [](RunConfig& c, std::string_view v) { c.out_dir = std::string(v); },
            [](const RunConfig& c) { return c.out_dir; }},
      REGIMES_BOOL_KEY("som", "run the SOM periodization stage (on/off)", run_som),
      REGIMES_BOOL_KEY("ms", "run the switching-model stage (on/off)", run_ms),
      REGIMES_BOOL_KEY("cpd", "run the change-point stage (on/off)", run_cpd),
      Entry{{"max_gap", "longest run of missing weeks that may be imputed"},
            [](RunConfig& c, std::string_view v) { c.imputation.max_gap = parse_int<int>("max_gap", v); },
            [](const RunConfig& c) { return show_int(c.imputation.max_gap); }},
      REGIMES_BOOL_KEY("include_hpl", "feed the hpl pair to the SOM", features.include_hpl),
      Entry{{"hpl_form", "hpl as 'difference' or 'ratio'"},
            [](RunConfig& c, std::string_view v) {
              if (v == "difference") {
                c.features.hpl = HplForm::difference;
              } else if (v == "ratio") {
                c.features.hpl = HplForm::ratio;
              } else {
                bad_value("hpl_form", v);
              }
            },
            [](const RunConfig& c) {
              return std::string(c.features.hpl == HplForm::difference ? "difference" : "ratio");
            }},
      Entry{{"aggregation", "spread per week ('weekly_mean') or per quotation ('per_quotation')"},
            [](RunConfig& c, std::string_view v) { c.aggregation = parse_aggregation(v); },
            [](const RunConfig& c) { return std::string(aggregation_name(c.aggregation)); }},
      REGIMES_SIZE_KEY("som_rows", "SOM grid rows", som_rows),
      REGIMES_SIZE_KEY("som_cols", "SOM grid columns", som_cols),
      REGIMES_SIZE_KEY("som_epochs", "passes over the data", som_schedule.epochs),
      REGIMES_REAL_KEY("som_lr_start", "initial learning rate", som_schedule.learning_rate_start),
      REGIMES_REAL_KEY("som_lr_end", "final learning rate", som_schedule.learning_rate_end),
      REGIMES_REAL_KEY("som_radius_start", "initial neighbourhood radius (0: max(rows, cols) / 2)",
                       som_schedule.radius_start),
      REGIMES_REAL_KEY("som_radius_end", "final neighbourhood radius", som_schedule.radius_end),
      REGIMES_SEED_KEY("som_seed", "SOM seed", som_seed),
      REGIMES_SIZE_KEY("som_classes", "number of macro-classes", som_classes),
      Entry{{"ms_families", "comma-separated mean family per regime (mlp, linear)"},
            [](RunConfig& c, std::string_view v) {
              std::vector<RegimeMeanSpec> regimes;
              const std::size_t hidden = c.ms_spec.regimes.empty() ? 3 : c.ms_spec.regimes.front().hidden_units;
              for (auto item : split_list(v)) regimes.push_back({parse_mean_family(item), hidden});
              if (regimes.size() < 2) bad_value("ms_families", v);
              c.ms_spec.regimes = std::move(regimes);
            },
            [](const RunConfig& c) {
              std::string s;
              for (const auto& r : c.ms_spec.regimes) {
                if (!s.empty()) s += ',';
                s += mean_family_name(r.family);
              }
              return s;
            }},
      Entry{{"ms_hidden", "hidden units of MLP regimes"},
            [](RunConfig& c, std::string_view v) {
              const auto h = parse_int<std::size_t>("ms_hidden", v);
              if (h < 1) bad_value("ms_hidden", v);
              for (auto& r : c.ms_spec.regimes) r.hidden_units = h;
            },
            [](const RunConfig& c) {
              return show_int(c.ms_spec.regimes.empty() ? 0 : c.ms_spec.regimes.front().hidden_units);
            }},
      REGIMES_SIZE_KEY("ms_lag", "autoregressive lag", ms_spec.lag),
      REGIMES_REAL_KEY("ms_tol", "EM stopping tolerance on the log-likelihood gain", em.tol),
      REGIMES_SIZE_KEY("ms_max_iter", "EM iteration cap", em.max_iter),
      REGIMES_SIZE_KEY("ms_restarts", "seeded EM restarts", em.n_restarts),
      REGIMES_SEED_KEY("ms_seed", "EM seed", em.seed),
      REGIMES_REAL_KEY("ms_min_weight", "smallest admissible regime posterior weight", em.min_weight),
      REGIMES_SIZE_KEY("ms_mlp_steps", "gradient steps per M-step for MLP regimes", em.mlp_steps),
      REGIMES_REAL_KEY("regime_threshold", "P(regime 1) above which a week counts as regime 1",
                       regime_threshold),
      Entry{{"cpd_modes", "change-point modes: mean, mv or both ('mean,mv')"},
            [](RunConfig& c, std::string_view v) {
              std::vector<ChangeMode> modes;
              for (auto item : split_list(v)) modes.push_back(parse_change_mode(item));
              if (modes.empty()) bad_value("cpd_modes", v);
              c.cpd_modes = std::move(modes);
            },
            [](const RunConfig& c) {
              std::string s;
              for (auto m : c.cpd_modes) {
                if (!s.empty()) s += ',';
                s += m == ChangeMode::mean_only ? "mean" : "mv";
              }
              return s;
            }},
      REGIMES_SIZE_KEY("cpd_k_max", "largest number of segments considered", cpd_k_max),
      REGIMES_SIZE_KEY("cpd_min_seg_mean", "minimum segment length in mean mode", cpd_min_seg_mean),
      REGIMES_SIZE_KEY("cpd_min_seg_mv", "minimum segment length in mean+variance mode", cpd_min_seg_mv),
      Entry{{"cpd_penalty", "selection rule: 'adaptive' or 'fixed'"},
            [](RunConfig& c, std::string_view v) {
              if (v == "adaptive") {
                c.cpd_selection.scheme = PenaltyScheme::adaptive;
              } else if (v == "fixed") {
                c.cpd_selection.scheme = PenaltyScheme::fixed;
              } else {
                bad_value("cpd_penalty", v);
              }
            },
            [](const RunConfig& c) {
              return std::string(c.cpd_selection.scheme == PenaltyScheme::adaptive ? "adaptive" : "fixed");
            }},
      REGIMES_REAL_KEY("cpd_threshold", "second-difference threshold of the adaptive rule",
                       cpd_selection.threshold),
      REGIMES_BOOL_KEY("cpd_guard", "likelihood-ratio check of the adaptive choice", cpd_selection.likelihood_guard),
      REGIMES_REAL_KEY("cpd_beta", "per-segment penalty of the fixed rule", cpd_selection.beta),
      REGIMES_SIZE_KEY("sim_weeks", "simulated weeks", sim_weeks),
      REGIMES_SEED_KEY("sim_seed", "simulation seed", sim_seed),
      Entry{{"sim_start_year", "first simulated year"},
            [](RunConfig& c, std::string_view v) { c.sim_start_year = parse_int<int>("sim_start_year", v); },
            [](const RunConfig& c) { return show_int(c.sim_start_year); }},
      REGIMES_REAL_KEY("sim_missing", "fraction of simulated cells left empty", sim_missing),
      Entry{{"sim_output", "simulated table path (default <out_dir>/simulated.csv)"},
            [](RunConfig& c, std::string_view v) { c.sim_output = std::string(v); },
            [](const RunConfig& c) { return c.sim_output; }},
  };
  return entries;
}

#undef REGIMES_SIZE_KEY
#undef REGIMES_REAL_KEY
#undef REGIMES_BOOL_KEY
#undef REGIMES_SEED_KEY

const Entry& find_entry(std::string_view key) {
  for (const auto& e : registry()) {
    if (e.key.name == key) return e;
  }
  throw_usage("unknown configuration key '" + std::string(key) + "'");
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const auto& e : registry()) out.push_back(e.key);
    return out;
  }();
  return keys;
}

void RunConfig::set(std::string_view key, std::string_view value) {
  find_entry(trim(key)).set(*this, trim(value));
}

std::string RunConfig::get(std::string_view key) const { return find_entry(trim(key)).get(*this); }

void RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_usage("cannot open config file '" + path + "'");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw_usage(path + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    try {
      set(view.substr(0, eq), view.substr(eq + 1));
    } catch (const Error& e) {
      throw_usage(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

std::string RunConfig::canonical() const {
  std::ostringstream out;
  for (const auto& e : registry()) out << e.key.name << '=' << e.get(*this) << '\n';
  return out.str();
}

}  // namespace regimes
