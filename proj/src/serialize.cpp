#include "regimes/serialize.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "regimes/error.hpp"

namespace regimes {

namespace {

Json number(double v) {
  if (std::isnan(v)) return nullptr;
  return v;
}

double number_from(const Json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  return j.get<double>();
}

Json matrix_rows(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from(const Json& rows) {
  const auto n_rows = static_cast<Eigen::Index>(rows.size());
  const auto n_cols = n_rows > 0 ? static_cast<Eigen::Index>(rows.at(0).size()) : 0;
  Eigen::MatrixXd m(n_rows, n_cols);
  for (Eigen::Index r = 0; r < n_rows; ++r) {
    const auto& row = rows.at(static_cast<std::size_t>(r));
    if (static_cast<Eigen::Index>(row.size()) != n_cols) throw_data("ragged matrix in artifact");
    for (Eigen::Index c = 0; c < n_cols; ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

template <class F>
auto parsing(const char* what, F&& f) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    throw_data(std::string("malformed ") + what + " artifact: " + e.what());
  }
}

}  // namespace

Json to_json(const ImputationReport& report) {
  Json cells = Json::array();
  for (const auto& c : report.cells) {
    cells.push_back({{"series", std::string(series_name(c.series))},
                     {"day", std::string(day_name(c.day))},
                     {"week", c.week.label()},
                     {"value", c.value},
                     {"method", std::string(impute_method_name(c.method))}});
  }
  return {{"imputed_cells", report.cells.size()}, {"cells", std::move(cells)}};
}

Json to_json(const FeatureSet& features) {
  Json rows = Json::array();
  for (std::size_t i = 0; i < features.vectors.size(); ++i) {
    const auto& fv = features.vectors[i];
    rows.push_back({{"week", features.weeks[i].label()},
                    {"week_ref", fv.week_ref},
                    {"base", fv.base},
                    {"hpl", fv.hpl},
                    {"standardized", fv.standardized}});
  }
  return {{"include_hpl", features.options.include_hpl},
          {"hpl_form", features.options.hpl == HplForm::difference ? "difference" : "ratio"},
          {"inputs", features.input_names()},
          {"mean", features.stats.mean},
          {"stddev", features.stats.stddev},
          {"vectors", std::move(rows)}};
}

Json to_json(const SpreadSeries& spread) {
  return {{"aggregation", std::string(aggregation_name(spread.aggregation))},
          {"length", spread.size()},
          {"labels", spread.labels},
          {"week_index", spread.week_index},
          {"values", spread.values}};
}

SpreadSeries spread_from_json(const Json& j) {
  return parsing("spread", [&] {
    SpreadSeries s;
    s.aggregation = parse_aggregation(j.at("aggregation").get<std::string>());
    s.labels = j.at("labels").get<std::vector<std::string>>();
    s.week_index = j.at("week_index").get<std::vector<std::size_t>>();
    s.values = j.at("values").get<std::vector<double>>();
    if (s.labels.size() != s.values.size() || s.week_index.size() != s.values.size()) {
      throw_data("spread artifact has inconsistent column lengths");
    }
    return s;
  });
}

Json to_json(const SomGrid& grid) {
  Json codes = Json::array();
  for (std::size_t node = 0; node < grid.node_count(); ++node) {
    const auto c = grid.code(node);
    codes.push_back(std::vector<double>(c.begin(), c.end()));
  }
  return {{"rows", grid.rows},
          {"cols", grid.cols},
          {"dimension", grid.dimension},
          {"seed", grid.seed},
          {"trained_epochs", grid.trained_epochs},
          {"schedule",
           {{"epochs", grid.schedule.epochs},
            {"learning_rate_start", grid.schedule.learning_rate_start},
            {"learning_rate_end", grid.schedule.learning_rate_end},
            {"radius_start", grid.schedule.radius_start},
            {"radius_end", grid.schedule.radius_end}}},
          {"code_vectors", std::move(codes)}};
}

SomGrid som_grid_from_json(const Json& j) {
  return parsing("SOM grid", [&] {
    SomGrid g;
    g.rows = j.at("rows").get<std::size_t>();
    g.cols = j.at("cols").get<std::size_t>();
    g.dimension = j.at("dimension").get<std::size_t>();
    g.seed = j.at("seed").get<std::uint64_t>();
    g.trained_epochs = j.at("trained_epochs").get<std::size_t>();
    const auto& s = j.at("schedule");
    g.schedule.epochs = s.at("epochs").get<std::size_t>();
    g.schedule.learning_rate_start = s.at("learning_rate_start").get<double>();
    g.schedule.learning_rate_end = s.at("learning_rate_end").get<double>();
    g.schedule.radius_start = s.at("radius_start").get<double>();
    g.schedule.radius_end = s.at("radius_end").get<double>();
    for (const auto& c : j.at("code_vectors")) {
      const auto v = c.get<std::vector<double>>();
      if (v.size() != g.dimension) throw_data("SOM code vector has the wrong dimension");
      g.code_vectors.insert(g.code_vectors.end(), v.begin(), v.end());
    }
    if (g.code_vectors.size() != g.node_count() * g.dimension) {
      throw_data("SOM artifact has the wrong number of code vectors");
    }
    return g;
  });
}

Json to_json(const MacroClassification& mc) {
  Json linkage = Json::array();
  for (const auto& s : mc.linkage) {
    linkage.push_back({{"left", s.left}, {"right", s.right}, {"height", s.height}, {"size", s.size}});
  }
  Json intervals = Json::array();
  for (const auto& iv : mc.intervals) {
    intervals.push_back({{"first", iv.first}, {"last", iv.last}, {"class", iv.class_id}});
  }
  return {{"k", mc.k},
          {"node_to_class", mc.node_to_class},
          {"linkage", std::move(linkage)},
          {"week_to_node", mc.week_to_node},
          {"week_to_class", mc.week_to_class},
          {"class_sizes", mc.class_sizes},
          {"class_means", mc.class_means},
          {"intervals", std::move(intervals)}};
}

MacroClassification classes_from_json(const Json& j) {
  return parsing("macro-class", [&] {
    MacroClassification mc;
    mc.k = j.at("k").get<std::size_t>();
    mc.node_to_class = j.at("node_to_class").get<std::vector<int>>();
    for (const auto& s : j.at("linkage")) {
      mc.linkage.push_back({s.at("left").get<std::size_t>(), s.at("right").get<std::size_t>(),
                            s.at("height").get<double>(), s.at("size").get<std::size_t>()});
    }
    mc.week_to_node = j.at("week_to_node").get<std::vector<std::size_t>>();
    mc.week_to_class = j.at("week_to_class").get<std::vector<int>>();
    mc.class_sizes = j.at("class_sizes").get<std::vector<std::size_t>>();
    mc.class_means = j.at("class_means").get<std::vector<std::vector<double>>>();
    for (const auto& iv : j.at("intervals")) {
      mc.intervals.push_back(
          {iv.at("first").get<std::size_t>(), iv.at("last").get<std::size_t>(), iv.at("class").get<int>()});
    }
    for (int c : mc.week_to_class) {
      if (c < 1 || static_cast<std::size_t>(c) > mc.k) throw_data("class id out of range in artifact");
    }
    return mc;
  });
}

Json to_json(const MsSpec& spec) {
  Json regimes = Json::array();
  for (const auto& r : spec.regimes) {
    Json entry = {{"family", std::string(mean_family_name(r.family))}};
    if (r.family == MeanFamily::mlp) entry["hidden_units"] = r.hidden_units;
    regimes.push_back(std::move(entry));
  }
  return {{"lag", spec.lag}, {"regimes", std::move(regimes)}};
}

MsSpec ms_spec_from_json(const Json& j) {
  return parsing("model specification", [&] {
    MsSpec spec;
    spec.lag = j.at("lag").get<std::size_t>();
    for (const auto& r : j.at("regimes")) {
      RegimeMeanSpec rs;
      rs.family = parse_mean_family(r.at("family").get<std::string>());
      if (r.contains("hidden_units")) rs.hidden_units = r.at("hidden_units").get<std::size_t>();
      spec.regimes.push_back(rs);
    }
    return spec;
  });
}

Json to_json(const MsParams& params) {
  Json regimes = Json::array();
  for (std::size_t r = 0; r < params.n_regimes(); ++r) {
    const auto& m = params.means[r];
    Json entry = {{"family", std::string(mean_family_name(m.family))},
                  {"lag", m.lag},
                  {"sigma", params.sigma[r]},
                  {"params", m.params}};
    if (m.family == MeanFamily::mlp) {
      entry["hidden_units"] = m.hidden;
      entry["input_center"] = m.input_center;
      entry["input_scale"] = m.input_scale;
      entry["activation"] = "tanh";
    }
    regimes.push_back(std::move(entry));
  }
  Json out = {{"layout", "column-stochastic: transition[i][j] = P(x_t = i | x_{t-1} = j)"},
              {"transition", matrix_rows(params.transition)}};
  if (params.n_regimes() == 2) {
    out["p"] = params.p();
    out["q"] = params.q();
  }
  out["stationary"] = stationary_distribution(params.transition);
  out["regimes"] = std::move(regimes);
  return out;
}

MsParams ms_params_from_json(const Json& j) {
  return parsing("model parameters", [&] {
    MsParams p;
    p.transition = matrix_from(j.at("transition"));
    for (const auto& r : j.at("regimes")) {
      RegimeMean m;
      m.family = parse_mean_family(r.at("family").get<std::string>());
      m.lag = r.at("lag").get<std::size_t>();
      m.params = r.at("params").get<std::vector<double>>();
      if (m.family == MeanFamily::mlp) {
        m.hidden = r.at("hidden_units").get<std::size_t>();
        m.input_center = r.at("input_center").get<double>();
        m.input_scale = r.at("input_scale").get<double>();
        if (m.params.size() != RegimeMean::mlp_param_count(m.lag, m.hidden)) {
          throw_data("MLP parameter count does not match its shape");
        }
      } else if (m.params.size() != m.lag + 1) {
        throw_data("linear coefficient count does not match the lag");
      }
      p.means.push_back(std::move(m));
      p.sigma.push_back(r.at("sigma").get<double>());
    }
    p.validate();
    return p;
  });
}

Json to_json(const RegimeProbabilities& probs) {
  return {{"lag", probs.lag},
          {"loglik", probs.loglik},
          {"rows", probs.rows()},
          {"filtered", matrix_rows(probs.filtered)},
          {"predicted", matrix_rows(probs.predicted)},
          {"smoothed", matrix_rows(probs.smoothed)}};
}

RegimeProbabilities probabilities_from_json(const Json& j) {
  return parsing("regime probabilities", [&] {
    RegimeProbabilities p;
    p.lag = j.at("lag").get<std::size_t>();
    p.loglik = j.at("loglik").get<double>();
    p.filtered = matrix_from(j.at("filtered"));
    p.predicted = matrix_from(j.at("predicted"));
    p.smoothed = matrix_from(j.at("smoothed"));
    if (p.smoothed.rows() != p.filtered.rows() || p.predicted.rows() != p.filtered.rows()) {
      throw_data("regime probability tables have different lengths");
    }
    return p;
  });
}

Json to_json(const Segmentation& seg, const std::vector<std::string>& labels) {
  Json segments = Json::array();
  for (const auto& s : seg.segments) {
    segments.push_back({{"begin", s.begin}, {"end", s.end}, {"mean", s.mean}, {"covariance", {{s.variance}}}});
  }
  Json out = {{"mode", std::string(change_mode_name(seg.mode))},
              {"n_changepoints", seg.tau.size()},
              {"tau", seg.tau}};
  if (!labels.empty()) {
    // Label of the first observation of each new segment.
    Json tau_labels = Json::array();
    for (auto t : seg.tau) tau_labels.push_back(t < labels.size() ? labels[t] : std::string());
    out["tau_labels"] = std::move(tau_labels);
  }
  out["segments"] = std::move(segments);
  out["contrast"] = seg.contrast;
  out["penalty_used"] = number(seg.penalty_used);
  return out;
}

Segmentation segmentation_from_json(const Json& j) {
  return parsing("segmentation", [&] {
    Segmentation seg;
    seg.mode = parse_change_mode(j.at("mode").get<std::string>());
    seg.tau = j.at("tau").get<std::vector<std::size_t>>();
    for (const auto& s : j.at("segments")) {
      seg.segments.push_back({s.at("begin").get<std::size_t>(), s.at("end").get<std::size_t>(),
                              s.at("mean").get<double>(), s.at("covariance").at(0).at(0).get<double>()});
    }
    seg.contrast = j.at("contrast").get<double>();
    seg.penalty_used = number_from(j.at("penalty_used"));
    return seg;
  });
}

Json to_json(const SelectionDiagnostics& diag) {
  return {{"rule", diag.rule},
          {"selected_segments", diag.selected},
          {"contrast", diag.contrast},
          {"normalized", diag.normalized},
          {"second_difference", diag.second_difference},
          {"likelihood_ratio", diag.likelihood_ratio},
          {"guard_penalty_per_change", diag.guard_penalty_per_change}};
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_data("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw_data("cannot parse '" + path + "': " + e.what());
  }
}

void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_data("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
  if (!out) throw_data("failed writing '" + path + "'");
}

}  // namespace regimes
