#include "regimes/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <cstdio>
#include <map>
#include <ostream>
#include <sstream>

#include "regimes/error.hpp"

namespace regimes {

namespace {

constexpr std::array<QuoteDay, kDayCount> kDays{QuoteDay::tuesday, QuoteDay::friday};
constexpr std::array<Series, kSeriesCount> kAllSeries{Series::poa, Series::lgs, Series::hoa,
                                                      Series::lpv, Series::hlv, Series::phv};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      cells.push_back(trim(line.substr(start)));
      break;
    }
    cells.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return cells;
}

std::string at_line(std::size_t line) { return "line " + std::to_string(line) + ": "; }

template <class T>
bool parse_number(std::string_view text, T& out) {
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

}  // namespace

std::string_view series_name(Series s) { return kSeriesNames[static_cast<int>(s)]; }

std::string_view day_name(QuoteDay d) { return d == QuoteDay::tuesday ? "tuesday" : "friday"; }

std::string column_name(Series s, QuoteDay d) {
  return std::string(series_name(s)) + (d == QuoteDay::tuesday ? "_t" : "_f");
}

std::string WeekRef::label() const {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%d-W%02d", year, week);
  return buf;
}

double QuotationWeek::price(Series s, QuoteDay d) const {
  const auto& v = at(s, d);
  if (!v) throw_data("missing " + column_name(s, d) + " in week " + when.label());
  return *v;
}

bool QuotationWeek::complete() const {
  for (const auto& series : values) {
    for (const auto& cell : series) {
      if (!cell) return false;
    }
  }
  return true;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

Dataset parse_dataset(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  int year_col = -1;
  int week_col = -1;
  std::array<std::array<int, kDayCount>, kSeriesCount> cols{};
  for (auto& c : cols) c.fill(-1);
  std::size_t n_cols = 0;
  Dataset data;

  while (std::getline(in, line)) {
    ++line_no;
    const auto trimmed = trim(line);
    if (trimmed.empty()) continue;
    const auto cells = split_commas(trimmed);

    if (!have_header) {
      have_header = true;
      n_cols = cells.size();
      std::map<std::string, int, std::less<>> by_name;
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (!by_name.emplace(std::string(cells[i]), static_cast<int>(i)).second) {
          throw_data(at_line(line_no) + "duplicate column '" + std::string(cells[i]) + "'");
        }
      }
      auto need = [&](const std::string& name) {
        auto it = by_name.find(name);
        if (it == by_name.end()) throw_data(at_line(line_no) + "missing column '" + name + "'");
        return it->second;
      };
      year_col = need("year");
      week_col = need("week");
      for (auto s : kAllSeries) {
        for (auto d : kDays) cols[static_cast<int>(s)][static_cast<int>(d)] = need(column_name(s, d));
      }
      continue;
    }

    if (cells.size() != n_cols) {
      throw_data(at_line(line_no) + "expected " + std::to_string(n_cols) + " cells, found " +
                 std::to_string(cells.size()));
    }
    QuotationWeek row;
    if (!parse_number(cells[year_col], row.when.year)) {
      throw_data(at_line(line_no) + "malformed year '" + std::string(cells[year_col]) + "'");
    }
    if (!parse_number(cells[week_col], row.when.week) || row.when.week < 1 || row.when.week > 53) {
      throw_data(at_line(line_no) + "malformed week '" + std::string(cells[week_col]) + "'");
    }
    for (auto s : kAllSeries) {
      for (auto d : kDays) {
        const auto text = cells[cols[static_cast<int>(s)][static_cast<int>(d)]];
        if (text.empty()) continue;
        double v = 0.0;
        if (!parse_number(text, v) || !std::isfinite(v)) {
          throw_data(at_line(line_no) + "malformed value '" + std::string(text) + "' in column " +
                     column_name(s, d));
        }
        if (v <= 0.0) {
          throw_data(at_line(line_no) + "non-positive price " + std::string(text) + " in column " +
                     column_name(s, d));
        }
        row.at(s, d) = v;
      }
    }
    if (!data.empty()) {
      const auto& prev = data.back().when;
      if (row.when == prev) {
        throw_data(at_line(line_no) + "duplicate week " + row.when.label());
      }
      if (row.when < prev) {
        throw_data(at_line(line_no) + "weeks out of order: " + row.when.label() + " after " +
                   prev.label());
      }
    }
    data.push_back(row);
  }
  if (!have_header) throw_data("no header row");
  if (data.empty()) throw_data("no data rows");
  return data;
}

Dataset parse_dataset_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_data("cannot open input file '" + path + "'");
  return parse_dataset(in);
}

void write_dataset(std::ostream& out, const Dataset& data) {
  out << "year,week";
  for (auto s : kAllSeries) {
    for (auto d : kDays) out << ',' << column_name(s, d);
  }
  out << '\n';
  for (const auto& row : data) {
    out << row.when.year << ',' << row.when.week;
    for (auto s : kAllSeries) {
      for (auto d : kDays) {
        out << ',';
        if (const auto& v = row.at(s, d)) out << format_double(*v);
      }
    }
    out << '\n';
  }
}

void validate_dataset(const Dataset& data) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& row = data[i];
    for (auto s : kAllSeries) {
      for (auto d : kDays) {
        const auto& v = row.at(s, d);
        if (v && !(*v > 0.0)) {
          throw_data("non-positive price in " + column_name(s, d) + " at week " + row.when.label());
        }
      }
    }
    if (i > 0) {
      if (row.when == data[i - 1].when) throw_data("duplicate week " + row.when.label());
      if (row.when < data[i - 1].when) throw_data("weeks out of order at " + row.when.label());
    }
  }
}

// ---------------------------------------------------------------------------

std::string_view impute_method_name(ImputeMethod m) {
  switch (m) {
    case ImputeMethod::interpolate: return "interpolate";
    case ImputeMethod::backfill: return "backfill";
    case ImputeMethod::forwardfill: return "forwardfill";
  }
  return "?";
}

ImputationResult impute_missing(const Dataset& data, const ImputationPolicy& policy) {
  if (policy.max_gap < 0) throw_usage("max_gap must be non-negative");
  ImputationResult result{data, {}};
  auto& out = result.data;
  const std::size_t n = out.size();

  for (auto s : kAllSeries) {
    for (auto d : kDays) {
      std::size_t i = 0;
      while (i < n) {
        if (out[i].at(s, d)) {
          ++i;
          continue;
        }
        std::size_t j = i;
        while (j < n && !out[j].at(s, d)) ++j;
        const std::size_t run = j - i;
        if (run > static_cast<std::size_t>(policy.max_gap)) {
          throw_data("gap of " + std::to_string(run) + " missing weeks in " + column_name(s, d) +
                     " from " + out[i].when.label() + " to " + out[j - 1].when.label() +
                     " exceeds max_gap=" + std::to_string(policy.max_gap));
        }
        const bool has_left = i > 0;
        const bool has_right = j < n;
        if (!has_left && !has_right) {
          throw_data("series " + column_name(s, d) + " has no observed values");
        }
        for (std::size_t k = i; k < j; ++k) {
          double v = 0.0;
          ImputeMethod method{};
          if (has_left && has_right) {
            const double left = *out[i - 1].at(s, d);
            const double right = *out[j].at(s, d);
            const double frac = static_cast<double>(k - (i - 1)) / static_cast<double>(run + 1);
            v = left + frac * (right - left);
            method = ImputeMethod::interpolate;
          } else if (has_right) {
            v = *out[j].at(s, d);
            method = ImputeMethod::backfill;
          } else {
            v = *out[i - 1].at(s, d);
            method = ImputeMethod::forwardfill;
          }
          out[k].at(s, d) = v;
          result.report.cells.push_back({s, d, out[k].when, v, method});
        }
        i = j;
      }
    }
  }
  return result;
}

// ---------------------------------------------------------------------------

std::vector<double> FeatureVector::raw() const {
  std::vector<double> r(base.begin(), base.end());
  r.insert(r.end(), hpl.begin(), hpl.end());
  return r;
}

std::vector<std::string> FeatureSet::raw_names() {
  std::vector<std::string> names;
  for (auto s : kAllSeries) {
    for (auto d : kDays) names.push_back(column_name(s, d));
  }
  names.push_back("hpl_t");
  names.push_back("hpl_f");
  return names;
}

std::vector<std::string> FeatureSet::input_names() const {
  auto names = raw_names();
  if (!options.include_hpl) names.resize(kBaseDimension);
  return names;
}

double hpl_value(double hoa, double poa, double lgs, HplForm form) {
  const double avg = 0.5 * (poa + lgs);
  return form == HplForm::difference ? hoa - avg : hoa / avg;
}

FeatureSet build_features(const Dataset& data, const FeatureOptions& options) {
  if (data.empty()) throw_data("cannot build features from an empty dataset");
  FeatureSet fs;
  fs.options = options;
  const std::size_t dim = kBaseDimension + (options.include_hpl ? kDayCount : 0);
  fs.vectors.reserve(data.size());
  for (std::size_t w = 0; w < data.size(); ++w) {
    const auto& row = data[w];
    FeatureVector fv;
    fv.week_ref = w;
    std::size_t c = 0;
    for (auto s : kAllSeries) {
      for (auto d : kDays) fv.base[c++] = row.price(s, d);
    }
    for (auto d : kDays) {
      fv.hpl[static_cast<int>(d)] = hpl_value(row.price(Series::hoa, d), row.price(Series::poa, d),
                                              row.price(Series::lgs, d), options.hpl);
    }
    fv.standardized = fv.raw();
    fv.standardized.resize(dim);
    fs.vectors.push_back(std::move(fv));
    fs.weeks.push_back(row.when);
  }

  const auto names = fs.input_names();
  const double n = static_cast<double>(data.size());
  fs.stats.mean.assign(dim, 0.0);
  fs.stats.stddev.assign(dim, 0.0);
  for (std::size_t c = 0; c < dim; ++c) {
    double mean = 0.0;
    for (const auto& fv : fs.vectors) mean += fv.standardized[c];
    mean /= n;
    double ss = 0.0;
    for (const auto& fv : fs.vectors) {
      const double dlt = fv.standardized[c] - mean;
      ss += dlt * dlt;
    }
    const double sd = std::sqrt(ss / n);
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
      throw_data("zero variance in coordinate " + names[c] + "; cannot standardize");
    }
    fs.stats.mean[c] = mean;
    fs.stats.stddev[c] = sd;
    for (auto& fv : fs.vectors) fv.standardized[c] = (fv.standardized[c] - mean) / sd;
  }
  return fs;
}

// ---------------------------------------------------------------------------

std::string_view aggregation_name(SpreadAggregation a) {
  return a == SpreadAggregation::weekly_mean ? "weekly_mean" : "per_quotation";
}

SpreadAggregation parse_aggregation(std::string_view name) {
  if (name == "weekly_mean" || name == "mean") return SpreadAggregation::weekly_mean;
  if (name == "per_quotation") return SpreadAggregation::per_quotation;
  throw_usage("unknown spread aggregation '" + std::string(name) + "'");
}

double quotation_spread(double poa, double lgs, double hoa) {
  return std::max({poa, lgs, hoa}) - std::min({poa, lgs, hoa});
}

SpreadSeries compute_spread(const Dataset& data, SpreadAggregation aggregation) {
  SpreadSeries out;
  out.aggregation = aggregation;
  for (std::size_t w = 0; w < data.size(); ++w) {
    const auto& row = data[w];
    std::array<double, kDayCount> day_spread{};
    for (auto d : kDays) {
      day_spread[static_cast<int>(d)] = quotation_spread(
          row.price(Series::poa, d), row.price(Series::lgs, d), row.price(Series::hoa, d));
    }
    if (aggregation == SpreadAggregation::weekly_mean) {
      out.week_index.push_back(w);
      out.labels.push_back(row.when.label());
      out.values.push_back(0.5 * (day_spread[0] + day_spread[1]));
    } else {
      for (auto d : kDays) {
        out.week_index.push_back(w);
        out.labels.push_back(row.when.label() + (d == QuoteDay::tuesday ? "-tue" : "-fri"));
        out.values.push_back(day_spread[static_cast<int>(d)]);
      }
    }
  }
  return out;
}

void write_features_csv(std::ostream& out, const FeatureSet& features) {
  out << "week";
  for (const auto& n : FeatureSet::raw_names()) out << ',' << n;
  for (const auto& n : features.input_names()) out << ",z_" << n;
  out << '\n';
  for (std::size_t i = 0; i < features.vectors.size(); ++i) {
    const auto& fv = features.vectors[i];
    out << features.weeks[i].label();
    for (double v : fv.raw()) out << ',' << format_double(v);
    for (double v : fv.standardized) out << ',' << format_double(v);
    out << '\n';
  }
}

void write_spread_csv(std::ostream& out, const SpreadSeries& spread) {
  out << "period,week_index,spread\n";
  for (std::size_t i = 0; i < spread.size(); ++i) {
    out << spread.labels[i] << ',' << spread.week_index[i] << ',' << format_double(spread.values[i])
        << '\n';
  }
}

}  // namespace regimes
