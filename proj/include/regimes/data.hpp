#pragma once

// Ingestion of twice-weekly quotation tables, missing-value imputation,
// SOM feature construction and the weekly spread indicator.

#include <array>
#include <compare>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace regimes {

/// Quoted series. The first three are gold-silver prices (Paris, London,
/// Hamburg); the last three are exchange rates.
enum class Series : int { poa = 0, lgs, hoa, lpv, hlv, phv };
enum class QuoteDay : int { tuesday = 0, friday = 1 };

inline constexpr std::size_t kSeriesCount = 6;
inline constexpr std::size_t kDayCount = 2;
inline constexpr std::size_t kBaseDimension = kSeriesCount * kDayCount;
inline constexpr std::array<std::string_view, kSeriesCount> kSeriesNames{
    "poa", "lgs", "hoa", "lpv", "hlv", "phv"};

std::string_view series_name(Series s);
std::string_view day_name(QuoteDay d);
/// Column name used in delimited files, e.g. "poa_t" or "hlv_f".
std::string column_name(Series s, QuoteDay d);

struct WeekRef {
  int year = 0;
  int week = 0;

  friend auto operator<=>(const WeekRef&, const WeekRef&) = default;
  /// "1821-W07"
  std::string label() const;
};

struct QuotationWeek {
  WeekRef when;
  std::array<std::array<std::optional<double>, kDayCount>, kSeriesCount> values{};

  const std::optional<double>& at(Series s, QuoteDay d) const {
    return values[static_cast<int>(s)][static_cast<int>(d)];
  }
  std::optional<double>& at(Series s, QuoteDay d) {
    return values[static_cast<int>(s)][static_cast<int>(d)];
  }
  /// Value of a complete week; throws if the cell is missing.
  double price(Series s, QuoteDay d) const;
  bool complete() const;
};

using Dataset = std::vector<QuotationWeek>;

/// Parses the comma-separated table (header naming year, week and the twelve
/// <series>_<t|f> columns in any order). Empty cells are missing values.
Dataset parse_dataset(std::istream& in);
Dataset parse_dataset_file(const std::string& path);

/// Writes the table in canonical column order with round-trip number
/// formatting.
void write_dataset(std::ostream& out, const Dataset& data);

/// Checks positivity and strictly increasing, unique (year, week) keys.
void validate_dataset(const Dataset& data);

// ---------------------------------------------------------------------------
// Imputation

struct ImputationPolicy {
  int max_gap = 4;
};

enum class ImputeMethod { interpolate, backfill, forwardfill };
std::string_view impute_method_name(ImputeMethod m);

struct ImputedCell {
  Series series;
  QuoteDay day;
  WeekRef week;
  double value;
  ImputeMethod method;
};

struct ImputationReport {
  std::vector<ImputedCell> cells;
};

struct ImputationResult {
  Dataset data;
  ImputationReport report;
};

/// Fills every missing cell. Each (series, day) column is treated as its own
/// weekly sequence: interior gaps are linearly interpolated, leading gaps are
/// back-filled and trailing gaps forward-filled. A run of more than max_gap
/// consecutive missing weeks is an error.
ImputationResult impute_missing(const Dataset& data, const ImputationPolicy& policy = {});

// ---------------------------------------------------------------------------
// Features

enum class HplForm { difference, ratio };

struct FeatureOptions {
  bool include_hpl = true;
  HplForm hpl = HplForm::difference;
};

struct Standardization {
  std::vector<double> mean;
  std::vector<double> stddev;
};

struct FeatureVector {
  std::size_t week_ref = 0;
  /// Six series x two days, ordered poa_t, poa_f, lgs_t, ..., phv_f.
  std::array<double, kBaseDimension> base{};
  /// Hamburg against the Paris/London average, one per quotation day.
  std::array<double, kDayCount> hpl{};
  /// z-scored SOM input: base, then hpl when enabled.
  std::vector<double> standardized;

  /// base followed by hpl, unstandardized.
  std::vector<double> raw() const;
};

struct FeatureSet {
  std::vector<FeatureVector> vectors;
  std::vector<WeekRef> weeks;
  Standardization stats;
  FeatureOptions options;

  std::size_t dimension() const { return stats.mean.size(); }
  /// Names of the standardized coordinates.
  std::vector<std::string> input_names() const;
  /// Names of raw() coordinates (always fourteen).
  static std::vector<std::string> raw_names();
};

double hpl_value(double hoa, double poa, double lgs, HplForm form);

/// Requires a complete dataset. Standardization is global over all weeks,
/// using the population standard deviation.
FeatureSet build_features(const Dataset& data, const FeatureOptions& options = {});

// ---------------------------------------------------------------------------
// Spread

enum class SpreadAggregation { weekly_mean, per_quotation };
std::string_view aggregation_name(SpreadAggregation a);
SpreadAggregation parse_aggregation(std::string_view name);

struct SpreadSeries {
  SpreadAggregation aggregation = SpreadAggregation::weekly_mean;
  /// Dataset row each value belongs to.
  std::vector<std::size_t> week_index;
  /// Human-readable period labels ("1821-W07", or "1821-W07-tue").
  std::vector<std::string> labels;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
};

/// max - min of the three gold-silver prices.
double quotation_spread(double poa, double lgs, double hoa);

SpreadSeries compute_spread(const Dataset& data,
                            SpreadAggregation aggregation = SpreadAggregation::weekly_mean);

// Delimited output used by the pipeline.
void write_features_csv(std::ostream& out, const FeatureSet& features);
void write_spread_csv(std::ostream& out, const SpreadSeries& spread);

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

}  // namespace regimes
