#include "regimes/changepoint.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "regimes/error.hpp"

namespace regimes {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTieTolerance = 1e-12;

double global_variance(std::span<const double> y) {
  if (y.empty()) return 0.0;
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double ss = 0.0;
  for (double v : y) ss += (v - mean) * (v - mean);
  return ss / static_cast<double>(y.size());
}

double variance_floor(std::span<const double> y, double ratio) {
  return std::max(ratio * global_variance(y), 1e-300);
}

// Welford accumulator for one growing segment.
struct Running {
  double n = 0.0;
  double mean = 0.0;
  double m2 = 0.0;

  void push(double x) {
    n += 1.0;
    const double d = x - mean;
    mean += d / n;
    m2 += d * (x - mean);
  }
};

double contrast_of(const Running& acc, ChangeMode mode, double floor) {
  if (mode == ChangeMode::mean_only) return acc.m2;
  return acc.n * std::log(std::max(acc.m2 / acc.n, floor));
}

void check_finite(std::span<const double> y) {
  for (std::size_t t = 0; t < y.size(); ++t) {
    if (!std::isfinite(y[t])) throw_data("non-finite series value at index " + std::to_string(t));
  }
}

}  // namespace

std::string_view change_mode_name(ChangeMode m) {
  return m == ChangeMode::mean_only ? "mean" : "mean_and_variance";
}

ChangeMode parse_change_mode(std::string_view name) {
  if (name == "mean" || name == "mean_only") return ChangeMode::mean_only;
  if (name == "mv" || name == "mean_and_variance") return ChangeMode::mean_and_variance;
  throw_usage("unknown change-point mode '" + std::string(name) + "'");
}

std::size_t ContrastOptions::effective_min_seg_len() const {
  if (min_seg_len > 0) {
    if (mode == ChangeMode::mean_and_variance && min_seg_len < 2) {
      throw_usage("mean_and_variance segments need at least 2 points");
    }
    return min_seg_len;
  }
  return mode == ChangeMode::mean_only ? 1 : 2;
}

double segment_cost(std::span<const double> series, std::size_t i, std::size_t j,
                    const ContrastOptions& options) {
  const std::size_t m = options.effective_min_seg_len();
  if (j > series.size() || i >= j || j - i < m) {
    throw_usage("segment [" + std::to_string(i) + ", " + std::to_string(j) +
                ") is shorter than the minimum length " + std::to_string(m) + " or out of range");
  }
  Running acc;
  for (std::size_t t = i; t < j; ++t) acc.push(series[t]);
  return contrast_of(acc, options.mode, variance_floor(series, options.variance_floor_ratio));
}

SegCostTable::SegCostTable(std::span<const double> series, const ContrastOptions& options)
    : n_(series.size()), min_len_(options.effective_min_seg_len()), mode_(options.mode) {
  check_finite(series);
  const double floor = variance_floor(series, options.variance_floor_ratio);
  costs_.assign(n_ * (n_ + 1) / 2, kInf);
  for (std::size_t i = 0; i < n_; ++i) {
    Running acc;
    for (std::size_t j = i + 1; j <= n_; ++j) {
      acc.push(series[j - 1]);
      if (j - i >= min_len_) costs_[index(i, j)] = contrast_of(acc, mode_, floor);
    }
  }
}

std::size_t SegCostTable::index(std::size_t i, std::size_t j) const {
  return i * n_ - i * (i - 1) / 2 + (j - i - 1);
}

double SegCostTable::operator()(std::size_t i, std::size_t j) const {
  if (i >= j || j > n_) return kInf;
  return costs_[index(i, j)];
}

SegmentationPath optimal_segmentations(const SegCostTable& costs, std::size_t k_max) {
  const std::size_t n = costs.size();
  const std::size_t m = costs.min_seg_len();
  if (k_max < 1 || k_max * m > n) {
    throw_usage("cannot split " + std::to_string(n) + " observations into " + std::to_string(k_max) +
                " segments of length >= " + std::to_string(m));
  }
  // best[k][i]: minimal contrast of y[i..n) cut into k + 1 segments;
  // next[k][i]: smallest end of the first of those segments.
  std::vector<std::vector<double>> best(k_max, std::vector<double>(n + 1, kInf));
  std::vector<std::vector<std::size_t>> next(k_max, std::vector<std::size_t>(n + 1, n));
  for (std::size_t i = 0; i + m <= n; ++i) best[0][i] = costs(i, n);
  for (std::size_t k = 1; k < k_max; ++k) {
    // k + 1 segments need (k + 1) * m points.
    for (std::size_t i = 0; i + (k + 1) * m <= n; ++i) {
      double b = kInf;
      std::size_t arg = n;
      for (std::size_t j = i + m; j + k * m <= n; ++j) {
        const double c = costs(i, j) + best[k - 1][j];
        // Candidates within rounding of the incumbent count as ties.
        if (arg == n || c < b - kTieTolerance * std::max(std::abs(b), std::abs(c))) {
          b = c;
          arg = j;
        }
      }
      best[k][i] = b;
      next[k][i] = arg;
    }
  }

  SegmentationPath path;
  path.mode = costs.mode();
  path.n = n;
  for (std::size_t k = 0; k < k_max; ++k) {
    path.contrast.push_back(best[k][0]);
    std::vector<std::size_t> tau;
    std::size_t pos = 0;
    for (std::size_t r = k; r > 0; --r) {
      pos = next[r][pos];
      tau.push_back(pos);
    }
    path.tau.push_back(std::move(tau));
  }
  return path;
}

Segmentation make_segmentation(std::span<const double> series, std::vector<std::size_t> tau,
                               const ContrastOptions& options) {
  Segmentation seg;
  seg.mode = options.mode;
  seg.tau = std::move(tau);
  std::size_t begin = 0;
  double total = 0.0;
  const double floor = variance_floor(series, options.variance_floor_ratio);
  for (std::size_t k = 0; k <= seg.tau.size(); ++k) {
    const std::size_t end = k < seg.tau.size() ? seg.tau[k] : series.size();
    if (end <= begin || end > series.size()) throw_usage("change-points must be increasing and inside the series");
    Running acc;
    for (std::size_t t = begin; t < end; ++t) acc.push(series[t]);
    seg.segments.push_back({begin, end, acc.mean, acc.m2 / acc.n});
    total += contrast_of(acc, options.mode, floor);
    begin = end;
  }
  seg.contrast = total;
  seg.penalty_used = std::numeric_limits<double>::quiet_NaN();
  return seg;
}

Segmentation optimal_segmentation_for_k(std::span<const double> series, std::size_t k,
                                        const ContrastOptions& options) {
  const std::size_t m = options.effective_min_seg_len();
  if (k < 1 || k * m > series.size()) {
    throw_usage("infeasible number of segments " + std::to_string(k) + " for " +
                std::to_string(series.size()) + " observations");
  }
  const SegCostTable table(series, options);
  auto path = optimal_segmentations(table, k);
  auto seg = make_segmentation(series, path.tau[k - 1], options);
  seg.contrast = path.contrast[k - 1];
  return seg;
}

SelectionDiagnostics select_num_segments(const SegmentationPath& path, const SelectionOptions& options) {
  SelectionDiagnostics diag;
  diag.contrast = path.contrast;
  const std::size_t k_max = path.contrast.size();
  diag.selected = 1;

  if (options.scheme == PenaltyScheme::fixed) {
    diag.rule = "fixed penalty";
    double best = kInf;
    for (std::size_t k = 1; k <= k_max; ++k) {
      const double v = path.contrast[k - 1] + options.beta * static_cast<double>(k);
      if (v < best) {
        best = v;
        diag.selected = k;
      }
    }
    return diag;
  }

  diag.rule = options.likelihood_guard ? "adaptive second difference + likelihood guard"
                                       : "adaptive second difference";
  const double j1 = path.contrast.front();
  const double log_n = std::log(static_cast<double>(std::max<std::size_t>(path.n, 2)));
  diag.guard_penalty_per_change = (path.mode == ChangeMode::mean_only ? 2.0 : 3.0) * log_n;
  for (double j : path.contrast) {
    double lr = 0.0;
    if (path.mode == ChangeMode::mean_only) {
      lr = j > 0.0 ? static_cast<double>(path.n) * std::log(j1 / j) : kInf;
      if (j1 <= 0.0) lr = 0.0;
    } else {
      lr = j1 - j;
    }
    diag.likelihood_ratio.push_back(lr);
  }
  if (k_max < 3) return diag;
  const double jmax = path.contrast.back();
  const double range = j1 - jmax;
  if (!(range > 0.0) || !std::isfinite(range)) return diag;
  const double scale = static_cast<double>(k_max - 1) / range;
  for (double j : path.contrast) diag.normalized.push_back((j - jmax) * scale + 1.0);
  for (std::size_t k = 2; k + 1 <= k_max; ++k) {
    const double d = diag.normalized[k - 2] - 2.0 * diag.normalized[k - 1] + diag.normalized[k];
    diag.second_difference.push_back(d);
    if (d <= options.threshold) continue;
    const bool passes = !options.likelihood_guard ||
                        diag.likelihood_ratio[k - 1] >
                            static_cast<double>(k - 1) * diag.guard_penalty_per_change;
    if (passes) diag.selected = k;
  }
  return diag;
}

SelectionDiagnostics select_num_segments(std::span<const double> series, std::size_t k_max,
                                         const ContrastOptions& contrast,
                                         const SelectionOptions& selection) {
  const SegCostTable table(series, contrast);
  return select_num_segments(optimal_segmentations(table, k_max), selection);
}

DetectionResult detect(std::span<const double> series, std::size_t k_max,
                       const ContrastOptions& contrast, const SelectionOptions& selection) {
  if (k_max < 1) throw_usage("k_max must be at least 1");
  if (series.empty()) throw_data("cannot segment an empty series");
  const SegCostTable table(series, contrast);
  const std::size_t feasible = series.size() / table.min_seg_len();
  const auto path = optimal_segmentations(table, std::min(k_max, feasible));
  DetectionResult out;
  out.diagnostics = select_num_segments(path, selection);
  const std::size_t k = out.diagnostics.selected;
  out.segmentation = make_segmentation(series, path.tau[k - 1], contrast);
  out.segmentation.contrast = path.contrast[k - 1];
  out.segmentation.penalty_used =
      selection.scheme == PenaltyScheme::adaptive ? selection.threshold : selection.beta;
  return out;
}

}  // namespace regimes
