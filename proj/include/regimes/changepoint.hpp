#pragma once

// Multiple change-point detection by exact dynamic programming over a
// Gaussian segment contrast, with the number of segments chosen from the
// shape of the optimal-contrast curve.

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace regimes {

enum class ChangeMode { mean_only, mean_and_variance };
std::string_view change_mode_name(ChangeMode m);
ChangeMode parse_change_mode(std::string_view name);

struct ContrastOptions {
  ChangeMode mode = ChangeMode::mean_only;
  /// 0 selects the mode default: 1 for mean_only, 2 for mean_and_variance.
  std::size_t min_seg_len = 0;
  /// Variance floor as a fraction of the whole-series variance.
  double variance_floor_ratio = 1e-12;

  std::size_t effective_min_seg_len() const;
};

/// Contrast of y[i..j) as one segment:
///   mean_only          sum of squared deviations from the segment mean
///   mean_and_variance  (j - i) * log(max(biased variance, floor))
/// floor is variance_floor_ratio times the variance of `series`.
double segment_cost(std::span<const double> series, std::size_t i, std::size_t j,
                    const ContrastOptions& options);

/// cost(i, j) for every 0 <= i < j <= T with j - i >= min_seg_len.
class SegCostTable {
 public:
  SegCostTable(std::span<const double> series, const ContrastOptions& options);

  double operator()(std::size_t i, std::size_t j) const;
  std::size_t size() const { return n_; }
  std::size_t min_seg_len() const { return min_len_; }
  ChangeMode mode() const { return mode_; }

 private:
  std::size_t index(std::size_t i, std::size_t j) const;

  std::size_t n_;
  std::size_t min_len_;
  ChangeMode mode_;
  std::vector<double> costs_;
};

struct Segment {
  std::size_t begin;  // first index, 0-based
  std::size_t end;    // one past the last index
  double mean;
  /// 1x1 covariance of the (univariate) segment, biased estimator.
  double variance;
};

struct Segmentation {
  ChangeMode mode = ChangeMode::mean_only;
  /// Change-points tau_1 < ... < tau_{K-1}: counts of observations before each
  /// break, so segment k covers (tau_{k-1}, tau_k] in 1-based terms.
  std::vector<std::size_t> tau;
  std::vector<Segment> segments;
  double contrast = 0.0;
  /// Threshold of the adaptive rule, or the per-segment penalty of the fixed
  /// rule; unset (NaN) when the number of segments was given.
  double penalty_used = 0.0;

  std::size_t n_segments() const { return segments.size(); }
};

/// Optimal contrast for K = 1..k_max in one dynamic-programming pass, with the
/// lexicographically earliest optimal change-points for each K. Totals equal
/// to within a relative 1e-12 are treated as ties.
struct SegmentationPath {
  ChangeMode mode = ChangeMode::mean_only;
  std::size_t n = 0;
  std::vector<double> contrast;                     // index K - 1
  std::vector<std::vector<std::size_t>> tau;        // index K - 1
};

SegmentationPath optimal_segmentations(const SegCostTable& costs, std::size_t k_max);

/// Exact minimiser of the total contrast over segmentations into K segments.
/// Ties go to the earliest change-points.
Segmentation optimal_segmentation_for_k(std::span<const double> series, std::size_t k,
                                        const ContrastOptions& options = {});

enum class PenaltyScheme { adaptive, fixed };

struct SelectionOptions {
  PenaltyScheme scheme = PenaltyScheme::adaptive;
  /// Second-difference threshold of the adaptive rule.
  double threshold = 0.75;
  /// Per-segment penalty of the fixed rule: minimise J_K + beta * K.
  double beta = 0.0;
  /// Adaptive rule only: a candidate K must also beat the single-segment
  /// model in a likelihood-ratio comparison penalised by
  /// (K - 1) * params_per_change * log T.
  bool likelihood_guard = true;
};

struct SelectionDiagnostics {
  std::vector<double> contrast;    // J_K, K = 1..k_max
  std::vector<double> normalized;  // rescaled so J~_1 = k_max and J~_{k_max} = 1
  std::vector<double> second_difference;  // D_K for K = 2..k_max-1 (index K - 2)
  /// -2 log likelihood ratio of K segments against one (index K - 1).
  std::vector<double> likelihood_ratio;
  double guard_penalty_per_change = 0.0;
  std::size_t selected = 1;
  std::string rule;
};

/// Adaptive rule: K* is the largest K in [2, k_max - 1] with
///   D_K = J~_{K-1} - 2 J~_K + J~_{K+1} > threshold
/// that also passes the likelihood guard (when enabled), and 1 when there is
/// none. The guard statistic is T log(J_1 / J_K) for mean_only and J_1 - J_K
/// for mean_and_variance; one change costs 2 (resp. 3) log T.
SelectionDiagnostics select_num_segments(const SegmentationPath& path,
                                         const SelectionOptions& options = {});
SelectionDiagnostics select_num_segments(std::span<const double> series, std::size_t k_max,
                                         const ContrastOptions& contrast = {},
                                         const SelectionOptions& selection = {});

struct DetectionResult {
  Segmentation segmentation;
  SelectionDiagnostics diagnostics;
};

/// Cost table, per-K dynamic programme and selection; k_max is clipped to
/// the largest feasible number of segments.
DetectionResult detect(std::span<const double> series, std::size_t k_max,
                       const ContrastOptions& contrast = {}, const SelectionOptions& selection = {});

/// Fills per-segment estimates and the total contrast for given change-points.
Segmentation make_segmentation(std::span<const double> series, std::vector<std::size_t> tau,
                               const ContrastOptions& options);

}  // namespace regimes
