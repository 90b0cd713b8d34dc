#pragma once

// Kohonen self-organizing map on a rectangular grid, Ward reduction of its
// code vectors to macro-classes, and the resulting week periodization.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace regimes {

/// Linear decay of the learning rate and of the Gaussian neighbourhood
/// radius over all online updates.
struct SomSchedule {
  std::size_t epochs = 100;
  double learning_rate_start = 0.5;
  double learning_rate_end = 0.01;
  /// Non-positive means max(rows, cols) / 2.
  double radius_start = 0.0;
  double radius_end = 0.5;
};

struct SomGrid {
  std::size_t rows = 5;
  std::size_t cols = 5;
  std::size_t dimension = 0;
  /// Node-major: node n occupies [n * dimension, (n + 1) * dimension).
  std::vector<double> code_vectors;
  std::size_t trained_epochs = 0;
  std::uint64_t seed = 0;
  SomSchedule schedule;

  std::size_t node_count() const { return rows * cols; }
  std::span<const double> code(std::size_t node) const {
    return {code_vectors.data() + node * dimension, dimension};
  }
  std::span<double> code(std::size_t node) {
    return {code_vectors.data() + node * dimension, dimension};
  }
  /// Euclidean distance between node positions on the grid.
  double grid_distance(std::size_t a, std::size_t b) const;
};

using Observations = std::vector<std::vector<double>>;

/// Seeds code vectors with observations drawn from the data (without
/// replacement when there are at least as many observations as nodes).
SomGrid init_som(const Observations& data, std::size_t rows, std::size_t cols,
                 const SomSchedule& schedule, std::uint64_t seed);

/// init_som followed by schedule.epochs shuffled passes of the online rule
/// w += lr * h(grid distance) * (x - w).
SomGrid train_som(const Observations& data, std::size_t rows, std::size_t cols,
                  const SomSchedule& schedule, std::uint64_t seed);

/// Nearest code vector in squared Euclidean distance, lowest index on ties.
std::size_t best_matching_unit(const SomGrid& grid, std::span<const double> v);

/// Mean squared distance of each observation to its best-matching unit.
double quantization_error(const SomGrid& grid, const Observations& data);

struct LinkageStep {
  /// Cluster ids: 0..n-1 are nodes, n + s is the cluster formed at step s.
  std::size_t left;
  std::size_t right;
  double height;
  std::size_t size;
};

struct Interval {
  std::size_t first;
  std::size_t last;
  int class_id;
};

struct MacroClassification {
  std::size_t k = 0;
  /// Class ids are 1..k, numbered by first appearance in node order.
  std::vector<int> node_to_class;
  std::vector<LinkageStep> linkage;
  std::vector<int> week_to_class;
  std::vector<std::size_t> week_to_node;
  /// Per class, mean of each raw variable; empty for classes with no weeks.
  std::vector<std::vector<double>> class_means;
  std::vector<std::size_t> class_sizes;
  std::vector<Interval> intervals;
};

/// Full Ward agglomeration of a point set. Heights are the increase in
/// within-cluster sum of squares of each merge.
std::vector<LinkageStep> ward_linkage(const Observations& points);

/// Cuts a linkage at k clusters; ids by first appearance.
std::vector<int> cut_linkage(const std::vector<LinkageStep>& linkage, std::size_t n,
                             std::size_t k);

/// Ward clustering of the code vectors, cut at k classes.
MacroClassification hac_macro_classes(const SomGrid& grid, std::size_t k);

/// Maps each observation to the class of its best-matching unit, computes
/// class means of raw_values and the run-length intervals of the class
/// sequence. raw_values may be empty, in which case no means are produced.
MacroClassification periodize(const Observations& standardized, const Observations& raw_values,
                              const SomGrid& grid, const MacroClassification& classes);

}  // namespace regimes
