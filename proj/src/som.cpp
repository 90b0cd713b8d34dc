#include "regimes/som.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "regimes/error.hpp"

namespace regimes {

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void check_data(const Observations& data) {
  if (data.empty()) throw_data("SOM training requires at least one observation");
  const std::size_t dim = data.front().size();
  if (dim == 0) throw_data("SOM feature dimension must be at least 1");
  for (const auto& x : data) {
    if (x.size() != dim) throw_data("inconsistent feature dimension in SOM input");
  }
}

}  // namespace

double SomGrid::grid_distance(std::size_t a, std::size_t b) const {
  const double dr = static_cast<double>(a / cols) - static_cast<double>(b / cols);
  const double dc = static_cast<double>(a % cols) - static_cast<double>(b % cols);
  return std::sqrt(dr * dr + dc * dc);
}

SomGrid init_som(const Observations& data, std::size_t rows, std::size_t cols,
                 const SomSchedule& schedule, std::uint64_t seed) {
  check_data(data);
  if (rows == 0 || cols == 0) throw_usage("SOM grid must have at least one row and column");
  SomGrid grid;
  grid.rows = rows;
  grid.cols = cols;
  grid.dimension = data.front().size();
  grid.seed = seed;
  grid.schedule = schedule;
  if (grid.schedule.radius_start <= 0.0) {
    grid.schedule.radius_start = static_cast<double>(std::max(rows, cols)) / 2.0;
  }

  std::mt19937_64 rng(seed);
  const std::size_t nodes = grid.node_count();
  std::vector<std::size_t> picks;
  if (data.size() >= nodes) {
    std::vector<std::size_t> idx(data.size());
    std::iota(idx.begin(), idx.end(), 0);
    // Partial Fisher-Yates.
    for (std::size_t i = 0; i < nodes; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    picks.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(nodes));
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
    for (std::size_t i = 0; i < nodes; ++i) picks.push_back(pick(rng));
  }
  grid.code_vectors.reserve(nodes * grid.dimension);
  for (auto p : picks) {
    grid.code_vectors.insert(grid.code_vectors.end(), data[p].begin(), data[p].end());
  }
  return grid;
}

SomGrid train_som(const Observations& data, std::size_t rows, std::size_t cols,
                  const SomSchedule& schedule, std::uint64_t seed) {
  SomGrid grid = init_som(data, rows, cols, schedule, seed);
  const auto& sch = grid.schedule;
  if (sch.learning_rate_start <= 0.0 || sch.learning_rate_end <= 0.0 ||
      sch.learning_rate_start > 1.0 || sch.learning_rate_end > 1.0) {
    throw_usage("SOM learning rates must lie in (0, 1]");
  }
  if (sch.radius_end <= 0.0) throw_usage("SOM final radius must be positive");

  // Distinct stream from the initialisation draws.
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  const std::size_t n = data.size();
  const std::size_t nodes = grid.node_count();
  const std::size_t total = sch.epochs * n;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  // Grid distances are fixed; precompute them squared.
  std::vector<double> grid_d2(nodes * nodes);
  for (std::size_t a = 0; a < nodes; ++a) {
    for (std::size_t b = 0; b < nodes; ++b) {
      const double d = grid.grid_distance(a, b);
      grid_d2[a * nodes + b] = d * d;
    }
  }

  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < sch.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (auto idx : order) {
      const double frac = total > 1 ? static_cast<double>(step) / static_cast<double>(total - 1) : 1.0;
      const double lr = sch.learning_rate_start + frac * (sch.learning_rate_end - sch.learning_rate_start);
      const double radius = sch.radius_start + frac * (sch.radius_end - sch.radius_start);
      const double inv_two_r2 = 1.0 / (2.0 * radius * radius);
      const auto& x = data[idx];
      const std::size_t bmu = best_matching_unit(grid, x);
      for (std::size_t node = 0; node < nodes; ++node) {
        const double h = std::exp(-grid_d2[bmu * nodes + node] * inv_two_r2);
        const double rate = lr * h;
        if (rate < 1e-300) continue;
        auto w = grid.code(node);
        for (std::size_t c = 0; c < grid.dimension; ++c) w[c] += rate * (x[c] - w[c]);
      }
      ++step;
    }
    ++grid.trained_epochs;
  }
  return grid;
}

std::size_t best_matching_unit(const SomGrid& grid, std::span<const double> v) {
  if (v.size() != grid.dimension) {
    throw_usage("vector dimension " + std::to_string(v.size()) + " does not match SOM dimension " +
                std::to_string(grid.dimension));
  }
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t node = 0; node < grid.node_count(); ++node) {
    const double d = squared_distance(grid.code(node), v);
    if (d < best_d) {
      best_d = d;
      best = node;
    }
  }
  return best;
}

double quantization_error(const SomGrid& grid, const Observations& data) {
  if (data.empty()) return 0.0;
  double total = 0.0;
  for (const auto& x : data) total += squared_distance(grid.code(best_matching_unit(grid, x)), x);
  return total / static_cast<double>(data.size());
}

std::vector<LinkageStep> ward_linkage(const Observations& points) {
  const std::size_t n = points.size();
  std::vector<LinkageStep> steps;
  if (n < 2) return steps;
  const std::size_t dim = points.front().size();

  struct Cluster {
    std::size_t id;
    std::size_t size;
    std::vector<double> centroid;
  };
  std::vector<Cluster> active;
  for (std::size_t i = 0; i < n; ++i) active.push_back({i, 1, points[i]});

  while (active.size() > 1) {
    std::size_t best_a = 0;
    std::size_t best_b = 1;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < active.size(); ++a) {
      for (std::size_t b = a + 1; b < active.size(); ++b) {
        const double na = static_cast<double>(active[a].size);
        const double nb = static_cast<double>(active[b].size);
        const double cost =
            na * nb / (na + nb) * squared_distance(active[a].centroid, active[b].centroid);
        if (cost < best) {
          best = cost;
          best_a = a;
          best_b = b;
        }
      }
    }
    Cluster& ca = active[best_a];
    Cluster& cb = active[best_b];
    Cluster merged{n + steps.size(), ca.size + cb.size, std::vector<double>(dim)};
    for (std::size_t c = 0; c < dim; ++c) {
      merged.centroid[c] = (static_cast<double>(ca.size) * ca.centroid[c] +
                            static_cast<double>(cb.size) * cb.centroid[c]) /
                           static_cast<double>(merged.size);
    }
    steps.push_back({std::min(ca.id, cb.id), std::max(ca.id, cb.id), best, merged.size});
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(best_b));
    active[best_a] = std::move(merged);
  }
  return steps;
}

std::vector<int> cut_linkage(const std::vector<LinkageStep>& linkage, std::size_t n, std::size_t k) {
  if (k < 1 || k > n) {
    throw_usage("number of classes " + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
  }
  // Union-find over node ids plus merged-cluster ids.
  std::vector<std::size_t> parent(2 * n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  for (std::size_t s = 0; s < n - k; ++s) {
    const auto& step = linkage[s];
    parent[find(step.left)] = n + s;
    parent[find(step.right)] = n + s;
  }
  std::vector<int> labels(n, 0);
  std::vector<std::pair<std::size_t, int>> seen;
  int next = 1;
  for (std::size_t i = 0; i < n; ++i) {
    const auto root = find(i);
    auto it = std::find_if(seen.begin(), seen.end(), [&](const auto& p) { return p.first == root; });
    if (it == seen.end()) {
      seen.emplace_back(root, next);
      labels[i] = next++;
    } else {
      labels[i] = it->second;
    }
  }
  return labels;
}

MacroClassification hac_macro_classes(const SomGrid& grid, std::size_t k) {
  const std::size_t nodes = grid.node_count();
  if (k < 1 || k > nodes) {
    throw_usage("number of classes " + std::to_string(k) + " outside [1, " + std::to_string(nodes) +
                "]");
  }
  Observations codes;
  codes.reserve(nodes);
  for (std::size_t node = 0; node < nodes; ++node) {
    const auto c = grid.code(node);
    codes.emplace_back(c.begin(), c.end());
  }
  MacroClassification mc;
  mc.k = k;
  mc.linkage = ward_linkage(codes);
  mc.node_to_class = cut_linkage(mc.linkage, nodes, k);
  return mc;
}

MacroClassification periodize(const Observations& standardized, const Observations& raw_values,
                              const SomGrid& grid, const MacroClassification& classes) {
  if (classes.node_to_class.size() != grid.node_count()) {
    throw_usage("classification does not match the SOM grid");
  }
  if (!raw_values.empty() && raw_values.size() != standardized.size()) {
    throw_usage("raw values and features have different lengths");
  }
  MacroClassification mc = classes;
  const std::size_t n = standardized.size();
  mc.week_to_class.assign(n, 0);
  mc.week_to_node.assign(n, 0);
  mc.class_sizes.assign(mc.k, 0);
  for (std::size_t w = 0; w < n; ++w) {
    const auto node = best_matching_unit(grid, standardized[w]);
    mc.week_to_node[w] = node;
    mc.week_to_class[w] = mc.node_to_class[node];
    ++mc.class_sizes[static_cast<std::size_t>(mc.week_to_class[w] - 1)];
  }

  mc.class_means.assign(mc.k, {});
  if (!raw_values.empty()) {
    const std::size_t dim = raw_values.front().size();
    for (std::size_t c = 0; c < mc.k; ++c) {
      if (mc.class_sizes[c] > 0) mc.class_means[c].assign(dim, 0.0);
    }
    for (std::size_t w = 0; w < n; ++w) {
      auto& m = mc.class_means[static_cast<std::size_t>(mc.week_to_class[w] - 1)];
      for (std::size_t d = 0; d < dim; ++d) m[d] += raw_values[w][d];
    }
    for (std::size_t c = 0; c < mc.k; ++c) {
      for (auto& v : mc.class_means[c]) v /= static_cast<double>(mc.class_sizes[c]);
    }
  }

  mc.intervals.clear();
  for (std::size_t w = 0; w < n; ++w) {
    if (w == 0 || mc.week_to_class[w] != mc.week_to_class[w - 1]) {
      mc.intervals.push_back({w, w, mc.week_to_class[w]});
    } else {
      mc.intervals.back().last = w;
    }
  }
  return mc;
}

}  // namespace regimes
