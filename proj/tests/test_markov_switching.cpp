#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "regimes/data.hpp"
#include "regimes/error.hpp"
#include "regimes/markov_switching.hpp"
#include "regimes/som.hpp"

using namespace regimes;

namespace {

double row_sum(const Eigen::MatrixXd& m, Eigen::Index r) { return m.row(r).sum(); }

MsParams well_separated() {
  return linear_two_regime(0.844298, 0.746643, {1.0, 0.3}, {-1.0, 0.5}, 0.3, 1.0);
}

}  // namespace

TEST(Stationary, KnownValues) {
  const auto half = stationary_distribution(transition_from_pq(0.5, 0.5));
  EXPECT_NEAR(half[0], 0.5, 1e-15);
  const auto paper = stationary_distribution(transition_from_pq(0.844298, 0.746643));
  EXPECT_NEAR(paper[0], 0.6194, 1e-4);
  EXPECT_NEAR(paper[0], (1 - 0.746643) / ((1 - 0.844298) + (1 - 0.746643)), 1e-12);
  EXPECT_THROW(stationary_distribution(transition_from_pq(1.0, 1.0)), Error);
}

TEST(Stationary, InvariantForRandomChains) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  for (int i = 0; i < 200; ++i) {
    const auto a = transition_from_pq(u(rng), u(rng));
    const auto pi = stationary_distribution(a);
    const Eigen::Vector2d v(pi[0], pi[1]);
    EXPECT_NEAR((a * v - v).norm(), 0.0, 1e-12);
    EXPECT_NEAR(pi[0] + pi[1], 1.0, 1e-12);
  }
  // Three regimes through the general solver.
  Eigen::MatrixXd a(3, 3);
  a << 0.8, 0.1, 0.2, 0.15, 0.7, 0.3, 0.05, 0.2, 0.5;
  const auto pi = stationary_distribution(a);
  const Eigen::Vector3d v(pi[0], pi[1], pi[2]);
  EXPECT_NEAR((a * v - v).norm(), 0.0, 1e-12);
}

TEST(Simulate, AbsorbingChain) {
  auto p = linear_two_regime(1.0, 1.0, {0.0, 0.5}, {1.0, 0.1}, 1.0, 1.0);
  SimulateOptions o;
  o.allow_degenerate = true;
  o.start_state = 0;
  const auto s = simulate(p, 200, o);
  for (auto x : s.states) EXPECT_EQ(x, 0u);
  EXPECT_THROW(simulate(p, 10, {}), Error);
}

TEST(Simulate, NoiselessRecursion) {
  auto p = linear_two_regime(0.7, 0.6, {0.5, 0.8}, {-0.2, 0.3}, 0.0, 0.0);
  SimulateOptions o;
  o.allow_degenerate = true;
  o.initial_lags = {2.0};
  o.seed = 3;
  const auto s = simulate(p, 50, o);
  double prev = 2.0;
  for (std::size_t t = 0; t < 50; ++t) {
    const auto& f = p.means[s.states[t]];
    EXPECT_DOUBLE_EQ(s.series[t], f.params[0] + f.params[1] * prev);
    prev = s.series[t];
  }
}

TEST(Simulate, TransitionFrequencies) {
  const auto p = well_separated();
  SimulateOptions o;
  o.seed = 8;
  const auto s = simulate(p, 100000, o);
  double stay0 = 0, from0 = 0, stay1 = 0, from1 = 0;
  for (std::size_t t = 1; t < s.states.size(); ++t) {
    if (s.states[t - 1] == 0) {
      ++from0;
      stay0 += s.states[t] == 0;
    } else {
      ++from1;
      stay1 += s.states[t] == 1;
    }
  }
  EXPECT_NEAR(stay0 / from0, p.p(), 0.01);
  EXPECT_NEAR(stay1 / from1, p.q(), 0.01);
}

TEST(Simulate, Deterministic) {
  SimulateOptions o;
  o.seed = 12;
  o.burn_in = 10;
  EXPECT_EQ(simulate(well_separated(), 300, o).series, simulate(well_separated(), 300, o).series);
}

TEST(Filter, IdenticalRegimesCarryNoInformation) {
  auto p = linear_two_regime(0.9, 0.6, {0.1, 0.4}, {0.1, 0.4}, 0.7, 0.7);
  const auto y = simulate(p, 60, {}).series;
  const auto r = regime_probabilities(p, y);
  const auto pi = stationary_distribution(p.transition);
  for (Eigen::Index t = 1; t < r.filtered.rows(); ++t) {
    EXPECT_NEAR(r.filtered(t, 0), r.predicted(t, 0), 1e-12);
    EXPECT_NEAR(r.filtered(t, 0), pi[0], 1e-12);
    EXPECT_NEAR(r.smoothed(t, 0), pi[0], 1e-12);
  }
}

TEST(Filter, SingleUsableStepByHand) {
  auto p = linear_two_regime(0.8, 0.7, {0.0, 0.5}, {1.0, -0.2}, 0.5, 1.5);
  const std::vector<double> y{0.4, 0.9};
  const auto r = hamilton_filter(p, y);
  const auto pi = stationary_distribution(p.transition);
  const double d1 = pi[0] * std::exp(oracle::log_normal_pdf(0.9, 0.2, 0.5));
  const double d2 = pi[1] * std::exp(oracle::log_normal_pdf(0.9, 1.0 - 0.08, 1.5));
  EXPECT_NEAR(r.filtered(1, 0), d1 / (d1 + d2), 1e-12);
  EXPECT_NEAR(r.loglik, std::log(d1 + d2), 1e-12);
  // The conditioning row holds the stationary distribution.
  EXPECT_NEAR(r.filtered(0, 0), pi[0], 1e-15);
}

TEST(Filter, MatchesPathEnumeration) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t lag = 1 + trial % 2;
    const auto p = oracle::random_linear_params(rng, lag);
    SimulateOptions o;
    o.seed = static_cast<std::uint64_t>(trial) + 1;
    const auto y = simulate(p, lag + 1 + static_cast<std::size_t>(trial % 10), o).series;
    const auto r = regime_probabilities(p, y);
    const auto brute = oracle::enumerate_paths(p, y);
    EXPECT_NEAR(r.loglik, brute.loglik, 1e-8);
    for (std::size_t s = 0; s < brute.posterior.size(); ++s) {
      EXPECT_NEAR(r.smoothed(static_cast<Eigen::Index>(s + lag), 0), brute.posterior[s][0], 1e-9);
    }
    const auto last = r.filtered.rows() - 1;
    EXPECT_NEAR(r.smoothed(last, 0), r.filtered(last, 0), 1e-12);
  }
}

TEST(Filter, Errors) {
  const auto p = well_separated();
  const std::vector<double> bad{0.1, std::nan(""), 0.3};
  EXPECT_THROW(hamilton_filter(p, bad), Error);
  const std::vector<double> short_series{0.1};
  EXPECT_THROW(hamilton_filter(p, short_series), Error);
  auto tiny = p;
  tiny.sigma[1] = 1e-200;
  try {
    hamilton_filter(tiny, std::vector<double>{0.1, 0.2, 0.3});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::numerical);
    EXPECT_NE(std::string(e.what()).find("regime 2"), std::string::npos);
  }
}

TEST(Filter, LabelSwitchingSymmetry) {
  const auto p = well_separated();
  const auto y = simulate(p, 200, {}).series;
  const std::vector<std::size_t> swap{1, 0};
  const auto q = permute_regimes(p, swap);
  const auto a = regime_probabilities(p, y);
  const auto b = regime_probabilities(q, y);
  EXPECT_NEAR(a.loglik, b.loglik, 1e-9);
  for (Eigen::Index t = 0; t < a.smoothed.rows(); ++t) EXPECT_NEAR(a.smoothed(t, 0), b.smoothed(t, 1), 1e-9);
}

TEST(Filter, RowsAreDistributions) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = oracle::random_linear_params(rng);
    SimulateOptions o;
    o.seed = static_cast<std::uint64_t>(trial);
    const auto r = regime_probabilities(p, simulate(p, 100, o).series);
    for (Eigen::Index t = 0; t < r.filtered.rows(); ++t) {
      EXPECT_NEAR(row_sum(r.filtered, t), 1.0, 1e-9);
      EXPECT_NEAR(row_sum(r.smoothed, t), 1.0, 1e-9);
      EXPECT_GE(r.smoothed.row(t).minCoeff(), 0.0);
      EXPECT_LE(r.smoothed.row(t).maxCoeff(), 1.0);
    }
  }
}

TEST(Mlp, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> y(40);
  for (auto& v : y) v = g(rng);
  const LagDesign d(y, 2);
  std::vector<double> w(d.rows());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& v : w) v = u(rng);
  auto f = RegimeMean::mlp(2, 3);
  randomize_mlp(f, y, rng);
  for (auto& p : f.params) p += 0.5 * g(rng);
  const auto an = weighted_loss_gradient(f, d, w);
  const auto fd = oracle::finite_difference_gradient(f, d, w);
  for (std::size_t i = 0; i < an.size(); ++i) {
    EXPECT_NEAR(an[i], fd[i], 1e-5 * std::max(1.0, std::abs(fd[i])));
  }
}

TEST(Mlp, FitNeverIncreasesLoss) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> y(80);
  y[0] = 0.0;
  for (std::size_t t = 1; t < y.size(); ++t) y[t] = std::tanh(2.0 * y[t - 1]) + 0.3 * g(rng);
  const LagDesign d(y, 1);
  const std::vector<double> w(d.rows(), 1.0);
  auto f = RegimeMean::mlp(1, 3);
  randomize_mlp(f, y, rng);
  const double before = weighted_loss(f, d, w);
  const double after = fit_mlp_weighted(f, d, w, 200);
  EXPECT_LE(after, before);
  EXPECT_NEAR(after, weighted_loss(f, d, w), 1e-15);
}

TEST(Linear, WeightedLeastSquaresIsExact) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> y(60);
  for (auto& v : y) v = g(rng);
  const LagDesign d(y, 2);
  std::vector<double> w(d.rows());
  for (auto& v : w) v = std::abs(g(rng));
  auto f = RegimeMean::linear({0.0, 0.0, 0.0});
  fit_linear_weighted(f, d, w);
  // Stationarity of the loss: the gradient vanishes at the optimum.
  for (double gi : weighted_loss_gradient(f, d, w)) EXPECT_NEAR(gi, 0.0, 1e-10);
}

TEST(Em, TraceIsMonotone) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SimulateOptions o;
    o.seed = seed;
    const auto y = simulate(well_separated(), 400, o).series;
    EmOptions opts;
    opts.n_restarts = 2;
    opts.seed = seed;
    const auto r = em_fit(MsSpec::all_linear(), y, opts);
    for (std::size_t i = 1; i < r.trace.size(); ++i) EXPECT_GE(r.trace[i], r.trace[i - 1] - 1e-8);
  }
}

TEST(Em, StartAtTruthIsNearFixedPoint) {
  SimulateOptions o;
  o.seed = 21;
  const auto p = well_separated();
  const auto y = simulate(p, 1000, o).series;
  EmOptions opts;
  opts.init = p;
  const auto r = em_fit(MsSpec::all_linear(), y, opts);
  ASSERT_GE(r.trace.size(), 2u);
  for (std::size_t i = 1; i < r.trace.size(); ++i) EXPECT_GE(r.trace[i], r.trace[i - 1] - 1e-8);
  EXPECT_LT(r.trace[1] - r.trace[0], 0.01 * static_cast<double>(y.size()));
  EXPECT_NEAR(r.params.p(), p.p(), 0.05);
}

TEST(Em, RecoversSimulatedParameters) {
  SimulateOptions o;
  o.seed = 3;
  o.burn_in = 100;
  const auto p = well_separated();
  const auto sim = simulate(p, 2000, o);
  EmOptions opts;
  opts.n_restarts = 4;
  const auto r = em_fit(MsSpec::all_linear(), sim.series, opts);
  // Canonical labels put the more persistent regime first, as in the truth.
  EXPECT_NEAR(r.params.p(), p.p(), 0.05);
  EXPECT_NEAR(r.params.q(), p.q(), 0.05);
  EXPECT_NEAR(r.params.sigma[0], 0.3, 0.03);
  EXPECT_NEAR(r.params.sigma[1], 1.0, 0.1);
  std::size_t hits = 0;
  for (std::size_t t = 0; t < sim.states.size(); ++t) {
    hits += (r.probs.smoothed(static_cast<Eigen::Index>(t), 0) > 0.5) == (sim.states[t] == 0);
  }
  EXPECT_GE(static_cast<double>(hits) / 2000.0, 0.9);
}

TEST(Em, SingleRegimeDataStaysMonotoneOrDegenerates) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> y(300);
  for (auto& v : y) v = g(rng);
  EmOptions opts;
  opts.n_restarts = 3;
  try {
    const auto r = em_fit(MsSpec::all_linear(), y, opts);
    for (std::size_t i = 1; i < r.trace.size(); ++i) EXPECT_GE(r.trace[i], r.trace[i - 1] - 1e-8);
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("fewer regimes"), std::string::npos);
  }
}

TEST(Em, MlpLinearFitRunsAndIsMonotone) {
  SimulateOptions o;
  o.seed = 4;
  const auto y = simulate(well_separated(), 300, o).series;
  EmOptions opts;
  opts.n_restarts = 1;
  opts.max_iter = 30;
  opts.mlp_steps = 50;
  const auto r = em_fit(MsSpec::mlp_linear(), y, opts);
  for (std::size_t i = 1; i < r.trace.size(); ++i) EXPECT_GE(r.trace[i], r.trace[i - 1] - 1e-8);
  EXPECT_EQ(r.params.means[0].family, MeanFamily::mlp);
}

TEST(Em, AllRestartsDegenerateSuggestsFewerRegimes) {
  const auto y = simulate(well_separated(), 60, {}).series;
  EmOptions opts;
  opts.n_restarts = 2;
  opts.min_weight = 1e6;
  try {
    em_fit(MsSpec::all_linear(), y, opts);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::data);
    EXPECT_NE(std::string(e.what()).find("try fewer regimes"), std::string::npos);
  }
}

TEST(CrossTab, TableColumns) {
  MacroClassification mc;
  mc.k = 2;
  mc.week_to_class = {1, 1, 2, 2, 2};
  SpreadSeries s;
  s.values = {0.1, 0.3, 0.2, 0.2, 0.2};
  s.week_index = {0, 1, 2, 3, 4};
  s.labels = {"a", "b", "c", "d", "e"};
  RegimeProbabilities pr;
  pr.smoothed = Eigen::MatrixXd::Zero(5, 2);
  pr.smoothed.col(0).setOnes();
  pr.filtered = pr.smoothed;
  const auto rows = cross_tabulate(pr, mc, s);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].n_obs, 2u);
  EXPECT_DOUBLE_EQ(rows[0].share_regime1, 1.0);
  EXPECT_DOUBLE_EQ(rows[1].share_regime1, 1.0);
  EXPECT_NEAR(rows[0].spread_sd, std::sqrt(0.02), 1e-12);
  EXPECT_EQ(rows[1].spread_sd, 0.0);
  EXPECT_EQ(format_class_row({1, 483, 0.733, 0.053}), "483, 0.733, 0.053");

  s.values.pop_back();
  s.week_index.pop_back();
  s.labels.pop_back();
  EXPECT_THROW(cross_tabulate(pr, mc, s), Error);
}
