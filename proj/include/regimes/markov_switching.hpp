#pragma once

// Markov-switching autoregression: a hidden Markov chain selects, at each
// step, which conditional mean and noise scale generate y_t.
//
//   y_t = f_{x_t}(y_{t-1}, ..., y_{t-l}) + sigma_{x_t} eps_t,  eps_t ~ N(0, 1)
//
// The transition matrix is column-stochastic: A(i, j) = P(x_t = i | x_{t-1} = j).
// For two regimes A = [[p, 1 - q], [1 - p, q]].

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "regimes/mean_function.hpp"

namespace regimes {

struct MacroClassification;
struct SpreadSeries;

struct RegimeMeanSpec {
  MeanFamily family = MeanFamily::linear;
  std::size_t hidden_units = 3;
};

struct MsSpec {
  std::size_t lag = 1;
  /// One entry per regime.
  std::vector<RegimeMeanSpec> regimes;

  std::size_t n_regimes() const { return regimes.size(); }
  /// Free parameters: transition columns, mean parameters and scales.
  std::size_t parameter_count() const;
  void validate() const;

  /// Regime 1 a one-hidden-layer network (3 tanh units), regime 2 linear,
  /// both on one lag.
  static MsSpec mlp_linear(std::size_t lag = 1, std::size_t hidden = 3);
  static MsSpec all_linear(std::size_t n_regimes = 2, std::size_t lag = 1);
};

struct MsParams {
  Eigen::MatrixXd transition;
  std::vector<RegimeMean> means;
  std::vector<double> sigma;

  std::size_t n_regimes() const { return sigma.size(); }
  std::size_t lag() const { return means.empty() ? 0 : means.front().lag; }
  double p() const { return transition(0, 0); }
  double q() const { return transition(1, 1); }

  /// Checks shapes, column sums and positivity. Simulation may relax the
  /// open-interval and positive-scale requirements.
  void validate(bool allow_degenerate = false) const;
};

Eigen::MatrixXd transition_from_pq(double p, double q);

/// Two linear regimes with the given (p, q) and (a_0, ..., a_l) per regime.
MsParams linear_two_regime(double p, double q, std::vector<double> coef1, std::vector<double> coef2,
                           double sigma1, double sigma2);

/// Left-invariant probability vector of a column-stochastic matrix
/// (A pi = pi, sum pi = 1). Errors on a reducible chain.
std::vector<double> stationary_distribution(const Eigen::MatrixXd& transition);

/// Swaps regime labels: new regime r is old regime perm[r].
MsParams permute_regimes(const MsParams& params, std::span<const std::size_t> perm);

struct SimulateOptions {
  std::uint64_t seed = 1;
  std::size_t burn_in = 0;
  /// y_{-l}, ..., y_{-1} preceding the first generated value (newest last);
  /// zeros when empty.
  std::vector<double> initial_lags;
  /// Overrides the stationary draw of the first state (0-based).
  std::optional<std::size_t> start_state;
  /// Permits p or q equal to 1 and zero noise scales.
  bool allow_degenerate = false;
};

struct Simulation {
  std::vector<double> series;
  /// 0-based regime indices.
  std::vector<std::size_t> states;
};

Simulation simulate(const MsParams& params, std::size_t length, const SimulateOptions& options = {});

/// Filtered, predicted and smoothed regime probabilities, one row per
/// observation. The first `lag` observations only condition the recursion:
/// their rows hold the stationary distribution.
struct RegimeProbabilities {
  std::size_t lag = 0;
  Eigen::MatrixXd predicted;
  Eigen::MatrixXd filtered;
  Eigen::MatrixXd smoothed;
  double loglik = 0.0;

  std::size_t rows() const { return static_cast<std::size_t>(filtered.rows()); }
};

/// Forward recursion in the log domain. The chain starts from the
/// stationary distribution at the first usable observation t = lag.
RegimeProbabilities hamilton_filter(const MsParams& params, std::span<const double> series);

/// Backward smoothing pass; returns P(x_t | y_1..y_T) row by row.
Eigen::MatrixXd kim_smoother(const MsParams& params, const RegimeProbabilities& filtered);

/// sum_t P(x_{t+1} = i, x_t = j | y_1..y_T) over usable t; requires smoothed.
Eigen::MatrixXd expected_transitions(const MsParams& params, const RegimeProbabilities& probs);

/// Filter followed by smoother.
RegimeProbabilities regime_probabilities(const MsParams& params, std::span<const double> series);

struct EmOptions {
  double tol = 1e-6;
  std::size_t max_iter = 500;
  std::size_t n_restarts = 10;
  std::uint64_t seed = 1;
  /// Restarts whose smallest regime weight falls below this are discarded.
  double min_weight = 1.0;
  std::size_t mlp_steps = 200;
  /// Tolerated decrease of the log-likelihood between iterations.
  double monotonicity_slack = 1e-8;
  /// When set, a single run starts here instead of seeded restarts.
  std::optional<MsParams> init;
  /// Reorders regimes by decreasing stationary probability when all regimes
  /// share a mean family.
  bool canonical_labels = true;
};

struct EmResult {
  MsParams params;
  RegimeProbabilities probs;
  /// Log-likelihood at each E-step of the selected run.
  std::vector<double> trace;
  std::size_t best_restart = 0;
  std::vector<double> restart_logliks;
  std::size_t degenerate_restarts = 0;
  bool converged = false;
  std::vector<std::string> warnings;
};

/// One EM run from given parameters. Throws a numerical error when the
/// log-likelihood decreases by more than options.monotonicity_slack, and a
/// data error when a regime's posterior weight drops below min_weight.
EmResult em_run(const MsSpec& spec, std::span<const double> series, MsParams start,
                const EmOptions& options);

/// Seeded initial parameters for restart `restart`.
MsParams initial_params(const MsSpec& spec, std::span<const double> series, std::uint64_t seed,
                        std::size_t restart);

/// Best of options.n_restarts EM runs (or a single run from options.init).
EmResult em_fit(const MsSpec& spec, std::span<const double> series, const EmOptions& options = {});

struct RegimeClassRow {
  int class_id = 0;
  std::size_t n_obs = 0;
  /// Share of observations with smoothed P(regime 1) above the threshold.
  double share_regime1 = 0.0;
  /// Sample standard deviation of the spread within the class.
  double spread_sd = 0.0;
};

/// Per macro-class regime-1 share and spread volatility.
std::vector<RegimeClassRow> cross_tabulate(const RegimeProbabilities& probs,
                                           const MacroClassification& periodization,
                                           const SpreadSeries& spread, double threshold = 0.5);

/// "483, 0.733, 0.053"
std::string format_class_row(const RegimeClassRow& row);

}  // namespace regimes
