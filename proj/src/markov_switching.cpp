#include "regimes/markov_switching.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>

#include "regimes/data.hpp"
#include "regimes/error.hpp"
#include "regimes/som.hpp"

namespace regimes {

namespace {

constexpr double kLogSqrtTwoPi = 0.91893853320467274178;
constexpr double kMinSigma = 1e-150;
constexpr double kMinTransition = 1e-12;

double log_normal_density(double y, double mean, double sigma) {
  const double z = (y - mean) / sigma;
  return -kLogSqrtTwoPi - std::log(sigma) - 0.5 * z * z;
}

double series_variance(std::span<const double> y) {
  const double n = static_cast<double>(y.size());
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : y) ss += (v - mean) * (v - mean);
  return ss / n;
}

double variance_floor(std::span<const double> y) {
  return std::max(1e-10 * series_variance(y), 1e-200);
}

std::size_t draw_categorical(const Eigen::VectorXd& probs, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    acc += probs(i);
    if (u < acc) return static_cast<std::size_t>(i);
  }
  // Round-off: fall back to the last state with positive mass.
  for (Eigen::Index i = probs.size() - 1; i > 0; --i) {
    if (probs(i) > 0.0) return static_cast<std::size_t>(i);
  }
  return 0;
}

// Transition part of the expected complete-data log-likelihood, including the
// stationary initial distribution.
double transition_objective(const Eigen::MatrixXd& A, const Eigen::MatrixXd& counts,
                            const Eigen::VectorXd& initial_posterior) {
  double q = 0.0;
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
      if (counts(i, j) > 0.0) q += counts(i, j) * std::log(A(i, j));
    }
  }
  const auto pi = stationary_distribution(A);
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    if (initial_posterior(i) > 0.0) q += initial_posterior(i) * std::log(pi[static_cast<std::size_t>(i)]);
  }
  return q;
}

Eigen::MatrixXd clamp_columns(Eigen::MatrixXd A) {
  for (Eigen::Index j = 0; j < A.cols(); ++j) {
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
      A(i, j) = std::clamp(A(i, j), kMinTransition, 1.0);
    }
    A.col(j) /= A.col(j).sum();
  }
  return A;
}

// Generalised M-step for the transition matrix: the closed-form count ratio,
// backtracked toward the current matrix until the objective (which also sees
// the stationary start) does not decrease.
Eigen::MatrixXd update_transition(const Eigen::MatrixXd& current, const Eigen::MatrixXd& counts,
                                  const Eigen::VectorXd& initial_posterior) {
  Eigen::MatrixXd proposal = counts;
  for (Eigen::Index j = 0; j < proposal.cols(); ++j) {
    const double col = proposal.col(j).sum();
    if (col > 0.0) {
      proposal.col(j) /= col;
    } else {
      proposal.col(j) = current.col(j);
    }
  }
  proposal = clamp_columns(proposal);
  double base = 0.0;
  try {
    base = transition_objective(current, counts, initial_posterior);
  } catch (const Error&) {
    return proposal;
  }
  double alpha = 1.0;
  for (int attempt = 0; attempt < 40; ++attempt) {
    const Eigen::MatrixXd candidate = current + alpha * (proposal - current);
    try {
      if (transition_objective(candidate, counts, initial_posterior) >= base) return candidate;
    } catch (const Error&) {
    }
    alpha *= 0.5;
  }
  return current;
}

}  // namespace

// ---------------------------------------------------------------------------

std::size_t MsSpec::parameter_count() const {
  const std::size_t n = n_regimes();
  std::size_t count = n * (n - 1) + n;
  for (const auto& r : regimes) {
    count += r.family == MeanFamily::linear ? lag + 1 : RegimeMean::mlp_param_count(lag, r.hidden_units);
  }
  return count;
}

void MsSpec::validate() const {
  if (regimes.size() < 2) throw_usage("a switching model needs at least two regimes");
  if (lag < 1) throw_usage("lag must be at least 1");
  for (const auto& r : regimes) {
    if (r.family == MeanFamily::mlp && r.hidden_units < 1) {
      throw_usage("MLP regimes need at least one hidden unit");
    }
  }
}

MsSpec MsSpec::mlp_linear(std::size_t lag, std::size_t hidden) {
  MsSpec s;
  s.lag = lag;
  s.regimes = {{MeanFamily::mlp, hidden}, {MeanFamily::linear, hidden}};
  return s;
}

MsSpec MsSpec::all_linear(std::size_t n_regimes, std::size_t lag) {
  MsSpec s;
  s.lag = lag;
  s.regimes.assign(n_regimes, {MeanFamily::linear, 0});
  return s;
}

void MsParams::validate(bool allow_degenerate) const {
  const auto n = static_cast<Eigen::Index>(n_regimes());
  if (n < 1) throw_usage("model has no regimes");
  if (transition.rows() != n || transition.cols() != n) {
    throw_usage("transition matrix shape does not match the number of regimes");
  }
  if (means.size() != sigma.size()) throw_usage("one mean function per regime is required");
  for (const auto& m : means) {
    if (m.lag != means.front().lag) throw_usage("all regimes must share the same lag");
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    if (std::abs(transition.col(j).sum() - 1.0) > 1e-9) {
      throw_usage("transition matrix columns must sum to 1");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      const double a = transition(i, j);
      const bool ok = allow_degenerate ? (a >= 0.0 && a <= 1.0) : (a > 0.0 && a < 1.0);
      if (!ok) throw_usage("transition probabilities must lie in (0, 1)");
    }
  }
  for (std::size_t r = 0; r < sigma.size(); ++r) {
    const bool ok = allow_degenerate ? sigma[r] >= 0.0 : sigma[r] > 0.0;
    if (!ok || !std::isfinite(sigma[r])) {
      throw_usage("noise scale of regime " + std::to_string(r + 1) + " must be positive");
    }
  }
}

Eigen::MatrixXd transition_from_pq(double p, double q) {
  Eigen::MatrixXd A(2, 2);
  A << p, 1.0 - q, 1.0 - p, q;
  return A;
}

MsParams linear_two_regime(double p, double q, std::vector<double> coef1, std::vector<double> coef2,
                           double sigma1, double sigma2) {
  MsParams params;
  params.transition = transition_from_pq(p, q);
  params.means = {RegimeMean::linear(std::move(coef1)), RegimeMean::linear(std::move(coef2))};
  params.sigma = {sigma1, sigma2};
  return params;
}

std::vector<double> stationary_distribution(const Eigen::MatrixXd& A) {
  const auto n = A.rows();
  if (n != A.cols() || n < 1) throw_usage("transition matrix must be square");
  if (n == 1) return {1.0};
  if (n == 2) {
    const double stay1 = A(0, 0);
    const double stay2 = A(1, 1);
    const double denom = (1.0 - stay1) + (1.0 - stay2);
    if (!(denom > 0.0)) throw_numerical("degenerate chain: both regimes are absorbing");
    const double pi1 = (1.0 - stay2) / denom;
    return {pi1, 1.0 - pi1};
  }
  Eigen::MatrixXd M = A - Eigen::MatrixXd::Identity(n, n);
  M.row(n - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs(n - 1) = 1.0;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
  if (lu.rank() < n) throw_numerical("degenerate chain: stationary distribution is not unique");
  const Eigen::VectorXd pi = lu.solve(rhs);
  return {pi.data(), pi.data() + n};
}

MsParams permute_regimes(const MsParams& params, std::span<const std::size_t> perm) {
  const auto n = params.n_regimes();
  if (perm.size() != n) throw_usage("permutation size does not match the number of regimes");
  MsParams out = params;
  for (std::size_t i = 0; i < n; ++i) {
    out.means[i] = params.means[perm[i]];
    out.sigma[i] = params.sigma[perm[i]];
    for (std::size_t j = 0; j < n; ++j) {
      out.transition(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          params.transition(static_cast<Eigen::Index>(perm[i]), static_cast<Eigen::Index>(perm[j]));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

Simulation simulate(const MsParams& params, std::size_t length, const SimulateOptions& options) {
  params.validate(options.allow_degenerate);
  if (length < 1) throw_usage("simulation length must be at least 1");
  const std::size_t lag = params.lag();
  if (!options.initial_lags.empty() && options.initial_lags.size() != lag) {
    throw_usage("initial_lags must hold exactly lag values");
  }
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::size_t state = 0;
  if (options.start_state) {
    if (*options.start_state >= params.n_regimes()) throw_usage("start_state out of range");
    state = *options.start_state;
  } else {
    const auto pi = stationary_distribution(params.transition);
    state = draw_categorical(Eigen::Map<const Eigen::VectorXd>(pi.data(), static_cast<Eigen::Index>(pi.size())), rng);
  }

  // history[0] is y_{t-1}.
  std::vector<double> history(lag, 0.0);
  if (!options.initial_lags.empty()) {
    for (std::size_t k = 0; k < lag; ++k) history[k] = options.initial_lags[lag - 1 - k];
  }

  Simulation sim;
  sim.series.reserve(length);
  sim.states.reserve(length);
  const std::size_t total = options.burn_in + length;
  for (std::size_t t = 0; t < total; ++t) {
    if (t > 0) state = draw_categorical(params.transition.col(static_cast<Eigen::Index>(state)), rng);
    const double eps = normal(rng);
    const double y = params.means[state](history) + params.sigma[state] * eps;
    for (std::size_t k = lag; k-- > 1;) history[k] = history[k - 1];
    history[0] = y;
    if (t >= options.burn_in) {
      sim.series.push_back(y);
      sim.states.push_back(state);
    }
  }
  return sim;
}

// ---------------------------------------------------------------------------

RegimeProbabilities hamilton_filter(const MsParams& params, std::span<const double> series) {
  params.validate();
  const std::size_t lag = params.lag();
  const std::size_t T = series.size();
  const auto n = static_cast<Eigen::Index>(params.n_regimes());
  if (T <= lag) throw_data("series length must exceed the lag");
  for (std::size_t t = 0; t < T; ++t) {
    if (!std::isfinite(series[t])) throw_data("non-finite series value at index " + std::to_string(t));
  }
  for (std::size_t r = 0; r < params.sigma.size(); ++r) {
    if (!(params.sigma[r] > kMinSigma)) {
      throw_numerical("noise scale of regime " + std::to_string(r + 1) + " underflowed");
    }
  }

  const auto pi_vec = stationary_distribution(params.transition);
  const Eigen::Map<const Eigen::RowVectorXd> pi(pi_vec.data(), n);

  RegimeProbabilities out;
  out.lag = lag;
  out.predicted.resize(static_cast<Eigen::Index>(T), n);
  out.filtered.resize(static_cast<Eigen::Index>(T), n);
  for (std::size_t t = 0; t < lag; ++t) {
    out.predicted.row(static_cast<Eigen::Index>(t)) = pi;
    out.filtered.row(static_cast<Eigen::Index>(t)) = pi;
  }

  std::vector<double> log_terms(static_cast<std::size_t>(n));
  double loglik = 0.0;
  for (std::size_t t = lag; t < T; ++t) {
    const auto row = static_cast<Eigen::Index>(t);
    if (t == lag) {
      out.predicted.row(row) = pi;
    } else {
      out.predicted.row(row) = (params.transition * out.filtered.row(row - 1).transpose()).transpose();
    }
    const std::span<const double> window = series.subspan(t - lag, lag);
    std::vector<double> lags(window.rbegin(), window.rend());
    double m = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& f = params.means[static_cast<std::size_t>(i)];
      const double pred = out.predicted(row, i);
      const double lt = (pred > 0.0 ? std::log(pred) : -std::numeric_limits<double>::infinity()) +
                        log_normal_density(series[t], f(lags), params.sigma[static_cast<std::size_t>(i)]);
      log_terms[static_cast<std::size_t>(i)] = lt;
      m = std::max(m, lt);
    }
    if (!std::isfinite(m)) {
      throw_numerical("observation " + std::to_string(t) + " has zero likelihood under every regime");
    }
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) s += std::exp(log_terms[static_cast<std::size_t>(i)] - m);
    for (Eigen::Index i = 0; i < n; ++i) {
      out.filtered(row, i) = std::exp(log_terms[static_cast<std::size_t>(i)] - m) / s;
    }
    loglik += m + std::log(s);
  }
  out.loglik = loglik;
  return out;
}

Eigen::MatrixXd kim_smoother(const MsParams& params, const RegimeProbabilities& filt) {
  const auto T = filt.filtered.rows();
  const auto n = filt.filtered.cols();
  const auto lag = static_cast<Eigen::Index>(filt.lag);
  if (filt.predicted.rows() != T || filt.predicted.cols() != n || params.transition.rows() != n) {
    throw_usage("filtered probabilities do not match the model");
  }
  Eigen::MatrixXd smoothed = filt.filtered;
  if (T == 0) return smoothed;
  Eigen::VectorXd ratio(n);
  for (Eigen::Index t = T - 2; t >= lag; --t) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double pred = filt.predicted(t + 1, i);
      ratio(i) = pred > 0.0 ? smoothed(t + 1, i) / pred : 0.0;
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      smoothed(t, j) = filt.filtered(t, j) * params.transition.col(j).dot(ratio);
    }
    const double total = smoothed.row(t).sum();
    if (total > 0.0) smoothed.row(t) /= total;
  }
  return smoothed;
}

Eigen::MatrixXd expected_transitions(const MsParams& params, const RegimeProbabilities& probs) {
  const auto T = probs.filtered.rows();
  const auto n = probs.filtered.cols();
  const auto lag = static_cast<Eigen::Index>(probs.lag);
  if (probs.smoothed.rows() != T) throw_usage("expected_transitions needs smoothed probabilities");
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index t = lag; t + 1 < T; ++t) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double pred = probs.predicted(t + 1, i);
      if (!(pred > 0.0)) continue;
      const double r = probs.smoothed(t + 1, i) / pred;
      for (Eigen::Index j = 0; j < n; ++j) {
        counts(i, j) += r * params.transition(i, j) * probs.filtered(t, j);
      }
    }
  }
  return counts;
}

RegimeProbabilities regime_probabilities(const MsParams& params, std::span<const double> series) {
  auto probs = hamilton_filter(params, series);
  probs.smoothed = kim_smoother(params, probs);
  return probs;
}

// ---------------------------------------------------------------------------

namespace {

class MonotonicityViolation : public Error {
 public:
  explicit MonotonicityViolation(const std::string& what) : Error(ErrorKind::numerical, what) {}
};

std::vector<double> regime_weights(const RegimeProbabilities& probs, std::size_t regime) {
  const auto T = probs.smoothed.rows();
  std::vector<double> w;
  w.reserve(static_cast<std::size_t>(T) - probs.lag);
  for (auto t = static_cast<Eigen::Index>(probs.lag); t < T; ++t) {
    w.push_back(probs.smoothed(t, static_cast<Eigen::Index>(regime)));
  }
  return w;
}

void update_regime(RegimeMean& mean, double& sigma, const LagDesign& design,
                   std::span<const double> weights, double floor, std::size_t mlp_steps) {
  if (mean.family == MeanFamily::linear) {
    fit_linear_weighted(mean, design, weights);
  } else {
    fit_mlp_weighted(mean, design, weights, mlp_steps);
  }
  double wsum = 0.0;
  double ss = 0.0;
  for (std::size_t r = 0; r < design.rows(); ++r) {
    const double e = design.target[r] - mean(design.row(r));
    ss += weights[r] * e * e;
    wsum += weights[r];
  }
  const double var = wsum > 0.0 ? ss / wsum : floor;
  sigma = std::sqrt(std::max(var, floor));
}

MsParams m_step(const MsParams& current, const RegimeProbabilities& probs, const LagDesign& design,
                double floor, std::size_t mlp_steps) {
  MsParams next = current;
  const Eigen::MatrixXd counts = expected_transitions(current, probs);
  const Eigen::VectorXd initial = probs.smoothed.row(static_cast<Eigen::Index>(probs.lag)).transpose();
  next.transition = update_transition(current.transition, counts, initial);
  for (std::size_t r = 0; r < next.n_regimes(); ++r) {
    const auto w = regime_weights(probs, r);
    update_regime(next.means[r], next.sigma[r], design, w, floor, mlp_steps);
  }
  return next;
}

void check_spec_matches(const MsSpec& spec, const MsParams& params) {
  if (spec.n_regimes() != params.n_regimes()) {
    throw_usage("initial parameters do not match the number of regimes");
  }
  for (std::size_t r = 0; r < spec.n_regimes(); ++r) {
    if (params.means[r].family != spec.regimes[r].family || params.means[r].lag != spec.lag) {
      throw_usage("initial parameters do not match the model specification");
    }
  }
}

}  // namespace

EmResult em_run(const MsSpec& spec, std::span<const double> series, MsParams start,
                const EmOptions& options) {
  spec.validate();
  check_spec_matches(spec, start);
  const LagDesign design(series, spec.lag);
  const double floor = variance_floor(series);

  EmResult result;
  MsParams params = std::move(start);
  for (std::size_t iter = 0; iter < std::max<std::size_t>(options.max_iter, 1); ++iter) {
    auto probs = regime_probabilities(params, series);
    const double ll = probs.loglik;
    if (!std::isfinite(ll)) throw_numerical("log-likelihood is not finite");
    if (!result.trace.empty() && ll < result.trace.back() - options.monotonicity_slack) {
      char buf[160];
      std::snprintf(buf, sizeof buf,
                    "EM monotonicity violation at iteration %zu: log-likelihood %.17g after %.17g",
                    iter, ll, result.trace.back());
      throw MonotonicityViolation(buf);
    }
    result.trace.push_back(ll);
    for (std::size_t r = 0; r < params.n_regimes(); ++r) {
      const auto w = regime_weights(probs, r);
      const double mass = std::accumulate(w.begin(), w.end(), 0.0);
      if (mass < options.min_weight) {
        throw_data("regime " + std::to_string(r + 1) + " degenerated (posterior weight " +
                   std::to_string(mass) + "); consider fewer regimes");
      }
    }
    result.params = params;
    result.probs = std::move(probs);
    const std::size_t k = result.trace.size();
    if (k >= 2 && result.trace[k - 1] - result.trace[k - 2] < options.tol) {
      result.converged = true;
      break;
    }
    if (iter + 1 >= options.max_iter) break;
    params = m_step(params, result.probs, design, floor, options.mlp_steps);
  }
  return result;
}

MsParams initial_params(const MsSpec& spec, std::span<const double> series, std::uint64_t seed,
                        std::size_t restart) {
  spec.validate();
  const LagDesign design(series, spec.lag);
  const std::size_t rows = design.rows();
  const std::size_t n = spec.n_regimes();
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(restart), 0x5eedu};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  // Ordering key: level of y_t on even restarts, size of the pooled
  // autoregression residual on odd ones.
  std::vector<double> key(design.target);
  if (restart % 2 == 1) {
    RegimeMean pooled = RegimeMean::linear(std::vector<double>(spec.lag + 1, 0.0));
    const std::vector<double> ones(rows, 1.0);
    fit_linear_weighted(pooled, design, ones);
    for (std::size_t r = 0; r < rows; ++r) key[r] = std::abs(design.target[r] - pooled(design.row(r)));
  }
  std::vector<std::size_t> order(rows);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return key[a] < key[b]; });

  std::vector<double> cuts;
  for (std::size_t c = 0; c + 1 < n; ++c) cuts.push_back(0.25 + 0.5 * unif(rng));
  std::sort(cuts.begin(), cuts.end());
  std::vector<std::size_t> bin(rows);
  for (std::size_t rank = 0; rank < rows; ++rank) {
    const double u = (static_cast<double>(rank) + 0.5) / static_cast<double>(rows);
    bin[order[rank]] = static_cast<std::size_t>(std::upper_bound(cuts.begin(), cuts.end(), u) - cuts.begin());
  }

  std::vector<std::vector<double>> weights(n, std::vector<double>(rows));
  for (std::size_t r = 0; r < rows; ++r) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double base = bin[r] == i ? 0.8 : 0.2 / static_cast<double>(n - 1);
      weights[i][r] = base * (0.9 + 0.2 * unif(rng));
      total += weights[i][r];
    }
    for (std::size_t i = 0; i < n; ++i) weights[i][r] /= total;
  }

  MsParams params;
  params.transition.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < n; ++j) {
    const double stay = 0.6 + 0.35 * unif(rng);
    for (std::size_t i = 0; i < n; ++i) {
      params.transition(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          i == j ? stay : (1.0 - stay) / static_cast<double>(n - 1);
    }
  }
  const double floor = variance_floor(series);
  params.sigma.assign(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& rs = spec.regimes[i];
    RegimeMean mean = rs.family == MeanFamily::linear
                          ? RegimeMean::linear(std::vector<double>(spec.lag + 1, 0.0))
                          : RegimeMean::mlp(spec.lag, rs.hidden_units);
    if (rs.family == MeanFamily::mlp) randomize_mlp(mean, series, rng);
    update_regime(mean, params.sigma[i], design, weights[i], floor, 200);
    params.means.push_back(std::move(mean));
  }
  return params;
}

EmResult em_fit(const MsSpec& spec, std::span<const double> series, const EmOptions& options) {
  spec.validate();
  const std::size_t usable = series.size() > spec.lag ? series.size() - spec.lag : 0;
  std::vector<std::string> warnings;
  if (usable < 10 * spec.parameter_count()) {
    warnings.push_back("series has " + std::to_string(usable) + " usable observations for " +
                       std::to_string(spec.parameter_count()) +
                       " parameters; estimates may be unreliable");
  }

  EmResult best;
  bool have_best = false;
  std::vector<double> logliks;
  std::size_t degenerate = 0;
  std::string last_failure;

  if (options.init) {
    best = em_run(spec, series, *options.init, options);
    logliks.push_back(best.trace.back());
    have_best = true;
  } else {
    const std::size_t restarts = std::max<std::size_t>(options.n_restarts, 1);
    for (std::size_t r = 0; r < restarts; ++r) {
      try {
        auto start = initial_params(spec, series, options.seed, r);
        auto run = em_run(spec, series, std::move(start), options);
        logliks.push_back(run.trace.back());
        if (!have_best || run.trace.back() > best.trace.back()) {
          best = std::move(run);
          best.best_restart = r;
          have_best = true;
        }
      } catch (const MonotonicityViolation&) {
        throw;
      } catch (const Error& e) {
        ++degenerate;
        last_failure = e.what();
        logliks.push_back(-std::numeric_limits<double>::infinity());
      }
    }
  }
  if (!have_best) {
    throw_data("all " + std::to_string(degenerate) + " EM restarts degenerated (" + last_failure +
               "); try fewer regimes");
  }

  bool same_family = true;
  for (const auto& r : spec.regimes) same_family = same_family && r.family == spec.regimes.front().family;
  if (options.canonical_labels && same_family) {
    const auto pi = stationary_distribution(best.params.transition);
    std::vector<std::size_t> perm(pi.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::stable_sort(perm.begin(), perm.end(), [&](auto a, auto b) { return pi[a] > pi[b]; });
    best.params = permute_regimes(best.params, perm);
    auto permute_cols = [&](Eigen::MatrixXd& m) {
      Eigen::MatrixXd copy = m;
      for (std::size_t i = 0; i < perm.size(); ++i) {
        m.col(static_cast<Eigen::Index>(i)) = copy.col(static_cast<Eigen::Index>(perm[i]));
      }
    };
    permute_cols(best.probs.predicted);
    permute_cols(best.probs.filtered);
    permute_cols(best.probs.smoothed);
  }
  best.restart_logliks = std::move(logliks);
  best.degenerate_restarts = degenerate;
  best.warnings = std::move(warnings);
  return best;
}

// ---------------------------------------------------------------------------

std::vector<RegimeClassRow> cross_tabulate(const RegimeProbabilities& probs,
                                           const MacroClassification& periodization,
                                           const SpreadSeries& spread, double threshold) {
  if (probs.rows() != spread.size() || spread.week_index.size() != spread.size()) {
    throw_data("regime probabilities (" + std::to_string(probs.rows()) + " rows) and spread (" +
               std::to_string(spread.size()) + " values) are misaligned");
  }
  const std::size_t k = periodization.k;
  std::vector<std::vector<double>> values(k);
  std::vector<std::size_t> regime1(k, 0);
  for (std::size_t t = 0; t < spread.size(); ++t) {
    const std::size_t week = spread.week_index[t];
    if (week >= periodization.week_to_class.size()) {
      throw_data("spread row " + std::to_string(t) + " refers to week " + std::to_string(week) +
                 " outside the periodization");
    }
    const auto c = static_cast<std::size_t>(periodization.week_to_class[week] - 1);
    values[c].push_back(spread.values[t]);
    if (probs.smoothed(static_cast<Eigen::Index>(t), 0) > threshold) ++regime1[c];
  }
  std::vector<RegimeClassRow> rows;
  for (std::size_t c = 0; c < k; ++c) {
    RegimeClassRow row;
    row.class_id = static_cast<int>(c + 1);
    row.n_obs = values[c].size();
    if (row.n_obs > 0) row.share_regime1 = static_cast<double>(regime1[c]) / static_cast<double>(row.n_obs);
    if (row.n_obs > 1) {
      // Shifted by the first value so that a constant class gives exactly 0.
      const double shift = values[c].front();
      double mean = 0.0;
      for (double v : values[c]) mean += v - shift;
      mean /= static_cast<double>(row.n_obs);
      double ss = 0.0;
      for (double v : values[c]) ss += (v - shift - mean) * (v - shift - mean);
      row.spread_sd = std::sqrt(ss / static_cast<double>(row.n_obs - 1));
    }
    rows.push_back(row);
  }
  return rows;
}

std::string format_class_row(const RegimeClassRow& row) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%zu, %.3f, %.3f", row.n_obs, row.share_regime1, row.spread_sd);
  return buf;
}

}  // namespace regimes
