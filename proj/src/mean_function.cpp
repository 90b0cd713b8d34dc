#include "regimes/mean_function.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numeric>

#include "regimes/error.hpp"

namespace regimes {

std::string_view mean_family_name(MeanFamily f) { return f == MeanFamily::linear ? "linear" : "mlp"; }

MeanFamily parse_mean_family(std::string_view name) {
  if (name == "linear") return MeanFamily::linear;
  if (name == "mlp") return MeanFamily::mlp;
  throw_usage("unknown mean family '" + std::string(name) + "'");
}

LagDesign::LagDesign(std::span<const double> series, std::size_t lag_) : lag(lag_) {
  if (lag == 0) throw_usage("lag must be at least 1");
  if (series.size() <= lag) throw_data("series length must exceed the lag");
  const std::size_t n = series.size() - lag;
  target.reserve(n);
  lags.reserve(n * lag);
  for (std::size_t t = lag; t < series.size(); ++t) {
    target.push_back(series[t]);
    for (std::size_t k = 1; k <= lag; ++k) lags.push_back(series[t - k]);
  }
}

RegimeMean RegimeMean::linear(std::vector<double> coefficients) {
  if (coefficients.size() < 2) throw_usage("linear mean needs an intercept and at least one lag");
  RegimeMean f;
  f.family = MeanFamily::linear;
  f.lag = coefficients.size() - 1;
  f.params = std::move(coefficients);
  return f;
}

RegimeMean RegimeMean::mlp(std::size_t lag, std::size_t hidden) {
  if (lag == 0 || hidden == 0) throw_usage("MLP mean needs lag >= 1 and hidden units >= 1");
  RegimeMean f;
  f.family = MeanFamily::mlp;
  f.lag = lag;
  f.hidden = hidden;
  f.params.assign(mlp_param_count(lag, hidden), 0.0);
  return f;
}

double RegimeMean::operator()(std::span<const double> x) const {
  if (family == MeanFamily::linear) {
    double m = params[0];
    for (std::size_t k = 0; k < lag; ++k) m += params[k + 1] * x[k];
    return m;
  }
  const double* w = params.data();
  const double* b = w + hidden * lag;
  const double* v = b + hidden;
  double out = v[hidden];
  for (std::size_t h = 0; h < hidden; ++h) {
    double a = b[h];
    for (std::size_t k = 0; k < lag; ++k) a += w[h * lag + k] * (x[k] - input_center) / input_scale;
    out += v[h] * std::tanh(a);
  }
  return out;
}

double weighted_loss(const RegimeMean& f, const LagDesign& design, std::span<const double> weights) {
  double total = 0.0;
  double wsum = 0.0;
  for (std::size_t r = 0; r < design.rows(); ++r) {
    const double e = design.target[r] - f(design.row(r));
    total += weights[r] * e * e;
    wsum += weights[r];
  }
  return wsum > 0.0 ? 0.5 * total / wsum : 0.0;
}

std::vector<double> weighted_loss_gradient(const RegimeMean& f, const LagDesign& design,
                                           std::span<const double> weights) {
  std::vector<double> grad(f.params.size(), 0.0);
  const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (wsum <= 0.0) return grad;
  const std::size_t lag = f.lag;

  if (f.family == MeanFamily::linear) {
    for (std::size_t r = 0; r < design.rows(); ++r) {
      const auto x = design.row(r);
      const double g = -weights[r] * (design.target[r] - f(x)) / wsum;
      grad[0] += g;
      for (std::size_t k = 0; k < lag; ++k) grad[k + 1] += g * x[k];
    }
    return grad;
  }

  const std::size_t hidden = f.hidden;
  const double* w = f.params.data();
  const double* b = w + hidden * lag;
  const double* v = b + hidden;
  double* gw = grad.data();
  double* gb = gw + hidden * lag;
  double* gv = gb + hidden;
  std::vector<double> z(lag);
  std::vector<double> act(hidden);
  for (std::size_t r = 0; r < design.rows(); ++r) {
    const auto x = design.row(r);
    for (std::size_t k = 0; k < lag; ++k) z[k] = (x[k] - f.input_center) / f.input_scale;
    double out = v[hidden];
    for (std::size_t h = 0; h < hidden; ++h) {
      double a = b[h];
      for (std::size_t k = 0; k < lag; ++k) a += w[h * lag + k] * z[k];
      act[h] = std::tanh(a);
      out += v[h] * act[h];
    }
    // d/d out of 0.5 w e^2 / W with e = y - out.
    const double g = -weights[r] * (design.target[r] - out) / wsum;
    gv[hidden] += g;
    for (std::size_t h = 0; h < hidden; ++h) {
      gv[h] += g * act[h];
      const double ga = g * v[h] * (1.0 - act[h] * act[h]);
      gb[h] += ga;
      for (std::size_t k = 0; k < lag; ++k) gw[h * lag + k] += ga * z[k];
    }
  }
  return grad;
}

void fit_linear_weighted(RegimeMean& f, const LagDesign& design, std::span<const double> weights) {
  if (f.family != MeanFamily::linear) throw_usage("fit_linear_weighted needs a linear mean");
  const auto n = static_cast<Eigen::Index>(design.rows());
  const auto p = static_cast<Eigen::Index>(design.lag + 1);
  Eigen::MatrixXd X(n, p);
  Eigen::VectorXd y(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double sw = std::sqrt(std::max(0.0, weights[static_cast<std::size_t>(r)]));
    const auto x = design.row(static_cast<std::size_t>(r));
    X(r, 0) = sw;
    for (Eigen::Index k = 1; k < p; ++k) X(r, k) = sw * x[static_cast<std::size_t>(k - 1)];
    y(r) = sw * design.target[static_cast<std::size_t>(r)];
  }
  const Eigen::VectorXd beta = X.colPivHouseholderQr().solve(y);
  if (!beta.allFinite()) throw_numerical("weighted least squares produced non-finite coefficients");
  f.lag = design.lag;
  f.params.assign(beta.data(), beta.data() + beta.size());
}

double fit_mlp_weighted(RegimeMean& f, const LagDesign& design, std::span<const double> weights,
                        std::size_t steps) {
  if (f.family != MeanFamily::mlp) throw_usage("fit_mlp_weighted needs an MLP mean");
  double loss = weighted_loss(f, design, weights);
  auto grad = weighted_loss_gradient(f, design, weights);
  auto norm = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
  };
  double gnorm = norm(grad);
  if (!(gnorm > 0.0)) return loss;
  double step = 0.1 * std::max(1.0, norm(f.params)) / gnorm;

  RegimeMean trial = f;
  for (std::size_t s = 0; s < steps; ++s) {
    for (std::size_t i = 0; i < f.params.size(); ++i) trial.params[i] = f.params[i] - step * grad[i];
    const double trial_loss = weighted_loss(trial, design, weights);
    if (trial_loss < loss) {
      f.params = trial.params;
      loss = trial_loss;
      grad = weighted_loss_gradient(f, design, weights);
      gnorm = norm(grad);
      if (!(gnorm > 0.0)) break;
      step *= 1.5;
    } else {
      step *= 0.5;
      if (step * gnorm < 1e-14 * std::max(1.0, norm(f.params))) break;
    }
  }
  return loss;
}

void randomize_mlp(RegimeMean& f, std::span<const double> series, std::mt19937_64& rng) {
  if (f.family != MeanFamily::mlp) return;
  double mean = 0.0;
  for (double y : series) mean += y;
  mean /= static_cast<double>(series.size());
  double var = 0.0;
  for (double y : series) var += (y - mean) * (y - mean);
  var /= static_cast<double>(series.size());
  const double sd = var > 0.0 ? std::sqrt(var) : 1.0;
  f.input_center = mean;
  f.input_scale = sd;

  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t hidden = f.hidden;
  const std::size_t lag = f.lag;
  double* w = f.params.data();
  double* b = w + hidden * lag;
  double* v = b + hidden;
  for (std::size_t i = 0; i < hidden * lag; ++i) w[i] = 0.5 * normal(rng);
  for (std::size_t h = 0; h < hidden; ++h) b[h] = 0.1 * normal(rng);
  for (std::size_t h = 0; h < hidden; ++h) v[h] = 0.5 * sd * normal(rng);
  v[hidden] = mean;
}

}  // namespace regimes
