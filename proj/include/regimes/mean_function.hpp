#pragma once

// Conditional-mean functions of one regime: an autoregression on the last
// `lag` values, either linear or a one-hidden-layer tanh network.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace regimes {

enum class MeanFamily { linear, mlp };
std::string_view mean_family_name(MeanFamily f);
MeanFamily parse_mean_family(std::string_view name);

/// Targets y_t and lag rows (y_{t-1}, ..., y_{t-lag}) for t = lag .. T-1.
struct LagDesign {
  std::size_t lag = 0;
  std::vector<double> target;
  /// Row-major, target.size() x lag.
  std::vector<double> lags;

  LagDesign(std::span<const double> series, std::size_t lag);
  std::size_t rows() const { return target.size(); }
  std::span<const double> row(std::size_t r) const { return {lags.data() + r * lag, lag}; }
};

/// Linear: params = (a_0, a_1, ..., a_lag).
/// Mlp: params = (W[hidden x lag] row-major, b[hidden], v[hidden], c), with
///   f(x) = c + sum_h v_h tanh(b_h + sum_k W_hk (x_k - center) / scale).
/// center and scale are fixed input normalisation, not trained.
struct RegimeMean {
  MeanFamily family = MeanFamily::linear;
  std::size_t lag = 1;
  std::size_t hidden = 0;
  std::vector<double> params;
  double input_center = 0.0;
  double input_scale = 1.0;

  static RegimeMean linear(std::vector<double> coefficients);
  static RegimeMean mlp(std::size_t lag, std::size_t hidden);

  static std::size_t mlp_param_count(std::size_t lag, std::size_t hidden) {
    return hidden * lag + 2 * hidden + 1;
  }
  std::size_t param_count() const { return params.size(); }

  double operator()(std::span<const double> lags) const;
};

/// 0.5 * sum_t w_t (y_t - f(x_t))^2 / sum_t w_t
double weighted_loss(const RegimeMean& f, const LagDesign& design, std::span<const double> weights);

/// Gradient of weighted_loss with respect to f.params (backpropagation).
std::vector<double> weighted_loss_gradient(const RegimeMean& f, const LagDesign& design,
                                           std::span<const double> weights);

/// Exact weighted least squares for a linear mean.
void fit_linear_weighted(RegimeMean& f, const LagDesign& design, std::span<const double> weights);

/// Gradient descent on weighted_loss for an MLP mean. Each of `steps`
/// attempts either improves the loss (step grows) or is rejected (step
/// halves); the loss never increases. Returns the final loss.
double fit_mlp_weighted(RegimeMean& f, const LagDesign& design, std::span<const double> weights,
                        std::size_t steps);

/// Small random weights, input normalisation from the series, output bias
/// at the series mean.
void randomize_mlp(RegimeMean& f, std::span<const double> series, std::mt19937_64& rng);

}  // namespace regimes
