#include "regimes/regimes.h"

#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "regimes/changepoint.hpp"
#include "regimes/config.hpp"
#include "regimes/error.hpp"
#include "regimes/markov_switching.hpp"
#include "regimes/pipeline.hpp"

struct regimes_config {
  regimes::RunConfig config;
};

struct regimes_segmentation {
  regimes::Segmentation seg;
};

struct regimes_ms_fit {
  regimes::EmResult result;
};

namespace {

thread_local std::string g_last_error;

template <class F>
regimes_status guarded(F&& f) {
  try {
    g_last_error.clear();
    f();
    return REGIMES_OK;
  } catch (const regimes::Error& e) {
    g_last_error = e.what();
    return static_cast<regimes_status>(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return REGIMES_ERR_NUMERICAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return REGIMES_ERR_DATA;
  }
}

void require(bool ok, const char* what) {
  if (!ok) regimes::throw_usage(what);
}

regimes::LogFn wrap_log(regimes_log_fn log, void* user) {
  if (log == nullptr) return {};
  return [log, user](std::string_view line) {
    const std::string s(line);
    log(s.c_str(), user);
  };
}

}  // namespace

extern "C" {

const char* regimes_last_error(void) { return g_last_error.c_str(); }

const char* regimes_version(void) { return "0.1.0"; }

regimes_config* regimes_config_create(void) {
  try {
    return new regimes_config{};
  } catch (...) {
    g_last_error = "out of memory";
    return nullptr;
  }
}

void regimes_config_destroy(regimes_config* cfg) { delete cfg; }

regimes_status regimes_config_set(regimes_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require(cfg != nullptr && key != nullptr && value != nullptr, "null argument");
    cfg->config.set(key, value);
  });
}

regimes_status regimes_config_get(const regimes_config* cfg, const char* key, char* buf, size_t buf_len,
                                  size_t* needed) {
  return guarded([&] {
    require(cfg != nullptr && key != nullptr, "null argument");
    const auto v = cfg->config.get(key);
    if (needed != nullptr) *needed = v.size() + 1;
    if (buf != nullptr && buf_len > 0) {
      const auto n = std::min(v.size(), buf_len - 1);
      std::memcpy(buf, v.data(), n);
      buf[n] = '\0';
    }
  });
}

regimes_status regimes_config_load(regimes_config* cfg, const char* path) {
  return guarded([&] {
    require(cfg != nullptr && path != nullptr, "null argument");
    cfg->config.load_file(path);
  });
}

size_t regimes_config_key_count(void) { return regimes::config_keys().size(); }

// Registry names and help texts are string literals, hence NUL-terminated.
const char* regimes_config_key_name(size_t i) {
  const auto& keys = regimes::config_keys();
  return i < keys.size() ? keys[i].name.data() : nullptr;
}

const char* regimes_config_key_help(size_t i) {
  const auto& keys = regimes::config_keys();
  return i < keys.size() ? keys[i].help.data() : nullptr;
}

regimes_status regimes_cmd_ingest(const regimes_config* cfg, regimes_log_fn log, void* user) {
  return guarded([&] {
    require(cfg != nullptr, "null config");
    regimes::cmd_ingest(cfg->config, wrap_log(log, user));
  });
}

regimes_status regimes_cmd_analyze(const regimes_config* cfg, regimes_log_fn log, void* user) {
  return guarded([&] {
    require(cfg != nullptr, "null config");
    regimes::cmd_analyze(cfg->config, wrap_log(log, user));
  });
}

regimes_status regimes_cmd_report(const regimes_config* cfg, regimes_log_fn log, void* user) {
  return guarded([&] {
    require(cfg != nullptr, "null config");
    regimes::cmd_report(cfg->config, wrap_log(log, user));
  });
}

regimes_status regimes_cmd_simulate(const regimes_config* cfg, regimes_log_fn log, void* user) {
  return guarded([&] {
    require(cfg != nullptr, "null config");
    regimes::cmd_simulate(cfg->config, wrap_log(log, user));
  });
}

regimes_status regimes_stationary_distribution(const double* transition, size_t n, double* pi) {
  return guarded([&] {
    require(transition != nullptr && pi != nullptr && n > 0, "null argument or empty matrix");
    const auto m = static_cast<Eigen::Index>(n);
    const Eigen::MatrixXd a = Eigen::Map<const Eigen::MatrixXd>(transition, m, m);
    const auto v = regimes::stationary_distribution(a);
    std::copy(v.begin(), v.end(), pi);
  });
}

regimes_status regimes_detect(const double* series, size_t n, const char* mode, size_t k_max,
                              regimes_segmentation** out) {
  return guarded([&] {
    require(series != nullptr && mode != nullptr && out != nullptr, "null argument");
    *out = nullptr;
    regimes::ContrastOptions opts;
    opts.mode = regimes::parse_change_mode(mode);
    auto r = regimes::detect({series, n}, k_max, opts);
    *out = new regimes_segmentation{std::move(r.segmentation)};
  });
}

size_t regimes_segmentation_count(const regimes_segmentation* seg) { return seg ? seg->seg.tau.size() : 0; }

size_t regimes_segmentation_tau(const regimes_segmentation* seg, size_t i) {
  return seg && i < seg->seg.tau.size() ? seg->seg.tau[i] : 0;
}

double regimes_segmentation_mean(const regimes_segmentation* seg, size_t segment) {
  return seg && segment < seg->seg.segments.size() ? seg->seg.segments[segment].mean : 0.0;
}

double regimes_segmentation_variance(const regimes_segmentation* seg, size_t segment) {
  return seg && segment < seg->seg.segments.size() ? seg->seg.segments[segment].variance : 0.0;
}

double regimes_segmentation_contrast(const regimes_segmentation* seg) { return seg ? seg->seg.contrast : 0.0; }

void regimes_segmentation_destroy(regimes_segmentation* seg) { delete seg; }

regimes_status regimes_ms_fit_linear(const double* series, size_t n, size_t lag, size_t n_restarts,
                                     unsigned long long seed, regimes_ms_fit** out) {
  return guarded([&] {
    require(series != nullptr && out != nullptr, "null argument");
    *out = nullptr;
    regimes::EmOptions opts;
    opts.n_restarts = n_restarts;
    opts.seed = seed;
    auto r = regimes::em_fit(regimes::MsSpec::all_linear(2, lag), {series, n}, opts);
    *out = new regimes_ms_fit{std::move(r)};
  });
}

double regimes_ms_fit_loglik(const regimes_ms_fit* fit) { return fit ? fit->result.probs.loglik : 0.0; }

double regimes_ms_fit_transition(const regimes_ms_fit* fit, size_t i, size_t j) {
  if (fit == nullptr) return 0.0;
  const auto& a = fit->result.params.transition;
  if (i >= static_cast<size_t>(a.rows()) || j >= static_cast<size_t>(a.cols())) return 0.0;
  return a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
}

double regimes_ms_fit_smoothed(const regimes_ms_fit* fit, size_t t, size_t regime) {
  if (fit == nullptr) return 0.0;
  const auto& s = fit->result.probs.smoothed;
  if (t >= static_cast<size_t>(s.rows()) || regime >= static_cast<size_t>(s.cols())) return 0.0;
  return s(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(regime));
}

void regimes_ms_fit_destroy(regimes_ms_fit* fit) { delete fit; }

}  // extern "C"
