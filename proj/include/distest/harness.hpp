#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "distest/ar.hpp"
#include "distest/asr.hpp"
#include "distest/compress.hpp"
#include "distest/core.hpp"
#include "distest/hashproto.hpp"
#include "distest/onebit.hpp"
#include "distest/random.hpp"
#include "distest/rates.hpp"
#include "distest/transcript.hpp"

namespace distest {

struct AuditResult {
  bool pass = true;
  std::vector<std::string> violations;
  std::size_t total_bits = 0;
};

// Exactly one message per encoder 0..m-1, each exactly l bits, produced in
// encoder order.
inline AuditResult budget_audit(const Transcript& transcript, std::size_t m, std::size_t l) {
  AuditResult out;
  out.total_bits = transcript.total_bits();
  std::vector<std::size_t> seen(m, 0);
  const auto& entries = transcript.entries();
  for (std::size_t j = 0; j < entries.size(); ++j) {
    const auto& e = entries[j];
    if (e.encoder >= m) {
      out.violations.push_back("unknown encoder " + std::to_string(e.encoder));
      continue;
    }
    if (++seen[e.encoder] > 1) out.violations.push_back("duplicate message from encoder " + std::to_string(e.encoder));
    if (e.message.size() != l) {
      out.violations.push_back("encoder " + std::to_string(e.encoder) + ": message has " +
                               std::to_string(e.message.size()) + " bits, expected " +
                               std::to_string(l));
    }
    if (e.order != j || e.encoder != j) {
      out.violations.push_back("message " + std::to_string(j) + " out of order (encoder " +
                               std::to_string(e.encoder) + ", order " + std::to_string(e.order) + ")");
    }
  }
  for (std::size_t i = 0; i < m; ++i) {
    if (seen[i] == 0) out.violations.push_back("missing encoder " + std::to_string(i));
  }
  out.pass = out.violations.empty();
  return out;
}

namespace detail {

inline std::vector<BitMessage> zero_messages(std::size_t m, std::size_t l) {
  return std::vector<BitMessage>(m, BitMessage(l));
}

}  // namespace detail

// One execution of the selected protocol on a sample matrix.
inline ProtocolResult run_protocol(const ProtocolConfig& config, const SampleMatrix& samples,
                                   const SharedRandomness& randomness) {
  config.validate();
  if (samples.m() != config.m || samples.n() != config.n || samples.k() != config.k) {
    throw std::invalid_argument("run_protocol: sample matrix does not match config");
  }
  switch (config.protocol) {
    case ProtocolKind::ar: return run_ar(config, samples, randomness);
    case ProtocolKind::asr: return run_asr(config, samples, randomness, false);
    case ProtocolKind::asr_tv: return run_asr(config, samples, randomness, true);
    case ProtocolKind::compress: return run_compress_refine(config, samples, randomness);
    case ProtocolKind::threshold_le2:
      return run_threshold(config, samples, ThresholdVariant::p_le2, randomness);
    case ProtocolKind::threshold_gt2:
      return run_threshold(config, samples, ThresholdVariant::p_gt2, randomness);
    case ProtocolKind::hash: return run_hash(config, samples, randomness);
    case ProtocolKind::plugin: {
      auto out = transmit_samples(samples.view(), config.l);
      return make_result(std::move(out.estimate), std::move(out.messages));
    }
    case ProtocolKind::onebit: {
      if (config.k != 2) throw std::invalid_argument("onebit protocol needs k = 2");
      OneBitTask task{config.n, {}};
      for (std::size_t i = 0; i < samples.m(); ++i) task.counts.push_back(samples.view().count(i, 0));
      auto est = onebit_estimate(task, randomness);
      auto messages = detail::zero_messages(samples.m(), config.l);
      for (std::size_t i = 0; i < samples.m(); ++i) messages[i].bits[0] = est.bits[i];
      return make_result({est.estimate, 1.0 - est.estimate}, std::move(messages));
    }
    case ProtocolKind::uniform:
      return make_result(std::vector<double>(config.k, 1.0 / static_cast<double>(config.k)),
                         detail::zero_messages(config.m, config.l));
  }
  throw std::logic_error("run_protocol: unhandled protocol");
}

struct RiskReport {
  ProtocolConfig config;
  std::string instance;
  std::size_t trials = 0;
  double mean_loss = 0.0;
  double std_error = 0.0;
  bool audit_pass = true;
};

struct TrialOutput {
  double loss = 0.0;
  bool audit_pass = true;
};

// Trial t draws its samples and protocol randomness from streams derived from
// (seed, "trial", t), so results do not depend on how trials are scheduled.
inline TrialOutput run_trial(const Distribution& instance, const ProtocolConfig& config,
                             std::uint64_t seed, std::size_t t) {
  const SharedRandomness trial(SharedRandomness(seed).derive("trial", t));
  Stream sample_stream = trial.stream("samples");
  const SampleMatrix samples = sample(instance, config.m, config.n, sample_stream);
  const ProtocolResult result = run_protocol(config, samples, trial.child("protocol"));
  return {lp_loss(result.clipped, instance, config.p),
          budget_audit(result.transcript, config.m, config.l).pass};
}

// Runs body(i) for i in [0, count) on `workers` threads. The first exception
// (by index) is rethrown after all threads finish.
template <typename Body>
void parallel_for(std::size_t count, std::size_t workers, Body&& body) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto loop = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    loop();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(loop);
    for (auto& th : pool) th.join();
  }
  std::size_t failed = 0;
  std::exception_ptr first;
  for (auto& e : errors) {
    if (e) {
      if (!first) first = e;
      ++failed;
    }
  }
  if (!first) return;
  try {
    std::rethrow_exception(first);
  } catch (const std::exception& ex) {
    throw std::runtime_error(std::to_string(failed) + " of " + std::to_string(count) +
                             " trials failed; first error: " + ex.what());
  }
}

inline RiskReport estimate_risk(const Distribution& instance, const ProtocolConfig& config,
                                std::size_t trials, std::uint64_t seed, std::size_t workers = 1,
                                std::string descriptor = "") {
  if (trials < 2) throw std::invalid_argument("estimate_risk: need at least two trials");
  if (instance.size() != config.k) throw std::invalid_argument("estimate_risk: instance size != k");
  config.validate();
  std::vector<double> losses(trials);
  std::vector<char> audits(trials, 1);
  parallel_for(trials, workers, [&](std::size_t t) {
    const TrialOutput out = run_trial(instance, config, seed, t);
    losses[t] = out.loss;
    audits[t] = out.audit_pass ? 1 : 0;
  });

  RiskReport report;
  report.config = config;
  report.instance = std::move(descriptor);
  report.trials = trials;
  report.mean_loss = detail::stable_sum(losses) / static_cast<double>(trials);
  std::vector<double> sq(trials);
  for (std::size_t t = 0; t < trials; ++t) sq[t] = (losses[t] - report.mean_loss) * (losses[t] - report.mean_loss);
  const double var = detail::stable_sum(sq) / static_cast<double>(trials - 1);
  report.std_error = std::sqrt(var / static_cast<double>(trials));
  report.audit_pass = std::all_of(audits.begin(), audits.end(), [](char a) { return a != 0; });
  return report;
}

struct WorstCase {
  std::string instance;
  RiskReport report;
  std::vector<RiskReport> all;
};

inline double two_point_epsilon(std::size_t m, std::size_t n) {
  return 1.0 / std::sqrt(100.0 * static_cast<double>(m) * static_cast<double>(n));
}

// Largest mean loss over the listed families plus both members of the
// two-point pair at epsilon = (100 mn)^(-1/2).
inline WorstCase worst_case_risk(const std::vector<InstanceFamily>& families,
                                 const ProtocolConfig& config, std::size_t trials,
                                 std::uint64_t seed, std::size_t workers = 1) {
  if (families.empty()) throw std::invalid_argument("worst_case_risk: empty family list");
  std::vector<InstanceFamily> all = families;
  if (config.k >= 2) {
    const double eps = two_point_epsilon(config.m, config.n);
    all.push_back(InstanceFamily::two_point(eps, 1));
    all.push_back(InstanceFamily::two_point(eps, 2));
  }
  WorstCase out;
  for (std::size_t i = 0; i < all.size(); ++i) {
    const Distribution inst = make_instance(all[i], config.k, seed);
    out.all.push_back(estimate_risk(inst, config, trials, SharedRandomness(seed).derive("instance", i),
                                    workers, describe(all[i])));
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < out.all.size(); ++i) {
    if (out.all[i].mean_loss > out.all[best].mean_loss) best = i;
  }
  out.report = out.all[best];
  out.instance = out.report.instance;
  return out;
}

struct OlsFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = std::numeric_limits<double>::quiet_NaN();
};

// Least squares of log(y) on log(x).
inline OlsFit ols_loglog(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size() || xs.size() < 2) throw std::invalid_argument("ols_loglog: need >= 2 paired points");
  const std::size_t n = xs.size();
  std::vector<double> lx(n), ly(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(xs[i] > 0.0) || !(ys[i] > 0.0)) throw std::invalid_argument("ols_loglog: values must be positive");
    lx[i] = std::log(xs[i]);
    ly[i] = std::log(ys[i]);
  }
  const double mx = detail::stable_sum(lx) / static_cast<double>(n);
  const double my = detail::stable_sum(ly) / static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("ols_loglog: x values are all equal");
  OlsFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (n > 2) {
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = ly[i] - fit.intercept - fit.slope * lx[i];
      rss += r * r;
    }
    fit.slope_se = std::sqrt(rss / static_cast<double>(n - 2) / sxx);
  }
  return fit;
}

struct Sweep {
  std::string parameter;
  std::vector<double> grid;
  // Writes a grid value into the config (default: the named field).
  std::function<void(ProtocolConfig&, double)> apply;
  // Instance used at each point.
  std::function<Distribution(const ProtocolConfig&)> instance;
  // Regression abscissa at each point (default: the grid value).
  std::function<double(const ProtocolConfig&, double)> abscissa;
};

struct ScalingFit {
  std::string parameter;
  std::vector<double> grid;
  std::vector<double> abscissa;
  std::vector<RiskReport> points;
  std::vector<RegimePrediction> predictions;
  double slope = 0.0;
  double slope_se = 0.0;
};

inline void set_parameter(ProtocolConfig& config, const std::string& name, double value) {
  const auto as_size = [&] {
    if (!(value >= 0.0) || value != std::floor(value)) throw std::invalid_argument(name + " must be a nonnegative integer");
    return static_cast<std::size_t>(value);
  };
  if (name == "m") config.m = as_size();
  else if (name == "n") config.n = as_size();
  else if (name == "k") config.k = as_size();
  else if (name == "l") config.l = as_size();
  else if (name == "p") config.p = value;
  else if (name == "const_scale") config.const_scale = value;
  else throw std::invalid_argument("unknown sweep parameter: " + name);
}

inline RegimePrediction predict(const ProtocolConfig& c) {
  return classify_regime(static_cast<double>(c.m), static_cast<double>(c.n),
                         static_cast<double>(c.k), static_cast<double>(c.l), c.p);
}

// Risk at every grid point and the OLS slope of log risk on log abscissa.
// Every grid point must fall in the same predicted regime.
inline ScalingFit scaling_slope(const ProtocolConfig& base, const Sweep& sweep, std::size_t trials,
                                std::uint64_t seed, std::size_t workers = 1) {
  const auto& grid = sweep.grid;
  if (grid.size() < 4) throw std::invalid_argument("scaling_slope: grid needs at least 4 points");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) throw std::invalid_argument("scaling_slope: grid must be strictly increasing");
  }
  if (!sweep.instance) throw std::invalid_argument("scaling_slope: no instance generator");

  ScalingFit fit;
  fit.parameter = sweep.parameter;
  fit.grid = grid;
  std::vector<ProtocolConfig> configs;
  for (double v : grid) {
    ProtocolConfig c = base;
    if (sweep.apply) sweep.apply(c, v);
    else set_parameter(c, sweep.parameter, v);
    c.validate();
    configs.push_back(c);
    fit.predictions.push_back(predict(c));
    fit.abscissa.push_back(sweep.abscissa ? sweep.abscissa(c, v) : v);
  }
  if (fit.abscissa.back() < 16.0 * fit.abscissa.front()) {
    throw std::invalid_argument("scaling_slope: grid must span at least 16x");
  }
  std::string offending;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto r = fit.predictions[i].regime;
    if (r == Regime::uncovered || r != fit.predictions.front().regime) {
      offending += " " + std::to_string(grid[i]) + "(" + std::string(to_string(r)) + ")";
    }
  }
  if (!offending.empty()) {
    throw std::invalid_argument("scaling_slope: regime crossing at grid points" + offending +
                                "; first point is " + std::string(to_string(fit.predictions.front().regime)));
  }

  std::vector<double> means;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Distribution inst = sweep.instance(configs[i]);
    fit.points.push_back(estimate_risk(inst, configs[i], trials,
                                       SharedRandomness(seed).derive("grid", i), workers));
    means.push_back(fit.points.back().mean_loss);
  }
  const OlsFit ols = ols_loglog(fit.abscissa, means);
  fit.slope = ols.slope;
  fit.slope_se = ols.slope_se;
  return fit;
}

}  // namespace distest
