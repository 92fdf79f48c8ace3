#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "cli_support.hpp"
#include "distest/harness.hpp"

using namespace distest;
using namespace distest::cli;

namespace {

const char* const kKeys[] = {"m", "n", "k", "l", "p", "protocol", "family", "trials", "seed",
                             "const_scale", "out", "workers", "param", "grid"};

struct Flags {
  std::map<std::string, std::string> values;
  std::string config_path;
};

void add_flags(CLI::App* app, Flags& flags) {
  for (const char* key : kKeys) {
    std::string name = "--" + std::string(key);
    for (char& c : name) {
      if (c == '_') c = '-';
    }
    app->add_option(name, flags.values[key]);
  }
  app->add_option("--config", flags.config_path, "TOML file with the same keys; flags win");
}

RunOptions resolve(const CLI::App* app, const Flags& flags, std::string& config_text) {
  RunOptions opts;
  FlatToml merged;
  if (!flags.config_path.empty()) {
    std::ifstream in(flags.config_path);
    if (!in) throw std::runtime_error("cannot open config file " + flags.config_path);
    std::stringstream buf;
    buf << in.rdbuf();
    config_text = buf.str();
    std::istringstream parse(config_text);
    merged = parse_toml(parse);
  }
  for (const char* key : kKeys) {
    std::string name = "--" + std::string(key);
    for (char& c : name) {
      if (c == '_') c = '-';
    }
    if (app->count(name) > 0) merged[key] = flags.values.at(key);
  }
  apply_settings(opts, merged);
  opts.config.validate();
  return opts;
}

void emit(const std::string& command, const RunOptions& opts, const std::string& config_text,
          const std::string& csv) {
  if (opts.out.empty()) {
    std::cout << csv;
    return;
  }
  std::ofstream(opts.out, std::ios::binary) << csv;
  std::ofstream(opts.out + ".json") << make_manifest(command, opts, config_text, csv).dump(2) << '\n';
}

Distribution instance_for(const std::string& family, const ProtocolConfig& c) {
  return make_instance(parse_family(family), c.k, c.seed);
}

std::string run_risk(const RunOptions& opts) {
  std::string csv = csv_header();
  for (std::size_t i = 0; i < opts.families.size(); ++i) {
    const auto& fam = opts.families[i];
    const auto report = estimate_risk(instance_for(fam, opts.config), opts.config, opts.trials,
                                      SharedRandomness(opts.config.seed).derive("instance", i),
                                      opts.workers, fam);
    csv += csv_line({"none", 0.0, fam, report, predict(opts.config)});
  }
  return csv;
}

std::string run_sweep(const RunOptions& opts) {
  if (opts.families.size() != 1) throw std::invalid_argument("sweep takes exactly one family");
  Sweep sweep;
  sweep.parameter = opts.param;
  sweep.grid = opts.grid;
  const std::string fam = opts.families.front();
  sweep.instance = [&](const ProtocolConfig& c) { return instance_for(fam, c); };
  const auto fit = scaling_slope(opts.config, sweep, opts.trials, opts.config.seed, opts.workers);
  std::string csv = csv_header();
  for (std::size_t i = 0; i < fit.grid.size(); ++i) {
    csv += csv_line({opts.param, fit.grid[i], fam, fit.points[i], fit.predictions[i]});
  }
  std::cerr << "slope " << format_double(fit.slope) << " +/- " << format_double(fit.slope_se) << '\n';
  return csv;
}

std::string run_worst(const RunOptions& opts) {
  std::vector<InstanceFamily> families;
  for (const auto& f : opts.families) families.push_back(parse_family(f));
  const auto worst = worst_case_risk(families, opts.config, opts.trials, opts.config.seed, opts.workers);
  std::string csv = csv_header();
  for (const auto& r : worst.all) csv += csv_line({"none", 0.0, r.instance, r, predict(opts.config)});
  std::cerr << "worst instance " << worst.instance << '\n';
  return csv;
}

int run_audit(const RunOptions& opts) {
  const auto& c = opts.config;
  const SharedRandomness trial(c.seed);
  Stream s = trial.stream("samples");
  const auto samples = sample(instance_for(opts.families.front(), c), c.m, c.n, s);
  const auto result = run_protocol(c, samples, trial.child("protocol"));
  const auto audit = budget_audit(result.transcript, c.m, c.l);
  std::cout << (audit.pass ? "PASS" : "FAIL") << " messages=" << result.transcript.size()
            << " bits=" << audit.total_bits << " expected=" << c.m * c.l << '\n';
  for (const auto& v : audit.violations) std::cout << "  " << v << '\n';
  return audit.pass ? 0 : 1;
}

void run_rates(const RunOptions& opts) {
  const auto& c = opts.config;
  const auto m = static_cast<double>(c.m), n = static_cast<double>(c.n), k = static_cast<double>(c.k);
  const auto pred = classify_regime(m, n, k, static_cast<double>(c.l), c.p);
  std::cout << "regime " << to_string(pred.regime) << '\n'
            << "upper_rate " << format_double(pred.upper_rate) << '\n'
            << "lower_rate " << format_double(pred.lower_rate) << '\n'
            << "log_factor " << format_double(pred.log_factor) << '\n'
            << "lower_bound " << format_double(lower_bound(m, n, k, static_cast<double>(c.l), c.p)) << '\n'
            << "central_rate " << format_double(central_rate(m, n, k, c.p)) << '\n'
            << "notes " << pred.notes << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo risk of communication-constrained distribution estimators"};
  app.require_subcommand(1);
  Flags risk_flags, sweep_flags, worst_flags, audit_flags, rates_flags;
  auto* risk = app.add_subcommand("risk", "mean loss of one protocol on each listed instance family");
  auto* sweep = app.add_subcommand("sweep", "risk over a grid of one parameter and the log-log slope");
  auto* worst = app.add_subcommand("worst", "largest risk over families plus the two-point pair");
  auto* audit = app.add_subcommand("audit", "run once and check the bit budget");
  auto* rates = app.add_subcommand("rates", "predicted regime and rates");
  add_flags(risk, risk_flags);
  add_flags(sweep, sweep_flags);
  add_flags(worst, worst_flags);
  add_flags(audit, audit_flags);
  add_flags(rates, rates_flags);
  CLI11_PARSE(app, argc, argv);

  try {
    std::string config_text;
    if (*risk) {
      const auto opts = resolve(risk, risk_flags, config_text);
      emit("risk", opts, config_text, run_risk(opts));
    } else if (*sweep) {
      const auto opts = resolve(sweep, sweep_flags, config_text);
      emit("sweep", opts, config_text, run_sweep(opts));
    } else if (*worst) {
      const auto opts = resolve(worst, worst_flags, config_text);
      emit("worst", opts, config_text, run_worst(opts));
    } else if (*audit) {
      return run_audit(resolve(audit, audit_flags, config_text));
    } else if (*rates) {
      run_rates(resolve(rates, rates_flags, config_text));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
