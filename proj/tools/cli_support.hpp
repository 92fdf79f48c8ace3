#pragma once

#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/sha.h>

#include "distest/harness.hpp"

namespace distest::cli {

// Flat TOML: `key = value` lines, `#` comments, optional [table] headers
// (ignored, keys stay flat), values are numbers, booleans, quoted strings or
// one-line arrays of those. Values are kept as their textual form.
using FlatToml = std::map<std::string, std::string>;

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Drops a trailing comment that is not inside a string.
inline std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

inline std::string unquote(const std::string& v, std::size_t line_no) {
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
  if (!v.empty() && v.front() == '"') {
    throw std::invalid_argument("config line " + std::to_string(line_no) + ": unterminated string");
  }
  return v;
}

}  // namespace detail

inline FlatToml parse_toml(std::istream& in) {
  FlatToml out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = detail::trim(detail::strip_comment(line));
    if (body.empty()) continue;
    if (body.front() == '[') {
      if (body.back() != ']') throw std::invalid_argument("config line " + std::to_string(line_no) + ": bad table header");
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key = value");
    }
    std::string key = detail::trim(body.substr(0, eq));
    std::string value = detail::trim(body.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": empty key or value");
    }
    for (char& c : key) {
      if (c == '-') c = '_';
    }
    if (value.front() == '[') {
      if (value.back() != ']') throw std::invalid_argument("config line " + std::to_string(line_no) + ": unterminated array");
      std::string joined;
      std::stringstream items(value.substr(1, value.size() - 2));
      std::string item;
      while (std::getline(items, item, ',')) {
        item = detail::trim(item);
        if (item.empty()) continue;
        if (!joined.empty()) joined += ",";
        joined += detail::unquote(item, line_no);
      }
      value = joined;
    } else {
      value = detail::unquote(value, line_no);
    }
    if (!out.emplace(key, value).second) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": duplicate key " + key);
    }
  }
  return out;
}

inline FlatToml parse_toml_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  return parse_toml(in);
}

inline std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = detail::trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split_list(text)) {
    std::size_t used = 0;
    const double v = std::stod(item, &used);
    if (used != item.size()) throw std::invalid_argument("bad grid value: " + item);
    out.push_back(v);
  }
  return out;
}

// Everything a run needs, after the config file and the flags are merged.
struct RunOptions {
  ProtocolConfig config;
  std::vector<std::string> families{"uniform"};
  std::size_t trials = 400;
  std::size_t workers = 1;
  std::string param = "m";
  std::vector<double> grid;
  std::string out;
};

inline void apply_setting(RunOptions& opts, const std::string& key, const std::string& value) {
  const auto as_size = [&] {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(value, &used);
    if (used != value.size() || value.front() == '-') throw std::invalid_argument(key + ": expected a nonnegative integer, got " + value);
    return static_cast<std::size_t>(v);
  };
  const auto as_double = [&] {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(key + ": expected a number, got " + value);
    return v;
  };
  if (key == "m") opts.config.m = as_size();
  else if (key == "n") opts.config.n = as_size();
  else if (key == "k") opts.config.k = as_size();
  else if (key == "l") opts.config.l = as_size();
  else if (key == "p") opts.config.p = as_double();
  else if (key == "seed") opts.config.seed = as_size();
  else if (key == "const_scale") opts.config.const_scale = as_double();
  else if (key == "protocol") opts.config.protocol = parse_protocol(value);
  else if (key == "family") opts.families = split_list(value);
  else if (key == "trials") opts.trials = as_size();
  else if (key == "workers") opts.workers = as_size();
  else if (key == "param") opts.param = value;
  else if (key == "grid") opts.grid = parse_grid(value);
  else if (key == "out") opts.out = value;
  else throw std::invalid_argument("unknown config key: " + key);
}

inline void apply_settings(RunOptions& opts, const FlatToml& settings) {
  for (const auto& [key, value] : settings) apply_setting(opts, key, value);
}

// Shortest text that reads back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  for (int precision = 1; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::stod(buf) == v) break;
  }
  return buf;
}

struct CsvRow {
  std::string parameter;
  double value = 0.0;
  std::string instance;
  RiskReport report;
  RegimePrediction prediction;
};

inline std::string csv_header() {
  return "parameter,value,instance,protocol,m,n,k,l,p,trials,mean_loss,std_error,predicted_rate,"
         "lower_rate,lower_bound,regime,audit_pass\n";
}

inline std::string csv_line(const CsvRow& row) {
  const auto& c = row.report.config;
  std::ostringstream out;
  out << row.parameter << ',' << format_double(row.value) << ',' << row.instance << ','
      << to_string(c.protocol) << ',' << c.m << ',' << c.n << ',' << c.k << ',' << c.l << ','
      << format_double(c.p) << ',' << row.report.trials << ','
      << format_double(row.report.mean_loss) << ',' << format_double(row.report.std_error) << ','
      << format_double(row.prediction.upper_rate) << ',' << format_double(row.prediction.lower_rate)
      << ','
      << format_double(lower_bound(static_cast<double>(c.m), static_cast<double>(c.n),
                                   static_cast<double>(c.k), static_cast<double>(c.l), c.p))
      << ',' << to_string(row.prediction.regime) << ',' << (row.report.audit_pass ? 1 : 0) << '\n';
  return out.str();
}

// SHA-1 of "blob <size>\0<content>", as `git hash-object` prints it.
inline std::string git_blob_hash(const std::string& content) {
  const std::string blob = "blob " + std::to_string(content.size()) + std::string(1, '\0') + content;
  unsigned char digest[SHA_DIGEST_LENGTH];
  SHA1(reinterpret_cast<const unsigned char*>(blob.data()), blob.size(), digest);
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned char b : digest) {
    out.push_back(hex[b >> 4]);
    out.push_back(hex[b & 15]);
  }
  return out;
}

inline nlohmann::json config_json(const RunOptions& opts) {
  const auto& c = opts.config;
  return {{"m", c.m},
          {"n", c.n},
          {"k", c.k},
          {"l", c.l},
          {"p", c.p},
          {"seed", c.seed},
          {"const_scale", c.const_scale},
          {"protocol", std::string(to_string(c.protocol))},
          {"family", opts.families},
          {"trials", opts.trials},
          {"param", opts.param},
          {"grid", opts.grid}};
}

// Workers are left out of the hashed inputs: they never change the output.
inline nlohmann::json make_manifest(const std::string& command, const RunOptions& opts,
                                    const std::string& config_text, const std::string& csv) {
  const nlohmann::json inputs = config_json(opts);
  nlohmann::json m;
  m["command"] = command;
  m["config"] = inputs;
  m["seed"] = opts.config.seed;
  m["workers"] = opts.workers;
  m["input_hash"] = git_blob_hash(inputs.dump() + "\n" + config_text);
  m["output_hash"] = git_blob_hash(csv);
  return m;
}

}  // namespace distest::cli
