#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "distest/random.hpp"

namespace distest {

inline constexpr double kSimplexTolerance = 1e-9;

// ceil(log2(x)) for x >= 1; 0 for x <= 1.
constexpr std::size_t ceil_log2(std::size_t x) noexcept {
  std::size_t bits = 0;
  while (bits < 64 && (std::size_t{1} << bits) < x) ++bits;
  return bits;
}

namespace detail {

inline void check_unit_entries(std::span<const double> probs, const char* what) {
  for (double v : probs) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw std::invalid_argument(std::string(what) + ": entry outside [0,1]");
    }
  }
}

// Neumaier compensated sum.
inline double stable_sum(std::span<const double> xs) noexcept {
  double sum = 0.0;
  double c = 0.0;
  for (double x : xs) {
    const double t = sum + x;
    c += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
    sum = t;
  }
  return sum + c;
}

}  // namespace detail

// Probability mass over k symbols.
class Distribution {
 public:
  explicit Distribution(std::vector<double> probs) : probs_(std::move(probs)) {
    if (probs_.empty()) throw std::invalid_argument("Distribution: empty alphabet");
    detail::check_unit_entries(probs_, "Distribution");
    if (std::abs(detail::stable_sum(probs_) - 1.0) > kSimplexTolerance) {
      throw std::invalid_argument("Distribution: entries do not sum to 1");
    }
  }

  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t w) const { return probs_[w]; }
  std::span<const double> probs() const noexcept { return probs_; }

 private:
  std::vector<double> probs_;
};

// Nonnegative mass with total at most one; the decoder's nominal output space.
class SubDistribution {
 public:
  explicit SubDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
    if (probs_.empty()) throw std::invalid_argument("SubDistribution: empty alphabet");
    detail::check_unit_entries(probs_, "SubDistribution");
    if (detail::stable_sum(probs_) > 1.0 + kSimplexTolerance) {
      throw std::invalid_argument("SubDistribution: total mass exceeds 1");
    }
  }
  SubDistribution(const Distribution& d)  // NOLINT(google-explicit-constructor)
      : probs_(d.probs().begin(), d.probs().end()) {}

  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t w) const { return probs_[w]; }
  std::span<const double> probs() const noexcept { return probs_; }

 private:
  std::vector<double> probs_;
};

// Read-only window over consecutive encoders' rows of a sample matrix.
class SampleView {
 public:
  SampleView(std::span<const std::uint32_t> data, std::size_t m, std::size_t n, std::size_t k)
      : data_(data), m_(m), n_(n), k_(k) {}

  std::size_t m() const noexcept { return m_; }
  std::size_t n() const noexcept { return n_; }
  std::size_t k() const noexcept { return k_; }

  std::span<const std::uint32_t> row(std::size_t i) const { return data_.subspan(i * n_, n_); }

  SampleView rows(std::size_t begin, std::size_t count) const {
    if (begin + count > m_) throw std::out_of_range("SampleView::rows");
    return SampleView(data_.subspan(begin * n_, count * n_), count, n_, k_);
  }

  std::size_t count(std::size_t i, std::uint32_t w) const {
    const auto r = row(i);
    return static_cast<std::size_t>(std::count(r.begin(), r.end(), w));
  }

 private:
  std::span<const std::uint32_t> data_;
  std::size_t m_;
  std::size_t n_;
  std::size_t k_;
};

// m x n symbol indices; row i holds encoder i's samples.
class SampleMatrix {
 public:
  SampleMatrix(std::size_t m, std::size_t n, std::size_t k, std::vector<std::uint32_t> data)
      : m_(m), n_(n), k_(k), data_(std::move(data)) {
    if (data_.size() != m_ * n_) throw std::invalid_argument("SampleMatrix: shape mismatch");
    for (auto w : data_) {
      if (w >= k_) throw std::invalid_argument("SampleMatrix: symbol index >= k");
    }
  }

  std::size_t m() const noexcept { return m_; }
  std::size_t n() const noexcept { return n_; }
  std::size_t k() const noexcept { return k_; }
  std::span<const std::uint32_t> row(std::size_t i) const {
    return std::span<const std::uint32_t>(data_).subspan(i * n_, n_);
  }
  std::span<const std::uint32_t> data() const noexcept { return data_; }

  SampleView view() const { return SampleView(data_, m_, n_, k_); }
  SampleView rows(std::size_t begin, std::size_t count) const { return view().rows(begin, count); }

 private:
  std::size_t m_;
  std::size_t n_;
  std::size_t k_;
  std::vector<std::uint32_t> data_;
};

// Relabel every sample through `f`, producing a matrix over a new alphabet.
template <typename F>
SampleMatrix map_samples(const SampleView& view, std::size_t new_k, F&& f) {
  std::vector<std::uint32_t> out;
  out.reserve(view.m() * view.n());
  for (std::size_t i = 0; i < view.m(); ++i) {
    for (auto w : view.row(i)) out.push_back(static_cast<std::uint32_t>(f(w)));
  }
  return SampleMatrix(view.m(), view.n(), new_k, std::move(out));
}

enum class ProtocolKind {
  ar,             // adaptive refinement
  asr,            // adaptive successive refinement
  asr_tv,         // successive refinement with uniform frame allocation
  compress,       // sample compression + refinement
  threshold_le2,  // thresholding, p <= 2
  threshold_gt2,  // thresholding + refinement, p > 2
  hash,           // random hashing, n = 1
  plugin,         // raw sample transmission, empirical histogram
  onebit,         // single Bernoulli parameter via one-bit users (k = 2)
  uniform,        // constant 1/k estimator, sends zeros
};

inline std::string_view to_string(ProtocolKind kind) {
  switch (kind) {
    case ProtocolKind::ar: return "ar";
    case ProtocolKind::asr: return "asr";
    case ProtocolKind::asr_tv: return "asr_tv";
    case ProtocolKind::compress: return "compress";
    case ProtocolKind::threshold_le2: return "threshold_le2";
    case ProtocolKind::threshold_gt2: return "threshold_gt2";
    case ProtocolKind::hash: return "hash";
    case ProtocolKind::plugin: return "plugin";
    case ProtocolKind::onebit: return "onebit";
    case ProtocolKind::uniform: return "uniform";
  }
  return "?";
}

inline ProtocolKind parse_protocol(std::string_view name) {
  for (auto kind : {ProtocolKind::ar, ProtocolKind::asr, ProtocolKind::asr_tv,
                    ProtocolKind::compress, ProtocolKind::threshold_le2,
                    ProtocolKind::threshold_gt2, ProtocolKind::hash, ProtocolKind::plugin,
                    ProtocolKind::onebit, ProtocolKind::uniform}) {
    if (to_string(kind) == name) return kind;
  }
  throw std::invalid_argument("unknown protocol: " + std::string(name));
}

struct ProtocolConfig {
  std::size_t m = 1;
  std::size_t n = 1;
  std::size_t k = 2;
  std::size_t l = 1;
  double p = 2.0;
  std::uint64_t seed = 0;
  // Multiplies the regularity constants (1000, 2000, 4000) in the protocol preconditions.
  double const_scale = 1.0;
  ProtocolKind protocol = ProtocolKind::ar;

  void validate() const {
    if (m == 0 || n == 0 || k == 0) throw std::invalid_argument("config: m, n, k must be positive");
    if (l == 0) throw std::invalid_argument("config: l must be >= 1");
    if (!(p >= 1.0)) throw std::invalid_argument("config: p must be >= 1");
    if (!(const_scale > 0.0)) throw std::invalid_argument("config: const_scale must be > 0");
  }
};

// sum_w |a(w) - b(w)|^p
inline double lp_distance(std::span<const double> a, std::span<const double> b, double p) {
  if (a.size() != b.size()) throw std::invalid_argument("lp_distance: dimension mismatch");
  if (!(p >= 1.0)) throw std::invalid_argument("lp_distance: p must be >= 1");
  std::vector<double> terms(a.size());
  for (std::size_t w = 0; w < a.size(); ++w) {
    const double d = std::abs(a[w] - b[w]);
    terms[w] = p == 2.0 ? d * d : (p == 1.0 ? d : std::pow(d, p));
  }
  return detail::stable_sum(terms);
}

inline double lp_loss(std::span<const double> estimate, const Distribution& truth, double p) {
  return lp_distance(estimate, truth.probs(), p);
}

inline double lp_loss(const SubDistribution& estimate, const Distribution& truth, double p) {
  return lp_distance(estimate.probs(), truth.probs(), p);
}

// Per-coordinate projection onto [0,1]. The total is deliberately not capped.
inline std::vector<double> clip_to_unit(std::span<const double> estimate) {
  std::vector<double> out(estimate.begin(), estimate.end());
  for (double& v : out) {
    if (std::isnan(v)) throw std::invalid_argument("clip_to_unit: NaN entry");
    v = std::clamp(v, 0.0, 1.0);
  }
  return out;
}

// ((1+eps)/2, (1-eps)/2, 0, ..., 0), or the first two entries swapped.
inline Distribution make_two_point(double epsilon, std::size_t k, int which) {
  if (k < 2) throw std::invalid_argument("make_two_point: k must be >= 2");
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw std::invalid_argument("make_two_point: epsilon");
  if (which != 1 && which != 2) throw std::invalid_argument("make_two_point: which must be 1 or 2");
  std::vector<double> probs(k, 0.0);
  probs[0] = (1.0 + epsilon) / 2.0;
  probs[1] = (1.0 - epsilon) / 2.0;
  if (which == 2) std::swap(probs[0], probs[1]);
  return Distribution(std::move(probs));
}

struct InstanceFamily {
  enum class Kind { uniform, zipf, sparse, dirichlet, two_point };
  Kind kind = Kind::uniform;
  double param = 0.0;  // zipf exponent, sparse support size, dirichlet concentration, epsilon
  int which = 1;       // two_point only

  static InstanceFamily uniform() { return {Kind::uniform, 0.0, 1}; }
  static InstanceFamily zipf(double alpha) { return {Kind::zipf, alpha, 1}; }
  static InstanceFamily sparse(std::size_t s) { return {Kind::sparse, static_cast<double>(s), 1}; }
  static InstanceFamily point() { return sparse(1); }
  static InstanceFamily dirichlet(double alpha = 1.0) { return {Kind::dirichlet, alpha, 1}; }
  static InstanceFamily two_point(double eps, int which = 1) { return {Kind::two_point, eps, which}; }
};

inline std::string describe(const InstanceFamily& f) {
  auto num = [](double x) {
    std::string s = std::to_string(x);
    s.erase(s.find_last_not_of('0') + 1);
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
  };
  switch (f.kind) {
    case InstanceFamily::Kind::uniform: return "uniform";
    case InstanceFamily::Kind::zipf: return "zipf:" + num(f.param);
    case InstanceFamily::Kind::sparse: return "sparse:" + num(f.param);
    case InstanceFamily::Kind::dirichlet: return "dirichlet:" + num(f.param);
    case InstanceFamily::Kind::two_point:
      return "two_point:" + num(f.param) + ":" + std::to_string(f.which);
  }
  return "?";
}

// Accepts "uniform", "point", "zipf:A", "sparse:S", "dirichlet[:A]", "two_point:EPS[:1|2]".
inline InstanceFamily parse_family(std::string_view text) {
  const auto colon = text.find(':');
  const std::string head(text.substr(0, colon));
  std::string rest = colon == std::string_view::npos ? "" : std::string(text.substr(colon + 1));
  auto number = [&](double fallback) {
    if (rest.empty()) return fallback;
    std::size_t used = 0;
    const double v = std::stod(rest, &used);
    rest.erase(0, used);
    if (!rest.empty() && rest.front() == ':') rest.erase(0, 1);
    return v;
  };
  if (head == "uniform") return InstanceFamily::uniform();
  if (head == "point") return InstanceFamily::point();
  if (head == "zipf") return InstanceFamily::zipf(number(1.0));
  if (head == "sparse") return InstanceFamily::sparse(static_cast<std::size_t>(number(1.0)));
  if (head == "dirichlet") return InstanceFamily::dirichlet(number(1.0));
  if (head == "two_point") {
    const double eps = number(0.0);
    const int which = static_cast<int>(number(1.0));
    return InstanceFamily::two_point(eps, which);
  }
  throw std::invalid_argument("unknown instance family: " + std::string(text));
}

// Deterministic in (family, k, seed). Only dirichlet consumes the seed.
inline Distribution make_instance(const InstanceFamily& family, std::size_t k, std::uint64_t seed) {
  if (k == 0) throw std::invalid_argument("make_instance: k must be >= 1");
  std::vector<double> w(k, 0.0);
  switch (family.kind) {
    case InstanceFamily::Kind::uniform:
      std::fill(w.begin(), w.end(), 1.0);
      break;
    case InstanceFamily::Kind::zipf:
      if (!(family.param >= 0.0)) throw std::invalid_argument("zipf: exponent must be >= 0");
      for (std::size_t i = 0; i < k; ++i) w[i] = std::pow(static_cast<double>(i + 1), -family.param);
      break;
    case InstanceFamily::Kind::sparse: {
      const auto s = static_cast<std::size_t>(family.param);
      if (s < 1 || s > k) throw std::invalid_argument("sparse: support size must be in [1, k]");
      std::fill(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(s), 1.0);
      break;
    }
    case InstanceFamily::Kind::dirichlet: {
      if (!(family.param > 0.0)) throw std::invalid_argument("dirichlet: concentration must be > 0");
      Stream stream = SharedRandomness(seed).stream("dirichlet");
      std::gamma_distribution<double> gamma(family.param, 1.0);
      double total = 0.0;
      while (total <= 0.0) {
        for (double& v : w) v = gamma(stream);
        total = std::accumulate(w.begin(), w.end(), 0.0);
      }
      break;
    }
    case InstanceFamily::Kind::two_point:
      return make_two_point(family.param, k, family.which);
  }
  const double total = detail::stable_sum(w);
  for (double& v : w) v /= total;
  return Distribution(std::move(w));
}

// m x n i.i.d. draws by inverse-CDF lookup.
inline SampleMatrix sample(const Distribution& dist, std::size_t m, std::size_t n, Stream& stream) {
  const std::size_t k = dist.size();
  std::vector<double> cdf(k);
  std::partial_sum(dist.probs().begin(), dist.probs().end(), cdf.begin());
  // Symbols after the last positive mass never get drawn by the tail guard.
  std::size_t last = k - 1;
  while (last > 0 && dist[last] == 0.0) --last;
  std::vector<std::uint32_t> data(m * n);
  for (auto& x : data) {
    const double u = stream.uniform() * cdf[last];
    const auto it = std::upper_bound(cdf.begin(), cdf.begin() + static_cast<std::ptrdiff_t>(last), u);
    x = static_cast<std::uint32_t>(it - cdf.begin());
  }
  return SampleMatrix(m, n, k, std::move(data));
}

}  // namespace distest
