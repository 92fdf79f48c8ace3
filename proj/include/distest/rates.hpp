#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <string_view>

namespace distest {

// Predicted minimax rates, constants dropped and logarithms (base 2) reported
// separately. l may be +infinity for the unconstrained problem.

enum class Regime { central, high_n, medium_n, tight_budget, low_n, n_equals_1, uncovered };

inline std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::central: return "central";
    case Regime::high_n: return "high-n";
    case Regime::medium_n: return "medium-n";
    case Regime::tight_budget: return "tight-budget";
    case Regime::low_n: return "low-n";
    case Regime::n_equals_1: return "n-equals-1";
    case Regime::uncovered: return "uncovered";
  }
  return "?";
}

struct RegimePrediction {
  Regime regime = Regime::uncovered;
  double upper_rate = std::numeric_limits<double>::quiet_NaN();
  double lower_rate = std::numeric_limits<double>::quiet_NaN();
  double log_factor = 1.0;  // polylog slack between the two, where the theory has one
  bool matched = false;     // upper and lower agree up to log_factor
  std::string notes;
};

inline constexpr double kInfiniteBudget = std::numeric_limits<double>::infinity();

namespace detail {

inline double lg(double x) { return std::max(1.0, std::log2(x)); }

}  // namespace detail

// Rate of the unconstrained problem: k^(1-p/2)/(mn)^(p/2) for p <= 2 and
// 1/(mn)^(p/2) above. The change in k-dependence at p = 2 is the elbow.
inline double central_rate(double m, double n, double k, double p) {
  const double mn = std::pow(m * n, p / 2.0);
  return p <= 2.0 ? std::pow(k, 1.0 - p / 2.0) / mn : 1.0 / mn;
}

inline RegimePrediction classify_regime(double m, double n, double k, double l, double p) {
  RegimePrediction out;
  const double central = central_rate(m, n, k, p);
  auto matched = [&](Regime r, double rate, double log_factor, std::string notes) {
    out.regime = r;
    out.upper_rate = rate;
    out.lower_rate = rate;
    out.log_factor = log_factor;
    out.matched = true;
    out.notes = std::move(notes);
    return out;
  };

  if (std::isinf(l)) return matched(Regime::central, central, 1.0, "no communication constraint");

  const double two_l = std::exp2(l);
  const double q = std::max(p / 2.0, 1.0);
  const double ml = m * l;

  if (n == 1.0) {
    if (p >= 2.0 && m * std::min(two_l, std::pow(k, 2.0 / p)) >= k * k) {
      const double rate = std::max(k / std::pow(m * two_l, p / 2.0), 1.0 / std::pow(m, p / 2.0));
      return matched(Regime::n_equals_1, rate, 1.0, "random hashing; rate k/(m 2^l)^(p/2) v 1/m^(p/2)");
    }
    if (p < 2.0 && two_l < k && m * two_l >= k * k) {
      return matched(Regime::n_equals_1, k / std::pow(m * two_l, p / 2.0), 1.0,
                     "random hashing; rate k/(m 2^l)^(p/2)");
    }
  }

  if (n >= k && std::pow(l, q) <= k && ml >= k) {
    const double rate = std::max(k / std::pow(m * n * l, p / 2.0), central);
    return matched(Regime::high_n, rate, std::pow(detail::lg(k), p / 2.0),
                   "adaptive refinement; rate k/(mnl)^(p/2) v central");
  }

  if (k / std::pow(two_l, q) <= n && n < k && std::pow(l, q) <= n &&
      (p <= 2.0 ? ml >= k : ml >= n)) {
    if (p <= 2.0) {
      const double rate = std::max(std::pow(k, 1.0 - p / 2.0) / std::pow(ml, p / 2.0), central);
      return matched(Regime::medium_n, rate, std::pow(detail::lg(k / n + 1.0) * detail::lg(k), p / 2.0),
                     "successive refinement; rate k^(1-p/2)/(ml)^(p/2) v central, up to log^(p/2)(k/n+1)");
    }
    const double rate =
        std::max(1.0 / (std::pow(ml, p / 2.0) * std::pow(n, p / 2.0 - 1.0)), central);
    return matched(Regime::medium_n, rate,
                   std::pow(std::max(detail::lg(k), l), p / 2.0) * detail::lg(n),
                   "sample compression; rate 1/((ml)^(p/2) n^(p/2-1)) v central, up to log^(p/2) k");
  }

  const bool tight_budget = (p <= 2.0 || k <= n) ? ml < k : ml < n;
  if (two_l >= k && l <= n && tight_budget) {
    const double rate = std::max(1.0 / std::pow(ml, p - 1.0), central);
    const double logs = p <= 2.0 ? std::pow(detail::lg(k), p / 2.0)
                                 : std::pow(std::max(detail::lg(k), detail::lg(m * n) * detail::lg(n)), p);
    return matched(Regime::tight_budget, rate, logs, "thresholding; rate 1/(ml)^(p-1) v central");
  }

  if (n < k / std::pow(two_l, q) && m * n * two_l >= k * k) {
    const double lower = k / std::pow(m * n * two_l, p / 2.0);
    if (p <= 2.0) {
      return matched(Regime::low_n, lower, 1.0, "successive refinement; rate k/(mn 2^l)^(p/2)");
    }
    out.regime = Regime::low_n;
    out.upper_rate = std::pow(k / (m * n * two_l), p / 2.0);
    out.lower_rate = lower;
    out.matched = false;
    out.notes = "open gap: upper (k/(mn2^l))^(p/2), lower k/(mn2^l)^(p/2)";
    return out;
  }

  out.regime = Regime::uncovered;
  out.notes = "no row of the rate table applies";
  return out;
}

// Largest applicable lower bound: central term, the tight-budget bound when
// 2ml < k, and the three branches of the regular-regime bound.
inline double lower_bound(double m, double n, double k, double l, double p) {
  double best = central_rate(m, n, k, p);
  if (std::isinf(l)) return best;

  const double two_l = std::exp2(l);
  const double ml = m * l;
  const double log_k = detail::lg(k);
  const double log_n = detail::lg(n);

  if (2.0 * ml < k) best = std::max(best, 1.0 / std::pow(ml, p - 1.0));
  if (m * n * two_l > k * k) best = std::max(best, k / std::pow(m * n * two_l, p / 2.0));

  if (p <= 2.0) {
    if (n >= k * log_k && m > (k / l) * (k / l) && l <= k) {
      best = std::max(best, k / std::pow(m * n * l, p / 2.0));
    }
    if (n < k * log_k && m > (k / l) * (k / l) && l <= n / log_k) {
      best = std::max(best, std::pow(k, 1.0 - p / 2.0) / std::pow(ml * log_k, p / 2.0));
    }
  }
  if (p >= 2.0) {
    if (n >= k * log_k && m > (k / l) * (k / l) && l <= std::pow(k, 2.0 / p)) {
      best = std::max(best, k / std::pow(m * n * l, p / 2.0));
    }
    const double eff = n / log_n;
    if (n < k * log_k && m > (eff / l) * (eff / l) && l <= std::pow(eff, 2.0 / p)) {
      best = std::max(best, 1.0 / (std::pow(ml, p / 2.0) * std::pow(n, p / 2.0 - 1.0) * log_n));
    }
  }
  return best;
}

}  // namespace distest
