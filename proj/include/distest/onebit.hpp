#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

#include "distest/core.hpp"
#include "distest/random.hpp"

namespace distest {

// q such that P[Bin(n, q) >= theta] == target. The tail equals the regularized
// incomplete beta I_q(theta, n - theta + 1), so this is its inverse in q.
inline double invert_binomial_tail(std::size_t n, std::size_t theta, double target) {
  if (theta > n) throw std::invalid_argument("invert_binomial_tail: theta > n");
  if (std::isnan(target)) throw std::invalid_argument("invert_binomial_tail: NaN target");
  if (theta == 0 || target <= 0.0) return 0.0;  // tail is identically 1 when theta == 0
  if (target >= 1.0) return 1.0;
  return boost::math::ibeta_inv(static_cast<double>(theta), static_cast<double>(n - theta + 1),
                                target);
}

// Bernoulli parameter estimation where each of `users` users holds a count
// c ~ Bin(n, q) and sends one bit, in arrival order.
//
// First about half the users localize q by bisection: each group compares its
// counts with the midpoint of the current interval and the majority picks a
// half. Everyone else reports 1{c >= theta} with theta at the final interval's
// midpoint, where the tail is near 1/2 and a single bit carries the most
// information. The decoder inverts the binomial tail at the observed fraction
// of ones. The result is not forced into the localized interval: late groups
// vote on midpoints within a standard deviation of q and often pick the wrong
// half, and clamping would turn that into bias.
//
// The session only ever sees bits, so encoders and decoder can share it.
class OneBitSession {
 public:
  OneBitSession(std::size_t users, std::size_t n, Stream coin)
      : users_(users), n_(n), coin_(coin) {
    if (users == 0) throw std::invalid_argument("onebit: no users");
    if (n == 0) throw std::invalid_argument("onebit: n must be positive");
    const double floor_width = 4.0 / static_cast<double>(n);
    const std::size_t max_rounds = ceil_log2(n);
    double width = 1.0;
    while (rounds_ < max_rounds && width / 2.0 >= floor_width) {
      width /= 2.0;
      ++rounds_;
    }
    const std::size_t budget = users / 2;
    group_size_ = rounds_ == 0 ? 0 : budget / rounds_;
    if (group_size_ == 0) rounds_ = 0;
  }

  std::size_t users() const noexcept { return users_; }
  std::size_t rounds() const noexcept { return rounds_; }
  std::size_t group_size() const noexcept { return group_size_; }
  std::size_t localization_users() const noexcept { return rounds_ * group_size_; }
  std::size_t refinement_users() const noexcept { return users_ - localization_users(); }
  bool done() const noexcept { return seen_ == users_; }
  double left() const noexcept { return a_; }
  double right() const noexcept { return b_; }

  // Threshold for the next user's bit 1{count >= threshold}.
  std::size_t threshold() const {
    if (done()) throw std::logic_error("onebit: all users have reported");
    return midpoint_threshold();
  }

  bool encode(std::size_t count) const { return count >= threshold(); }

  void record(bool bit) {
    if (done()) throw std::logic_error("onebit: all users have reported");
    if (seen_ < localization_users()) {
      group_ones_ += bit ? 1 : 0;
      if (++group_seen_ == group_size_) close_group();
    } else {
      refine_ones_ += bit ? 1 : 0;
    }
    ++seen_;
  }

  double estimate() const {
    if (!done()) throw std::logic_error("onebit: estimate requested before all users reported");
    const double frac =
        static_cast<double>(refine_ones_) / static_cast<double>(refinement_users());
    const double inv_n = 1.0 / static_cast<double>(n_);
    if (refine_ones_ == 0 && a_ < inv_n) return 0.0;
    if (refine_ones_ == refinement_users() && b_ > 1.0 - inv_n) return 1.0;
    return invert_binomial_tail(n_, midpoint_threshold(), frac);
  }

 private:
  std::size_t midpoint_threshold() const {
    const double mid = (a_ + b_) / 2.0;
    const auto t = static_cast<std::size_t>(std::ceil(static_cast<double>(n_) * mid));
    return std::clamp<std::size_t>(t, 1, n_);
  }

  void close_group() {
    const double mid = (a_ + b_) / 2.0;
    bool go_right = 2 * group_ones_ > group_size_;
    if (2 * group_ones_ == group_size_) go_right = (coin_() & 1U) != 0;
    (go_right ? a_ : b_) = mid;
    group_ones_ = 0;
    group_seen_ = 0;
  }

  std::size_t users_;
  std::size_t n_;
  Stream coin_;
  std::size_t rounds_ = 0;
  std::size_t group_size_ = 0;
  double a_ = 0.0;
  double b_ = 1.0;
  std::size_t seen_ = 0;
  std::size_t group_seen_ = 0;
  std::size_t group_ones_ = 0;
  std::size_t refine_ones_ = 0;
};

struct OneBitTask {
  std::size_t n = 1;
  std::vector<std::size_t> counts;  // one per user, arrival order
};

struct OneBitOutcome {
  double estimate = 0.0;
  std::vector<bool> bits;
};

inline OneBitOutcome onebit_estimate(const OneBitTask& task, const SharedRandomness& randomness) {
  if (task.counts.empty()) throw std::invalid_argument("onebit: m_prime must be positive");
  OneBitSession session(task.counts.size(), task.n, randomness.stream("onebit-tiebreak"));
  OneBitOutcome out;
  out.bits.reserve(task.counts.size());
  for (auto c : task.counts) {
    if (c > task.n) throw std::invalid_argument("onebit: count exceeds n");
    const bool bit = session.encode(c);
    out.bits.push_back(bit);
    session.record(bit);
  }
  out.estimate = session.estimate();
  return out;
}

}  // namespace distest
