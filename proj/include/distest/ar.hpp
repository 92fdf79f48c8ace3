#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "distest/core.hpp"
#include "distest/onebit.hpp"
#include "distest/random.hpp"
#include "distest/transcript.hpp"

namespace distest {

// Which one-bit task each (encoder, bit slot) runs.
struct SlotAssignment {
  struct Slot {
    std::size_t symbol;
    std::size_t replica;
  };

  std::size_t encoders = 0;
  std::size_t slots_per_encoder = 0;
  std::vector<std::vector<Slot>> by_encoder;  // by_encoder[e][bit position]
  std::vector<std::size_t> replicas;          // per symbol

  std::size_t max_slots_used() const {
    std::size_t most = 0;
    for (const auto& s : by_encoder) most = std::max(most, s.size());
    return most;
  }
};

// Lays the replica list (symbol 0's replicas, then symbol 1's, ...) out in
// column-major order over an encoders x slots grid: position j goes to encoder
// j % E, slot j / E. A symbol's replicas are consecutive, so as long as a symbol
// has at most E of them they land on distinct encoders.
inline SlotAssignment schedule_slots(const std::vector<std::size_t>& counts, std::size_t encoders,
                                     std::size_t l) {
  const std::size_t total = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  if (total > encoders * l) throw std::invalid_argument("schedule_slots: more replicas than slots");
  SlotAssignment plan;
  plan.encoders = encoders;
  plan.slots_per_encoder = l;
  plan.by_encoder.resize(encoders);
  plan.replicas = counts;
  std::size_t j = 0;
  for (std::size_t w = 0; w < counts.size(); ++w) {
    if (counts[w] > encoders) throw std::invalid_argument("schedule_slots: symbol needs more encoders than exist");
    for (std::size_t r = 0; r < counts[w]; ++r, ++j) plan.by_encoder[j % encoders].push_back({w, r});
  }
  return plan;
}

// Rough pass: every symbol gets floor(E * min(l,k) / k) one-bit replicas, E being
// the number of rough-pass encoders.
inline SlotAssignment allocate_rough(std::size_t encoders, std::size_t k, std::size_t l) {
  if (k == 0) throw std::invalid_argument("allocate_rough: k must be positive");
  const std::size_t per_symbol = encoders * std::min(l, k) / k;
  if (per_symbol == 0) throw std::invalid_argument("insufficient budget for rough pass");
  return schedule_slots(std::vector<std::size_t>(k, per_symbol), encoders, l);
}

// m(w) = floor(m l (p1(w) + 1/k) / 4) capped at floor(m/2), with the rough
// estimate first divided by its total if that exceeds one.
inline std::vector<std::size_t> refine_counts(std::span<const double> rough, std::size_t m,
                                              std::size_t l, std::size_t k) {
  if (rough.size() != k) throw std::invalid_argument("refine_counts: rough estimate has wrong size");
  const double total = detail::stable_sum(rough);
  const double scale = total > 1.0 ? 1.0 / total : 1.0;
  const double ml = static_cast<double>(m) * static_cast<double>(l);
  std::vector<std::size_t> counts(k);
  for (std::size_t w = 0; w < k; ++w) {
    const double share = std::max(rough[w], 0.0) * scale + 1.0 / static_cast<double>(k);
    const double want = std::floor(ml * share / 4.0 + 1e-9);
    counts[w] = std::min(static_cast<std::size_t>(want), m / 2);
  }
  return counts;
}

// Removes replicas one at a time from the currently largest request (lowest
// symbol on ties) until the total fits.
inline void trim_to_capacity(std::vector<std::size_t>& counts, std::size_t capacity) {
  std::size_t total = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  while (total > capacity) {
    auto it = std::max_element(counts.begin(), counts.end());
    --*it;
    --total;
  }
}

struct OneBitPass {
  std::vector<double> estimate;  // NaN for symbols with no replicas
  std::vector<BitMessage> messages;
  SlotAssignment plan;
};

// Every replica of symbol w is a user of w's one-bit session holding
// count = #{j : W_ij = w}. Encoders speak in index order.
inline OneBitPass run_onebit_pass(const SampleView& view, std::size_t l, SlotAssignment plan,
                                  const SharedRandomness& randomness) {
  const std::size_t k = view.k();
  if (plan.encoders != view.m()) throw std::invalid_argument("onebit pass: plan/encoder mismatch");
  std::vector<OneBitSession> sessions;
  sessions.reserve(k);
  for (std::size_t w = 0; w < k; ++w) {
    sessions.emplace_back(std::max<std::size_t>(plan.replicas[w], 1), view.n(),
                          randomness.stream("tiebreak", w));
  }
  OneBitPass out;
  out.messages.reserve(view.m());
  for (std::size_t e = 0; e < view.m(); ++e) {
    BitMessage msg(l);
    const auto& slots = plan.by_encoder[e];
    if (slots.size() > l) throw std::logic_error("onebit pass: encoder over budget");
    for (std::size_t s = 0; s < slots.size(); ++s) {
      auto& session = sessions[slots[s].symbol];
      const bool bit = session.encode(view.count(e, static_cast<std::uint32_t>(slots[s].symbol)));
      session.record(bit);
      msg.bits[s] = bit;
    }
    out.messages.push_back(std::move(msg));
  }
  out.estimate.resize(k);
  for (std::size_t w = 0; w < k; ++w) {
    out.estimate[w] = plan.replicas[w] == 0 ? std::numeric_limits<double>::quiet_NaN()
                                            : sessions[w].estimate();
  }
  out.plan = std::move(plan);
  return out;
}

inline OneBitPass rough_pass(const SampleView& view, std::size_t l,
                             const SharedRandomness& randomness) {
  return run_onebit_pass(view, l, allocate_rough(view.m(), view.k(), l), randomness);
}

struct ArOutcome {
  std::vector<double> rough;
  std::vector<double> estimate;
  std::vector<std::size_t> refine_counts;
  std::vector<BitMessage> messages;
};

// The first ceil(m/2) encoders run the rough pass; the rest re-run one-bit
// estimation with m(w) replicas per symbol. The rough estimate reaches the
// refining encoders as free decoder-to-encoder side information.
inline ArOutcome ar_estimate(const SampleView& view, std::size_t l,
                             const SharedRandomness& randomness) {
  const std::size_t m = view.m();
  const std::size_t first = (m + 1) / 2;
  const std::size_t second = m - first;
  OneBitPass rough = rough_pass(view.rows(0, first), l, randomness.child("rough"));

  ArOutcome out;
  out.rough = rough.estimate;
  out.refine_counts = refine_counts(out.rough, m, l, view.k());
  trim_to_capacity(out.refine_counts, second * l);
  out.estimate = out.rough;
  out.messages = std::move(rough.messages);
  if (second > 0) {
    OneBitPass refined = run_onebit_pass(view.rows(first, second), l,
                                         schedule_slots(out.refine_counts, second, l),
                                         randomness.child("refine"));
    for (std::size_t w = 0; w < view.k(); ++w) {
      if (out.refine_counts[w] > 0) out.estimate[w] = refined.estimate[w];
    }
    for (auto& msg : refined.messages) out.messages.push_back(std::move(msg));
  }
  return out;
}

inline ProtocolResult run_ar(const ProtocolConfig& config, const SampleMatrix& samples,
                             const SharedRandomness& randomness) {
  config.validate();
  auto out = ar_estimate(samples.view(), config.l, randomness);
  return make_result(std::move(out.estimate), std::move(out.messages));
}

}  // namespace distest
