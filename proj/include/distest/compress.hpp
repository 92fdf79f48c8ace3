#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "distest/ar.hpp"
#include "distest/asr.hpp"
#include "distest/core.hpp"
#include "distest/transcript.hpp"

namespace distest {

// Bits needed to index one of k symbols (at least one).
inline std::size_t symbol_bits(std::size_t k) { return std::max<std::size_t>(1, ceil_log2(k)); }

struct TransmitOutcome {
  std::vector<double> estimate;  // empirical histogram of everything received
  std::vector<BitMessage> messages;
  std::size_t received = 0;      // M_1
  std::size_t per_encoder = 0;   // n0
};

// Each encoder sends its first n0 = min(floor(l / ceil(log2 k)), n) samples verbatim.
inline TransmitOutcome transmit_samples(const SampleView& view, std::size_t l) {
  const std::size_t b = symbol_bits(view.k());
  if (l < b) throw std::invalid_argument("cannot encode one sample");
  TransmitOutcome out;
  out.per_encoder = std::min(l / b, view.n());
  std::vector<std::size_t> counts(view.k(), 0);
  out.messages.reserve(view.m());
  for (std::size_t e = 0; e < view.m(); ++e) {
    BitMessage msg(l);
    const auto row = view.row(e);
    for (std::size_t j = 0; j < out.per_encoder; ++j) {
      msg.write_uint(j * b, b, row[j]);
      ++counts[msg.read_uint(j * b, b)];
    }
    out.messages.push_back(std::move(msg));
  }
  out.received = view.m() * out.per_encoder;
  out.estimate.assign(view.k(), 0.0);
  if (out.received > 0) {
    for (std::size_t w = 0; w < view.k(); ++w) {
      out.estimate[w] = static_cast<double>(counts[w]) / static_cast<double>(out.received);
    }
  }
  return out;
}

// Symbols whose rough estimate strictly exceeds the threshold, in ascending
// order. Projected samples use index i for members[i] and members.size() for
// everything else.
struct SupportSet {
  std::size_t k = 0;
  double threshold = 0.0;
  std::vector<std::size_t> members;
  std::vector<std::size_t> index;  // index[w] = position in members, or sentinel()

  std::size_t sentinel() const noexcept { return members.size(); }
  bool contains(std::size_t w) const { return index[w] != sentinel(); }
};

inline SupportSet build_support(std::span<const double> rough, double threshold) {
  if (!(threshold > 0.0)) throw std::invalid_argument("build_support: threshold must be positive");
  SupportSet set;
  set.k = rough.size();
  set.threshold = threshold;
  for (std::size_t w = 0; w < rough.size(); ++w) {
    if (rough[w] > threshold) set.members.push_back(w);
  }
  set.index.assign(set.k, set.members.size());
  for (std::size_t i = 0; i < set.members.size(); ++i) set.index[set.members[i]] = i;
  return set;
}

inline SampleMatrix project_samples(const SampleView& view, const SupportSet& support) {
  if (view.k() != support.k) throw std::invalid_argument("project_samples: alphabet mismatch");
  return map_samples(view, support.members.size() + 1,
                     [&](std::uint32_t w) { return support.index[w]; });
}

struct CompressOutcome {
  std::vector<double> rough;     // p1
  std::vector<double> second;    // p2
  std::vector<double> estimate;  // stitched
  SupportSet support;
  std::vector<BitMessage> messages;
};

// Thirds: raw samples for a rough histogram, raw samples again, then AR on the
// samples projected to the rough estimate's heavy symbols (above 2/n).
inline CompressOutcome compress_refine(const SampleView& view, std::size_t l,
                                       const SharedRandomness& randomness) {
  const std::size_t m = view.m();
  const std::size_t g1 = m / 3;
  const std::size_t g2 = m / 3;
  const std::size_t g3 = m - g1 - g2;
  if (g1 == 0) throw std::invalid_argument("compress: need at least three encoders");

  CompressOutcome out;
  TransmitOutcome first = transmit_samples(view.rows(0, g1), l);
  out.rough = first.estimate;
  out.support = build_support(out.rough, 2.0 / static_cast<double>(view.n()));
  TransmitOutcome second = transmit_samples(view.rows(g1, g2), l);
  out.second = second.estimate;
  out.estimate = out.second;

  out.messages = std::move(first.messages);
  for (auto& msg : second.messages) out.messages.push_back(std::move(msg));

  if (out.support.members.empty()) {
    for (std::size_t i = 0; i < g3; ++i) out.messages.emplace_back(l);
    return out;
  }
  const SampleMatrix projected = project_samples(view.rows(g1 + g2, g3), out.support);
  ArOutcome refined = ar_estimate(projected.view(), l, randomness.child("refine"));
  for (std::size_t i = 0; i < out.support.members.size(); ++i) {
    out.estimate[out.support.members[i]] = refined.estimate[i];
  }
  for (auto& msg : refined.messages) out.messages.push_back(std::move(msg));
  return out;
}

inline ProtocolResult run_compress_refine(const ProtocolConfig& config, const SampleMatrix& samples,
                                          const SharedRandomness& randomness) {
  config.validate();
  auto out = compress_refine(samples.view(), config.l, randomness);
  return make_result(std::move(out.estimate), std::move(out.messages));
}

enum class ThresholdVariant { p_le2, p_gt2 };

// k' = ml / (2000 c log2(mn) log2(n)), each log floored at 1.
inline double threshold_k_prime(std::size_t m, std::size_t n, std::size_t l, double const_scale) {
  const double ml = static_cast<double>(m) * static_cast<double>(l);
  const double log_mn = std::max(1.0, std::log2(static_cast<double>(m) * static_cast<double>(n)));
  const double log_n = std::max(1.0, std::log2(static_cast<double>(n)));
  return ml / (2000.0 * const_scale * log_mn * log_n);
}

struct ThresholdOutcome {
  std::vector<double> rough;
  std::vector<double> estimate;
  SupportSet support;
  double k_prime = 0.0;  // p_gt2 only
  std::vector<BitMessage> messages;
};

// First half: raw samples for a rough histogram. p <= 2 keeps a second
// histogram only on symbols above 2/(ml). p > 2 keeps symbols above 2/k' and
// estimates them with the successive-refinement protocol on projected samples.
// Everything off the support is estimated as exactly zero.
inline ThresholdOutcome threshold_estimate(const SampleView& view, std::size_t l,
                                           ThresholdVariant variant, double const_scale,
                                           const SharedRandomness& randomness) {
  const std::size_t m = view.m();
  const std::size_t h1 = m / 2;
  const std::size_t h2 = m - h1;
  if (h1 == 0) throw std::invalid_argument("threshold: need at least two encoders");

  ThresholdOutcome out;
  double threshold = 2.0 / (static_cast<double>(m) * static_cast<double>(l));
  if (variant == ThresholdVariant::p_gt2) {
    out.k_prime = threshold_k_prime(m, view.n(), l, const_scale);
    if (out.k_prime < 1.0) throw std::invalid_argument("budget too tight even for thresholding");
    threshold = 2.0 / out.k_prime;
  }

  TransmitOutcome first = transmit_samples(view.rows(0, h1), l);
  out.rough = first.estimate;
  out.support = build_support(out.rough, threshold);
  out.messages = std::move(first.messages);
  out.estimate.assign(view.k(), 0.0);

  if (variant == ThresholdVariant::p_le2) {
    TransmitOutcome second = transmit_samples(view.rows(h1, h2), l);
    for (auto w : out.support.members) out.estimate[w] = second.estimate[w];
    for (auto& msg : second.messages) out.messages.push_back(std::move(msg));
    return out;
  }

  if (out.support.members.empty()) {
    for (std::size_t i = 0; i < h2; ++i) out.messages.emplace_back(l);
    return out;
  }
  const SampleMatrix projected = project_samples(view.rows(h1, h2), out.support);
  AsrOutcome refined = asr_estimate(projected.view(), l, false, randomness.child("refine"));
  for (std::size_t i = 0; i < out.support.members.size(); ++i) {
    out.estimate[out.support.members[i]] = refined.estimate[i];
  }
  for (auto& msg : refined.messages) out.messages.push_back(std::move(msg));
  return out;
}

inline ProtocolResult run_threshold(const ProtocolConfig& config, const SampleMatrix& samples,
                                    ThresholdVariant variant, const SharedRandomness& randomness) {
  config.validate();
  auto out = threshold_estimate(samples.view(), config.l, variant, config.const_scale, randomness);
  return make_result(std::move(out.estimate), std::move(out.messages));
}

}  // namespace distest
