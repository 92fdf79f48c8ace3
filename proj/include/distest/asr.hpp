#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "distest/ar.hpp"
#include "distest/core.hpp"
#include "distest/random.hpp"
#include "distest/transcript.hpp"

namespace distest {

// Contiguous blocks of 2^l0 - 1 symbols; the last one may be shorter.
struct BlockPartition {
  std::size_t k = 0;
  std::size_t l0 = 0;
  std::size_t block_size = 0;
  std::size_t t = 0;

  std::size_t begin(std::size_t s) const { return s * block_size; }
  std::size_t end(std::size_t s) const { return std::min(k, (s + 1) * block_size); }
  std::size_t size(std::size_t s) const { return end(s) - begin(s); }
  std::size_t block_of(std::size_t w) const { return w / block_size; }
};

inline BlockPartition block_partition(std::size_t k, std::size_t l0) {
  if (l0 == 0) throw std::invalid_argument("block_partition: l0 must be >= 1");
  if (l0 > 40) throw std::invalid_argument("block_partition: l0 too large");
  if (k == 0) throw std::invalid_argument("block_partition: k must be positive");
  BlockPartition part;
  part.k = k;
  part.l0 = l0;
  part.block_size = (std::size_t{1} << l0) - 1;
  part.t = (k + part.block_size - 1) / part.block_size;
  return part;
}

// Assignment of l0-bit frames to blocks. Block s gets N_s frames laid out
// column-major over the encoders, so no encoder holds more than
// ceil(N_s / m') <= ceil(n0 r(s)) of them.
struct FramePlan {
  std::size_t encoders = 0;
  std::size_t n0 = 0;
  std::vector<double> r;
  std::vector<std::size_t> quota;  // N_s
  std::vector<std::size_t> cap;    // parts per encoder for block s
  static constexpr std::size_t kUnused = std::numeric_limits<std::size_t>::max();
  std::vector<std::vector<std::size_t>> block_of_frame;  // [encoder][frame] -> s or kUnused

  std::size_t frames_for(std::size_t e, std::size_t s) const {
    return static_cast<std::size_t>(
        std::count(block_of_frame[e].begin(), block_of_frame[e].end(), s));
  }
};

// r is used as given when it sums to at most one; callers normalize otherwise.
inline FramePlan make_frame_plan(std::size_t encoders, std::size_t n, std::size_t l,
                                 std::size_t l0, std::vector<double> r) {
  if (encoders == 0) throw std::invalid_argument("frame plan: no encoders");
  if (l0 == 0 || l0 > l) throw std::invalid_argument("frame plan: need 1 <= l0 <= l");
  FramePlan plan;
  plan.encoders = encoders;
  plan.n0 = std::min(l / l0, n);
  plan.r = std::move(r);
  const std::size_t t = plan.r.size();
  const std::size_t capacity = encoders * plan.n0;
  plan.quota.resize(t);
  plan.cap.resize(t);
  for (std::size_t s = 0; s < t; ++s) {
    const double want = static_cast<double>(capacity) * plan.r[s];
    plan.quota[s] = static_cast<std::size_t>(std::floor(want + 1e-9));
  }
  trim_to_capacity(plan.quota, capacity);
  plan.block_of_frame.assign(encoders, std::vector<std::size_t>(plan.n0, FramePlan::kUnused));
  std::size_t j = 0;
  for (std::size_t s = 0; s < t; ++s) {
    for (std::size_t q = 0; q < plan.quota[s]; ++q, ++j) {
      plan.block_of_frame[j % encoders][j / encoders] = s;
    }
    const double nominal = std::ceil(static_cast<double>(plan.n0) * plan.r[s] - 1e-9);
    const std::size_t per_encoder = (plan.quota[s] + encoders - 1) / encoders;
    plan.cap[s] = std::max<std::size_t>({static_cast<std::size_t>(std::max(nominal, 0.0)),
                                         per_encoder, 1});
  }
  return plan;
}

struct AsrSubOutcome {
  std::vector<double> estimate;                   // p_B(s) * p_s(w), length k
  std::vector<std::vector<double>> conditionals;  // p_s over each block
  std::vector<std::size_t> nonempty;              // N'_s
  std::vector<BitMessage> messages;
  FramePlan plan;
};

// One successive-refinement step. `view` holds the participating encoders,
// over the alphabet being partitioned.
inline AsrSubOutcome asr_sub(const SampleView& view, const BlockPartition& partition,
                             std::span<const double> block_estimate, std::size_t l,
                             bool uniform_alloc) {
  const std::size_t t = partition.t;
  if (block_estimate.size() != t) throw std::invalid_argument("asr_sub: block estimate has wrong size");
  if (partition.l0 > l) throw std::invalid_argument("asr_sub: l0 > l");
  if (view.k() != partition.k) throw std::invalid_argument("asr_sub: alphabet mismatch");

  std::vector<double> r(t);
  if (uniform_alloc) {
    std::fill(r.begin(), r.end(), 1.0 / static_cast<double>(t));
  } else {
    for (std::size_t s = 0; s < t; ++s) r[s] = std::max(block_estimate[s], 0.0);
    const double total = detail::stable_sum(r);
    if (total > 1.0) {
      for (double& x : r) x /= total;
    }
  }

  AsrSubOutcome out;
  out.plan = make_frame_plan(view.m(), view.n(), l, partition.l0, std::move(r));
  const FramePlan& plan = out.plan;
  const std::size_t l0 = partition.l0;

  std::vector<std::vector<std::size_t>> hits(t);
  for (std::size_t s = 0; s < t; ++s) hits[s].assign(partition.size(s), 0);
  out.nonempty.assign(t, 0);

  out.messages.reserve(view.m());
  std::vector<std::size_t> next_part(t);
  for (std::size_t e = 0; e < view.m(); ++e) {
    BitMessage msg(l);
    const auto samples = view.row(e);
    std::fill(next_part.begin(), next_part.end(), 0);
    for (std::size_t f = 0; f < plan.n0; ++f) {
      const std::size_t s = plan.block_of_frame[e][f];
      if (s == FramePlan::kUnused) continue;
      const std::size_t part_len = view.n() / plan.cap[s];
      const std::size_t part = next_part[s]++;
      std::uint64_t value = 0;
      for (std::size_t j = part * part_len; j < (part + 1) * part_len; ++j) {
        if (partition.block_of(samples[j]) == s) {
          value = samples[j] - partition.begin(s) + 1;
          break;
        }
      }
      msg.write_uint(f * l0, l0, value);

      // decoder side: read the frame back from the message
      const std::uint64_t got = msg.read_uint(f * l0, l0);
      if (got != 0) {
        ++out.nonempty[s];
        ++hits[s][got - 1];
      }
    }
    out.messages.push_back(std::move(msg));
  }

  out.estimate.assign(partition.k, 0.0);
  out.conditionals.resize(t);
  for (std::size_t s = 0; s < t; ++s) {
    auto& cond = out.conditionals[s];
    cond.resize(partition.size(s));
    for (std::size_t i = 0; i < cond.size(); ++i) {
      cond[i] = out.nonempty[s] == 0
                    ? 1.0 / static_cast<double>(cond.size())
                    : static_cast<double>(hits[s][i]) / static_cast<double>(out.nonempty[s]);
      out.estimate[partition.begin(s) + i] = block_estimate[s] * cond[i];
    }
  }
  return out;
}

// One refinement step recorded for inspection. Samples at this level are the
// original symbols divided by `divisor`.
struct AsrStep {
  std::size_t divisor = 1;
  BlockPartition partition;
  std::vector<double> block_estimate;
  std::vector<std::vector<double>> conditionals;
  std::vector<double> output;
};

struct AsrOutcome {
  int which_case = 0;
  std::vector<double> estimate;
  std::vector<BitMessage> messages;
  std::vector<AsrStep> steps;
  std::vector<std::size_t> chain;  // k_1, k_2, ... in case 3
};

namespace detail {

inline std::size_t saturating_mul(std::size_t a, std::size_t b) {
  if (a != 0 && b > std::numeric_limits<std::size_t>::max() / a) {
    return std::numeric_limits<std::size_t>::max();
  }
  return a * b;
}

// Smallest l0 with n (2^l0 - 1) >= k, i.e. ceil(log2(k/n + 1)).
inline std::size_t case2_frame_width(std::size_t k, std::size_t n) {
  std::size_t l0 = 1;
  while (saturating_mul(n, (std::size_t{1} << l0) - 1) < k) ++l0;
  return l0;
}

}  // namespace detail

// k_1 = k, k_{u+1} = ceil(k_u / (2^l - 1)) until k_{a+1} <= n (2^l - 1).
inline std::vector<std::size_t> reduction_chain(std::size_t k, std::size_t n, std::size_t l) {
  if (l < 2) throw std::invalid_argument("reduction chain needs l >= 2");
  const std::size_t b = l >= 40 ? std::numeric_limits<std::size_t>::max() : (std::size_t{1} << l) - 1;
  std::vector<std::size_t> chain{k};
  while (chain.back() > detail::saturating_mul(n, b)) chain.push_back((chain.back() + b - 1) / b);
  return chain;
}

inline AsrOutcome asr_estimate(const SampleView& view, std::size_t l, bool uniform_alloc,
                               const SharedRandomness& randomness, std::size_t divisor = 1) {
  const std::size_t m = view.m();
  const std::size_t n = view.n();
  const std::size_t k = view.k();
  AsrOutcome out;

  if (k <= n) {
    out.which_case = 1;
    OneBitPass rough = rough_pass(view, l, randomness.child("case1"));
    out.estimate = std::move(rough.estimate);
    out.messages = std::move(rough.messages);
    return out;
  }

  const std::size_t first = (m + 1) / 2;
  const std::size_t second = m - first;
  const std::size_t b = l >= 40 ? std::numeric_limits<std::size_t>::max() : (std::size_t{1} << l) - 1;

  if (k <= detail::saturating_mul(n, b)) {
    out.which_case = 2;
    if (second == 0) throw std::invalid_argument("insufficient encoders for recursion depth");
    const BlockPartition part = block_partition(k, detail::case2_frame_width(k, n));
    const SampleMatrix blocks =
        map_samples(view.rows(0, first), part.t, [&](std::uint32_t w) { return part.block_of(w); });
    AsrOutcome head = asr_estimate(blocks.view(), l, uniform_alloc, randomness.child("blocks"),
                                   detail::saturating_mul(divisor, part.block_size));
    AsrSubOutcome sub = asr_sub(view.rows(first, second), part, head.estimate, l, uniform_alloc);

    out.messages = std::move(head.messages);
    for (auto& msg : sub.messages) out.messages.push_back(std::move(msg));
    out.steps = std::move(head.steps);
    out.steps.push_back({divisor, part, head.estimate, sub.conditionals, sub.estimate});
    out.estimate = std::move(sub.estimate);
    return out;
  }

  out.which_case = 3;
  out.chain = reduction_chain(k, n, l);
  const std::size_t a = out.chain.size() - 1;
  std::vector<std::size_t> part_sizes(a + 1, 0);  // part_sizes[u] = m_u
  for (std::size_t u = 1; u <= a; ++u) {
    part_sizes[u] = u + 1 >= 64 ? 0 : m >> (u + 1);
    if (part_sizes[u] == 0) throw std::invalid_argument("insufficient encoders for recursion depth");
  }
  // Level u sees symbols w / b^(u-1).
  std::vector<std::size_t> level_div(a + 2, 1);
  for (std::size_t u = 2; u <= a + 1; ++u) level_div[u] = detail::saturating_mul(level_div[u - 1], b);

  const std::size_t top_div = level_div[a + 1];
  const SampleMatrix top = map_samples(view.rows(0, first), out.chain[a],
                                       [&](std::uint32_t w) { return w / top_div; });
  AsrOutcome head = asr_estimate(top.view(), l, uniform_alloc, randomness.child("top"),
                                 detail::saturating_mul(divisor, top_div));
  out.messages = std::move(head.messages);
  out.steps = std::move(head.steps);
  std::vector<double> current = std::move(head.estimate);

  std::size_t cursor = first;
  for (std::size_t u = a; u >= 1; --u) {
    const std::size_t div = level_div[u];
    const SampleMatrix level = map_samples(view.rows(cursor, part_sizes[u]), out.chain[u - 1],
                                           [&](std::uint32_t w) { return w / div; });
    const BlockPartition part = block_partition(out.chain[u - 1], l);
    AsrSubOutcome sub = asr_sub(level.view(), part, current, l, uniform_alloc);
    for (auto& msg : sub.messages) out.messages.push_back(std::move(msg));
    out.steps.push_back({detail::saturating_mul(divisor, div), part, current, sub.conditionals,
                         sub.estimate});
    current = std::move(sub.estimate);
    cursor += part_sizes[u];
  }
  while (out.messages.size() < m) out.messages.emplace_back(l);  // idle encoders
  out.estimate = std::move(current);
  return out;
}

inline ProtocolResult run_asr(const ProtocolConfig& config, const SampleMatrix& samples,
                              const SharedRandomness& randomness, bool uniform_alloc = false) {
  config.validate();
  auto out = asr_estimate(samples.view(), config.l, uniform_alloc, randomness);
  return make_result(std::move(out.estimate), std::move(out.messages));
}

}  // namespace distest
