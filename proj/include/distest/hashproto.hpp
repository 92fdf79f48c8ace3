#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "distest/core.hpp"
#include "distest/random.hpp"
#include "distest/transcript.hpp"

namespace distest {

// h_i : [0,k) -> [0, 2^l). The w-th entry is the top l bits of the w-th
// output of the stream labelled ("hash", i), so the table is never stored and
// its entries are i.i.d. uniform buckets.
class HashFunction {
 public:
  HashFunction(const SharedRandomness& randomness, std::size_t encoder, std::size_t l)
      : table_(randomness.stream("hash", encoder)), l_(l) {
    if (l == 0) throw std::invalid_argument("hash: l must be >= 1");
    if (l > 62) throw std::invalid_argument("hash: l must be <= 62");
  }

  std::uint64_t operator()(std::size_t w) const { return table_.peek(w) >> (64 - l_); }
  std::size_t bits() const noexcept { return l_; }

 private:
  Stream table_;
  std::size_t l_;
};

// Encoder i only ever sees its own sample and h_i.
inline BitMessage hash_encode(std::uint32_t sample, const HashFunction& h) {
  BitMessage msg(h.bits());
  msg.write_uint(0, h.bits(), h(sample));
  return msg;
}

struct HashOutcome {
  std::vector<double> raw;
  std::vector<double> clipped;
};

// p(w) = (2^l / (2^l - 1)) * (fraction of encoders whose message equals h_i(w))
//        - 1 / (2^l - 1)
inline HashOutcome hash_estimate(const std::vector<BitMessage>& messages,
                                 const SharedRandomness& randomness, std::size_t k, std::size_t l) {
  if (l == 0) throw std::invalid_argument("hash_estimate: l must be >= 1");
  if (messages.empty()) throw std::invalid_argument("hash_estimate: no messages");
  std::vector<std::size_t> matches(k, 0);
  for (std::size_t i = 0; i < messages.size(); ++i) {
    if (messages[i].size() != l) throw std::invalid_argument("hash_estimate: message length != l");
    const HashFunction h(randomness, i, l);
    const std::uint64_t got = messages[i].read_uint(0, l);
    for (std::size_t w = 0; w < k; ++w) matches[w] += h(w) == got ? 1 : 0;
  }
  const double buckets = std::ldexp(1.0, static_cast<int>(l));
  const double m = static_cast<double>(messages.size());
  HashOutcome out;
  out.raw.resize(k);
  for (std::size_t w = 0; w < k; ++w) {
    const double frac = static_cast<double>(matches[w]) / m;
    out.raw[w] = buckets / (buckets - 1.0) * frac - 1.0 / (buckets - 1.0);
  }
  out.clipped = clip_to_unit(out.raw);
  return out;
}

// Non-interactive: uses only the first sample of each encoder.
inline ProtocolResult run_hash(const ProtocolConfig& config, const SampleMatrix& samples,
                               const SharedRandomness& randomness) {
  config.validate();
  std::vector<BitMessage> messages;
  messages.reserve(samples.m());
  for (std::size_t i = 0; i < samples.m(); ++i) {
    messages.push_back(hash_encode(samples.row(i)[0], HashFunction(randomness, i, config.l)));
  }
  HashOutcome est = hash_estimate(messages, randomness, samples.k(), config.l);
  return make_result(std::move(est.raw), std::move(messages));
}

}  // namespace distest
