#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "distest/core.hpp"

namespace distest {

// One encoder's message. Fixed-width integers are stored MSB first.
struct BitMessage {
  std::vector<bool> bits;

  BitMessage() = default;
  explicit BitMessage(std::size_t length) : bits(length, false) {}

  std::size_t size() const noexcept { return bits.size(); }

  void write_uint(std::size_t offset, std::size_t width, std::uint64_t value) {
    if (offset + width > bits.size()) throw std::out_of_range("BitMessage::write_uint");
    if (width < 64 && (value >> width) != 0) throw std::invalid_argument("value does not fit in width");
    for (std::size_t b = 0; b < width; ++b) bits[offset + b] = (value >> (width - 1 - b)) & 1U;
  }

  std::uint64_t read_uint(std::size_t offset, std::size_t width) const {
    if (offset + width > bits.size()) throw std::out_of_range("BitMessage::read_uint");
    std::uint64_t v = 0;
    for (std::size_t b = 0; b < width; ++b) v = (v << 1) | (bits[offset + b] ? 1U : 0U);
    return v;
  }

  std::string to_string() const {
    std::string s;
    s.reserve(bits.size());
    for (bool b : bits) s.push_back(b ? '1' : '0');
    return s;
  }

  friend bool operator==(const BitMessage&, const BitMessage&) = default;
};

// Record of what reached the decoder, in production order. Appending does
// not validate; budget_audit() does, so malformed transcripts can be built.
class Transcript {
 public:
  struct Entry {
    std::size_t encoder;
    std::size_t order;
    BitMessage message;
  };

  void append(std::size_t encoder, BitMessage message) {
    entries_.push_back({encoder, entries_.size(), std::move(message)});
  }
  void append_raw(Entry entry) { entries_.push_back(std::move(entry)); }

  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  const BitMessage& message(std::size_t i) const { return entries_.at(i).message; }

  // Bits charged to each encoder index in [0, m).
  std::vector<std::size_t> ledger(std::size_t m) const {
    std::vector<std::size_t> bits(m, 0);
    for (const auto& e : entries_) {
      if (e.encoder < m) bits[e.encoder] += e.message.size();
    }
    return bits;
  }

  std::size_t total_bits() const noexcept {
    std::size_t total = 0;
    for (const auto& e : entries_) total += e.message.size();
    return total;
  }

 private:
  std::vector<Entry> entries_;
};

// What a protocol run hands back: the decoder's raw output, its per-coordinate
// projection onto [0,1], and every message that was sent.
struct ProtocolResult {
  std::vector<double> raw;
  std::vector<double> clipped;
  Transcript transcript;
};

// Messages are indexed by encoder and were produced in that order.
inline ProtocolResult make_result(std::vector<double> raw, std::vector<BitMessage> messages) {
  ProtocolResult out;
  out.clipped = clip_to_unit(raw);
  out.raw = std::move(raw);
  for (std::size_t i = 0; i < messages.size(); ++i) out.transcript.append(i, std::move(messages[i]));
  return out;
}

}  // namespace distest
