#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace agentloom {

// Raised when an operation's documented precondition is violated by the caller.
struct PreconditionViolation : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// Hashing. All digests, fingerprints and trace hashes in this project are
// 64-bit FNV-1a rendered as 16 lowercase hex chars. Stable across platforms.
// ---------------------------------------------------------------------------

inline constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ull;

constexpr std::uint64_t fnv1a64(std::string_view data,
                                std::uint64_t seed = kFnvOffset) {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

std::string hex16(std::uint64_t value);

inline std::string digest_hex(std::string_view data) {
  return hex16(fnv1a64(data));
}

// Mix an id string into a numeric seed (per-task device seeds etc.).
inline std::uint64_t mix_seed(std::uint64_t seed, std::string_view tag) {
  return fnv1a64(tag, seed ^ kFnvOffset);
}

// ---------------------------------------------------------------------------
// Deterministic RNG. std::uniform_real_distribution is not bit-identical
// across standard libraries, so probabilities are derived from raw engine
// output. The engine is copyable, which is what lets device snapshots
// capture RNG state by value.
// ---------------------------------------------------------------------------

class DetRng {
 public:
  DetRng() : engine_(0) {}
  explicit DetRng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0,1) with 53 bits of entropy.
  double next_unit() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  bool chance(double p) {
    if (p <= 0.0) return false;
    if (p >= 1.0) return true;
    return next_unit() < p;
  }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : engine_() % n; }

 private:
  std::mt19937_64 engine_;
};

// ---------------------------------------------------------------------------
// String helpers.
// ---------------------------------------------------------------------------

std::vector<std::string> split_lines(std::string_view text);
std::string trim(std::string_view s);
bool starts_with(std::string_view s, std::string_view prefix);
bool ends_with(std::string_view s, std::string_view suffix);
bool contains(std::string_view s, std::string_view needle);
std::string replace_all(std::string text, std::string_view from,
                        std::string_view to);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

// Collapse all whitespace runs to single spaces and trim the ends.
std::string normalize_whitespace(std::string_view text);

// ---------------------------------------------------------------------------
// Virtual clock: ISO-8601 timestamp at a fixed epoch plus `ticks` seconds.
// The simulator uses this instead of the wall clock so replays are
// byte-identical.
// ---------------------------------------------------------------------------

std::string virtual_timestamp(std::uint64_t ticks);

// ---------------------------------------------------------------------------
// Exact money arithmetic in integer nanodollars. Pricing-table rates have at
// most three decimal places per 1M tokens, so per-token rates are integral in
// nanodollars and all ledger sums stay exact.
// ---------------------------------------------------------------------------

using NanoUsd = std::int64_t;

// Parse a decimal string such as "2.00" or "0.08" into nanodollars.
NanoUsd parse_usd(std::string_view text);

// Render nanodollars as a trimmed decimal string, e.g. "2", "0.09", "1.07".
std::string format_usd(NanoUsd value);

double usd_to_double(NanoUsd value);

}  // namespace agentloom
