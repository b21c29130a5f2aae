#pragma once

// Philox4x32-10 counter-based generator (Salmon et al., Random123 constants).
//
// A generator is fully described by (seed, stream, position): the 64-bit seed
// is the Philox key, the 64-bit stream id fills the upper two counter words
// and the position fills the lower two. Output block b of stream s is
// therefore a pure function of (seed, s, b), which is what makes table draws
// reproducible independent of thread schedule or call order elsewhere.

#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <string_view>
#include <utility>

namespace ablate {

class Philox4x32 {
 public:
  using result_type = std::uint32_t;
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  explicit Philox4x32(std::uint64_t seed, std::uint64_t stream = 0) noexcept
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        stream_(stream) {}

  /// The raw bijection: ten Philox rounds of `counter` under `key`.
  static constexpr Block encrypt(Block counter, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
      counter = single_round(counter, key);
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    return counter;
  }

  result_type operator()() noexcept {
    if (lane_ == 4) refill();
    return buffer_[lane_++];
  }

  std::uint64_t next_u64() noexcept {
    const std::uint64_t lo = (*this)();
    const std::uint64_t hi = (*this)();
    return (hi << 32) | lo;
  }

  /// Uniform integer in [0, bound) by Lemire's multiply-shift with rejection.
  std::uint64_t uniform_below(std::uint64_t bound) noexcept {
    if (bound <= 1) return 0;
    unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        m = static_cast<unsigned __int128>(next_u64()) * bound;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  std::uint64_t seed() const noexcept {
    return (static_cast<std::uint64_t>(key_[1]) << 32) | key_[0];
  }
  std::uint64_t stream() const noexcept { return stream_; }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static constexpr Block single_round(const Block& c, const Key& k) noexcept {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }

  void refill() noexcept {
    const Block counter{static_cast<std::uint32_t>(position_),
                        static_cast<std::uint32_t>(position_ >> 32),
                        static_cast<std::uint32_t>(stream_),
                        static_cast<std::uint32_t>(stream_ >> 32)};
    buffer_ = encrypt(counter, key_);
    ++position_;
    lane_ = 0;
  }

  Key key_;
  std::uint64_t stream_;
  std::uint64_t position_ = 0;
  Block buffer_{};
  int lane_ = 4;
};

/// Derives an independent child seed: the first 64 bits of stream `index`
/// under `master`, with a domain tag so derivations for different purposes
/// never collide.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index,
                                 std::uint32_t domain = 0) noexcept {
  const Philox4x32::Block counter{domain, 0x5EEDu, static_cast<std::uint32_t>(index),
                                  static_cast<std::uint32_t>(index >> 32)};
  const Philox4x32::Block out = Philox4x32::encrypt(
      counter, {static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32)});
  return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
}

/// 64-bit FNV-1a, used to turn feature names into stable stream ids.
inline constexpr std::uint64_t fnv1a64(std::string_view text) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const char ch : text) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ull;
  }
  return h;
}

/// Fisher-Yates shuffle driven by Philox, so the permutation is fixed by the
/// generator state alone.
template <typename T>
void shuffle(std::span<T> values, Philox4x32& rng) noexcept {
  for (std::size_t i = values.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_below(i));
    using std::swap;
    swap(values[i - 1], values[j]);
  }
}

}  // namespace ablate
