#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "liteatt/bytes.hpp"

namespace liteatt {

using Tag256 = std::array<std::uint8_t, 32>;
using Digest256 = std::array<std::uint8_t, 32>;

inline constexpr std::size_t kAesBlock = 16;

/// Source of IVs and nonces. Simulation mode is a seeded engine so that a
/// whole session replays bit-for-bit; live mode draws from the OS CSPRNG.
class Prng {
 public:
  explicit Prng(std::uint64_t seed) : engine_(seed) {}
  static Prng os_entropy();

  void fill(std::span<std::uint8_t> out);
  Nonce nonce();
  bool live() const { return live_; }

 private:
  Prng() = default;
  std::mt19937_64 engine_;
  bool live_ = false;
};

/// Millisecond time source. Implementations must never go backwards.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual std::int64_t now_ms() const = 0;
};

/// Harness-driven clock shared by the devices of one simulation.
class SimClock final : public Clock {
 public:
  explicit SimClock(std::int64_t start_ms = 0) : now_(start_ms) {}
  std::int64_t now_ms() const override { return now_; }
  void advance(std::int64_t delta_ms);

 private:
  std::int64_t now_;
};

class SteadyClock final : public Clock {
 public:
  std::int64_t now_ms() const override;
};

// AES-128-CBC with PKCS#7 padding. The 16-byte IV is prepended to the
// returned ciphertext.
Bytes enc(ByteView plaintext, const Key128& key, Prng& prng);
Bytes enc_with_iv(ByteView plaintext, const Key128& key, const std::array<std::uint8_t, 16>& iv);
// Throws PaddingError on bad padding and FormatError when the length is not
// IV + a positive number of blocks.
Bytes dec(ByteView ciphertext, const Key128& key);

Tag256 hmac(ByteView message, ByteView key);
inline Tag256 hmac(ByteView message, const Key128& key) { return hmac(message, ByteView(key)); }
// Comparison time does not depend on where the first mismatch is.
bool verify_hmac(ByteView message, ByteView tag, const Key128& key);

Digest256 sha256(ByteView data);

/// Pre-shared keys of a cluster: an outer key K and an inner (TEE) key K'
/// per unordered device pair.
class KeyStore {
 public:
  static KeyStore generate(std::span<const DeviceId> devices, Prng& prng);

  void set(const DeviceId& a, const DeviceId& b, const Key128& outer, const Key128& inner);
  std::optional<Key128> outer(const DeviceId& a, const DeviceId& b) const;
  std::optional<Key128> inner(const DeviceId& a, const DeviceId& b) const;

  // Restriction to the keys a single device holds.
  KeyStore view_for(const DeviceId& self) const;

 private:
  using PairKey = std::pair<std::uint32_t, std::uint32_t>;
  static PairKey pair_key(const DeviceId& a, const DeviceId& b);
  std::map<PairKey, std::pair<Key128, Key128>> keys_;
};

}  // namespace liteatt
