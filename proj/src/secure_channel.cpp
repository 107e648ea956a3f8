#include "liteatt/secure_channel.hpp"

#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/rand.h>
#include <openssl/sha.h>

#include <chrono>
#include <memory>
#include <stdexcept>

#include "liteatt/error.hpp"

namespace liteatt {

namespace {

struct CipherCtxDeleter {
  void operator()(EVP_CIPHER_CTX* ctx) const { EVP_CIPHER_CTX_free(ctx); }
};
using CipherCtx = std::unique_ptr<EVP_CIPHER_CTX, CipherCtxDeleter>;

}  // namespace

Prng Prng::os_entropy() {
  Prng p;
  p.live_ = true;
  return p;
}

void Prng::fill(std::span<std::uint8_t> out) {
  if (live_) {
    if (RAND_bytes(out.data(), static_cast<int>(out.size())) != 1)
      throw std::runtime_error("RAND_bytes failed");
    return;
  }
  std::size_t i = 0;
  while (i < out.size()) {
    std::uint64_t word = engine_();
    for (int b = 0; b < 8 && i < out.size(); ++b, ++i) {
      out[i] = static_cast<std::uint8_t>(word & 0xff);
      word >>= 8;
    }
  }
}

Nonce Prng::nonce() {
  Nonce n{};
  fill(n);
  return n;
}

void SimClock::advance(std::int64_t delta_ms) {
  if (delta_ms < 0) throw std::invalid_argument("SimClock::advance: negative delta");
  now_ += delta_ms;
}

std::int64_t SteadyClock::now_ms() const {
  using namespace std::chrono;
  return duration_cast<milliseconds>(steady_clock::now().time_since_epoch()).count();
}

Bytes enc_with_iv(ByteView plaintext, const Key128& key, const std::array<std::uint8_t, 16>& iv) {
  CipherCtx ctx(EVP_CIPHER_CTX_new());
  if (!ctx || EVP_EncryptInit_ex(ctx.get(), EVP_aes_128_cbc(), nullptr, key.data(), iv.data()) != 1)
    throw std::runtime_error("AES-CBC encrypt init failed");

  Bytes out(kAesBlock + plaintext.size() + kAesBlock);
  std::copy(iv.begin(), iv.end(), out.begin());
  int len = 0;
  int total = 0;
  if (EVP_EncryptUpdate(ctx.get(), out.data() + kAesBlock, &len, plaintext.data(),
                        static_cast<int>(plaintext.size())) != 1)
    throw std::runtime_error("AES-CBC encrypt failed");
  total = len;
  if (EVP_EncryptFinal_ex(ctx.get(), out.data() + kAesBlock + total, &len) != 1)
    throw std::runtime_error("AES-CBC encrypt final failed");
  total += len;
  out.resize(kAesBlock + static_cast<std::size_t>(total));
  return out;
}

Bytes enc(ByteView plaintext, const Key128& key, Prng& prng) {
  std::array<std::uint8_t, 16> iv{};
  prng.fill(iv);
  return enc_with_iv(plaintext, key, iv);
}

Bytes dec(ByteView ciphertext, const Key128& key) {
  if (ciphertext.size() < 2 * kAesBlock || ciphertext.size() % kAesBlock != 0)
    throw FormatError("ciphertext length " + std::to_string(ciphertext.size()) +
                      " is not IV plus whole blocks");
  CipherCtx ctx(EVP_CIPHER_CTX_new());
  if (!ctx ||
      EVP_DecryptInit_ex(ctx.get(), EVP_aes_128_cbc(), nullptr, key.data(), ciphertext.data()) != 1)
    throw std::runtime_error("AES-CBC decrypt init failed");

  const auto body = ciphertext.subspan(kAesBlock);
  Bytes out(body.size() + kAesBlock);
  int len = 0;
  int total = 0;
  if (EVP_DecryptUpdate(ctx.get(), out.data(), &len, body.data(), static_cast<int>(body.size())) != 1)
    throw std::runtime_error("AES-CBC decrypt failed");
  total = len;
  if (EVP_DecryptFinal_ex(ctx.get(), out.data() + total, &len) != 1)
    throw PaddingError("invalid PKCS#7 padding");
  total += len;
  out.resize(static_cast<std::size_t>(total));
  return out;
}

Tag256 hmac(ByteView message, ByteView key) {
  Tag256 tag{};
  unsigned int len = 0;
  if (HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()), message.data(), message.size(),
           tag.data(), &len) == nullptr ||
      len != tag.size())
    throw std::runtime_error("HMAC-SHA256 failed");
  return tag;
}

bool verify_hmac(ByteView message, ByteView tag, const Key128& key) {
  const Tag256 expected = hmac(message, key);
  if (tag.size() != expected.size()) return false;
  return CRYPTO_memcmp(expected.data(), tag.data(), expected.size()) == 0;
}

Digest256 sha256(ByteView data) {
  Digest256 out{};
  SHA256(data.data(), data.size(), out.data());
  return out;
}

KeyStore::PairKey KeyStore::pair_key(const DeviceId& a, const DeviceId& b) {
  const auto x = device_id_to_u32(a);
  const auto y = device_id_to_u32(b);
  return x < y ? PairKey{x, y} : PairKey{y, x};
}

KeyStore KeyStore::generate(std::span<const DeviceId> devices, Prng& prng) {
  KeyStore ks;
  for (std::size_t i = 0; i < devices.size(); ++i) {
    for (std::size_t j = i + 1; j < devices.size(); ++j) {
      Key128 outer{};
      Key128 inner{};
      prng.fill(outer);
      do {
        prng.fill(inner);
      } while (inner == outer);
      ks.set(devices[i], devices[j], outer, inner);
    }
  }
  return ks;
}

void KeyStore::set(const DeviceId& a, const DeviceId& b, const Key128& outer, const Key128& inner) {
  if (outer == inner) throw ConfigError("outer and inner keys of a pair must differ");
  keys_[pair_key(a, b)] = {outer, inner};
}

std::optional<Key128> KeyStore::outer(const DeviceId& a, const DeviceId& b) const {
  auto it = keys_.find(pair_key(a, b));
  if (it == keys_.end()) return std::nullopt;
  return it->second.first;
}

std::optional<Key128> KeyStore::inner(const DeviceId& a, const DeviceId& b) const {
  auto it = keys_.find(pair_key(a, b));
  if (it == keys_.end()) return std::nullopt;
  return it->second.second;
}

KeyStore KeyStore::view_for(const DeviceId& self) const {
  KeyStore out;
  const auto me = device_id_to_u32(self);
  for (const auto& [pk, kv] : keys_)
    if (pk.first == me || pk.second == me) out.keys_[pk] = kv;
  return out;
}

}  // namespace liteatt
