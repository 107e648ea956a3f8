#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace liteatt {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

using DeviceId = std::array<std::uint8_t, 4>;
using Nonce = std::array<std::uint8_t, 16>;
using Key128 = std::array<std::uint8_t, 16>;

std::string to_hex(ByteView data);
Bytes from_hex(std::string_view hex);

DeviceId device_id_from_u32(std::uint32_t value);
std::uint32_t device_id_to_u32(const DeviceId& id);

// Big-endian helpers used by the wire layouts.
void put_be64(Bytes& out, std::uint64_t value);
std::uint64_t get_be64(ByteView in);

inline void append(Bytes& out, ByteView data) { out.insert(out.end(), data.begin(), data.end()); }

template <std::size_t N>
void append(Bytes& out, const std::array<std::uint8_t, N>& data) {
  out.insert(out.end(), data.begin(), data.end());
}

template <std::size_t N>
std::array<std::uint8_t, N> take_array(ByteView in) {
  std::array<std::uint8_t, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = in[i];
  return out;
}

}  // namespace liteatt
