#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fourcast/spectral_codec.hpp"

namespace fourcast {

/// Node-to-controller batch update. Wire layout, little-endian:
///   u32 node_id | u32 batch_index | u16 n | u16 k | k x (f64 re, f64 im)
struct UpdateMessage {
    std::uint32_t node_id = 0;
    std::uint32_t batch_index = 0;
    std::uint16_t n = 0;
    std::vector<Complex> coefficients;

    std::uint16_t k() const noexcept { return static_cast<std::uint16_t>(coefficients.size()); }

    TruncatedSpectrum spectrum() const { return TruncatedSpectrum(coefficients, n); }

    friend bool operator==(const UpdateMessage&, const UpdateMessage&) = default;
};

inline constexpr std::size_t kMessageHeaderBytes = 12;
inline constexpr std::size_t kCoefficientBytes = 16;

constexpr std::size_t encoded_size(std::size_t k) { return kMessageHeaderBytes + kCoefficientBytes * k; }

std::vector<std::uint8_t> encode_message(const UpdateMessage& msg);

/// Appends the encoding to `out`.
void encode_message_into(const UpdateMessage& msg, std::vector<std::uint8_t>& out);

/// Decodes exactly one message occupying all of `bytes`.
UpdateMessage decode_message(std::span<const std::uint8_t> bytes);

/// Decodes one message from the front of `bytes`; `consumed` receives its length.
UpdateMessage decode_message_prefix(std::span<const std::uint8_t> bytes, std::size_t& consumed);

/// Splits a concatenated message stream.
std::vector<UpdateMessage> decode_stream(std::span<const std::uint8_t> bytes);

}  // namespace fourcast
