#include "fourcast/wire.hpp"

#include <bit>
#include <string>

#include "fourcast/error.hpp"

namespace fourcast {

namespace {

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
}

template <typename T>
T get_le(std::span<const std::uint8_t> bytes, std::size_t offset) {
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(bytes[offset + i]) << (8 * i);
    return value;
}

void check_message(std::uint16_t n, std::size_t k) {
    if (n < 2 || n % 2 != 0) throw InvalidInput("message batch length must be even and at least 2");
    if (k == 0 || k > static_cast<std::size_t>(n / 2 + 1))
        throw InvalidInput("message carries " + std::to_string(k) + " terms, allowed [1, n/2+1]");
}

}  // namespace

void encode_message_into(const UpdateMessage& msg, std::vector<std::uint8_t>& out) {
    check_message(msg.n, msg.coefficients.size());
    out.reserve(out.size() + encoded_size(msg.coefficients.size()));
    put_le(out, msg.node_id);
    put_le(out, msg.batch_index);
    put_le(out, msg.n);
    put_le(out, msg.k());
    for (const auto& c : msg.coefficients) {
        put_le(out, std::bit_cast<std::uint64_t>(c.real()));
        put_le(out, std::bit_cast<std::uint64_t>(c.imag()));
    }
}

std::vector<std::uint8_t> encode_message(const UpdateMessage& msg) {
    std::vector<std::uint8_t> out;
    encode_message_into(msg, out);
    return out;
}

UpdateMessage decode_message_prefix(std::span<const std::uint8_t> bytes, std::size_t& consumed) {
    if (bytes.size() < kMessageHeaderBytes) throw InvalidInput("truncated message header");
    UpdateMessage msg;
    msg.node_id = get_le<std::uint32_t>(bytes, 0);
    msg.batch_index = get_le<std::uint32_t>(bytes, 4);
    msg.n = get_le<std::uint16_t>(bytes, 8);
    const auto k = get_le<std::uint16_t>(bytes, 10);
    check_message(msg.n, k);
    const std::size_t total = encoded_size(k);
    if (bytes.size() < total) throw InvalidInput("truncated message payload");
    msg.coefficients.resize(k);
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t at = kMessageHeaderBytes + i * kCoefficientBytes;
        msg.coefficients[i] = {std::bit_cast<double>(get_le<std::uint64_t>(bytes, at)),
                               std::bit_cast<double>(get_le<std::uint64_t>(bytes, at + 8))};
    }
    consumed = total;
    return msg;
}

UpdateMessage decode_message(std::span<const std::uint8_t> bytes) {
    std::size_t consumed = 0;
    auto msg = decode_message_prefix(bytes, consumed);
    if (consumed != bytes.size()) throw InvalidInput("trailing bytes after message");
    return msg;
}

std::vector<UpdateMessage> decode_stream(std::span<const std::uint8_t> bytes) {
    std::vector<UpdateMessage> out;
    while (!bytes.empty()) {
        std::size_t consumed = 0;
        out.push_back(decode_message_prefix(bytes, consumed));
        bytes = bytes.subspan(consumed);
    }
    return out;
}

}  // namespace fourcast
