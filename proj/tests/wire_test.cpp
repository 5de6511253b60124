#include <bit>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "doctest.h"
#include "fourcast/error.hpp"
#include "fourcast/wire.hpp"

using namespace fourcast;

namespace {

std::vector<std::uint8_t> from_hex(const std::string& hex) {
    std::vector<std::uint8_t> out;
    for (std::size_t i = 0; i + 1 < hex.size(); i += 2) out.push_back(static_cast<std::uint8_t>(std::stoul(hex.substr(i, 2), nullptr, 16)));
    return out;
}

double le_double(const std::uint8_t* p) {
    std::uint64_t bits = 0;
    for (int i = 7; i >= 0; --i) bits = (bits << 8) | p[i];
    return std::bit_cast<double>(bits);
}

UpdateMessage random_message(std::mt19937_64& rng) {
    std::uniform_int_distribution<std::uint32_t> u32;
    std::uniform_int_distribution<int> half(1, 300);
    std::uniform_real_distribution<double> val(-500.0, 500.0);
    UpdateMessage m;
    m.node_id = u32(rng);
    m.batch_index = u32(rng);
    m.n = static_cast<std::uint16_t>(2 * half(rng));
    std::uniform_int_distribution<int> kd(1, m.n / 2 + 1);
    const int k = kd(rng);
    for (int f = 0; f < k; ++f) m.coefficients.emplace_back(val(rng), f == 0 || 2 * f == m.n ? 0.0 : val(rng));
    return m;
}

}  // namespace

TEST_CASE("constant batch message layout") {
    const UpdateMessage m{0, 0, 4, {{2.0, 0.0}}};
    const auto bytes = encode_message(m);
    REQUIRE(bytes.size() == 28);
    const std::vector<std::uint8_t> header{0, 0, 0, 0, 0, 0, 0, 0, 4, 0, 1, 0};
    CHECK(std::equal(header.begin(), header.end(), bytes.begin()));
    CHECK(le_double(bytes.data() + 12) == 2.0);
    CHECK(le_double(bytes.data() + 20) == 0.0);
    CHECK(decode_message(bytes) == m);
}

TEST_CASE("header field order and endianness") {
    const UpdateMessage m{0x01020304u, 0xa0b0c0d0u, 0x0048, std::vector<Complex>(3)};
    const auto b = encode_message(m);
    const std::vector<std::uint8_t> want{0x04, 0x03, 0x02, 0x01, 0xd0, 0xc0, 0xb0, 0xa0, 0x48, 0x00, 0x03, 0x00};
    CHECK(std::equal(want.begin(), want.end(), b.begin()));
    CHECK(b.size() == encoded_size(3));
}

TEST_CASE("round trip over seeded messages") {
    std::mt19937_64 rng(4);
    std::vector<std::uint8_t> stream;
    std::vector<UpdateMessage> sent;
    for (int i = 0; i < 500; ++i) {
        const auto m = random_message(rng);
        const auto b = encode_message(m);
        CHECK(b.size() == 12 + 16 * m.k());
        CHECK(decode_message(b) == m);
        encode_message_into(m, stream);
        sent.push_back(m);
    }
    CHECK(decode_stream(stream) == sent);
}

TEST_CASE("golden fixture") {
    std::ifstream in(std::string(FOURCAST_TEST_DATA) + "/golden_messages.hex");
    REQUIRE(in);
    std::string fields, hex;
    int records = 0;
    while (std::getline(in, fields) && std::getline(in, hex)) {
        std::istringstream ss(fields);
        std::string tag;
        std::uint64_t node = 0, batch = 0, n = 0, k = 0;
        ss >> tag >> node >> batch >> n >> k;
        REQUIRE(tag == "msg");
        UpdateMessage m{static_cast<std::uint32_t>(node), static_cast<std::uint32_t>(batch), static_cast<std::uint16_t>(n), {}};
        for (std::uint64_t f = 0; f < k; ++f) {
            std::string re, im;
            ss >> re >> im;
            m.coefficients.emplace_back(std::stod(re), std::stod(im));
        }
        const auto golden = from_hex(hex);
        CHECK(encode_message(m) == golden);
        CHECK(decode_message(golden) == m);
        ++records;
    }
    CHECK(records == 8);
}

TEST_CASE("invalid messages") {
    CHECK_THROWS_AS(encode_message(UpdateMessage{0, 0, 4, std::vector<Complex>(4)}), InvalidInput);
    CHECK_THROWS_AS(encode_message(UpdateMessage{0, 0, 4, {}}), InvalidInput);
    CHECK_THROWS_AS(encode_message(UpdateMessage{0, 0, 5, std::vector<Complex>(1)}), InvalidInput);

    auto bytes = encode_message(UpdateMessage{1, 2, 8, std::vector<Complex>(2)});
    CHECK_THROWS(decode_message(std::span(bytes).first(bytes.size() - 1)));
    CHECK_THROWS(decode_message(std::span(bytes).first(5)));
    bytes.push_back(0);
    CHECK_THROWS(decode_message(bytes));
    bytes.pop_back();
    bytes[10] = 9;  // k beyond n/2 + 1
    CHECK_THROWS(decode_message(bytes));
}
