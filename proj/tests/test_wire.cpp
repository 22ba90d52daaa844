#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "util/error.hpp"
#include "util/rng.hpp"
#include "wire/codec.hpp"
#include "wire/router.hpp"
#include "wire/topic.hpp"

using namespace cw;
using namespace cw::wire;

namespace {

std::vector<uint8_t> bytes_of(std::initializer_list<int> v) {
    std::vector<uint8_t> out;
    for (int b : v) out.push_back(static_cast<uint8_t>(b));
    return out;
}

Packet random_packet(Rng& rng) {
    auto rand_string = [&](size_t max_len, bool topic_safe) {
        std::string s;
        size_t n = rng.next_below(max_len);
        for (size_t i = 0; i < n; ++i) {
            char c = static_cast<char>('a' + rng.next_below(26));
            s += c;
            if (!topic_safe && rng.next_below(8) == 0) s += '/';
        }
        if (topic_safe && s.empty()) s = "t";
        return s;
    };
    switch (rng.next_below(9)) {
    case 0: return Connect{rand_string(20, false), static_cast<uint16_t>(rng.next_below(600))};
    case 1: return ConnAck{static_cast<uint8_t>(rng.next_below(6))};
    case 2: {
        Publish p;
        p.topic = rand_string(30, true);
        size_t n = rng.next_below(200);
        for (size_t i = 0; i < n; ++i) p.payload.push_back(static_cast<uint8_t>(rng.next_u64()));
        p.qos = static_cast<uint8_t>(rng.next_below(2));
        if (p.qos == 1) {
            p.packet_id = static_cast<uint16_t>(1 + rng.next_below(65535));
            p.dup = rng.next_below(2) == 1;
        }
        return p;
    }
    case 3: return PubAck{static_cast<uint16_t>(1 + rng.next_below(65535))};
    case 4: {
        Subscribe s;
        s.packet_id = static_cast<uint16_t>(1 + rng.next_below(65535));
        size_t n = 1 + rng.next_below(4);
        for (size_t i = 0; i < n; ++i)
            s.filters.emplace_back(rand_string(20, true), static_cast<uint8_t>(rng.next_below(2)));
        return s;
    }
    case 5: {
        SubAck s;
        s.packet_id = static_cast<uint16_t>(1 + rng.next_below(65535));
        size_t n = 1 + rng.next_below(4);
        for (size_t i = 0; i < n; ++i)
            s.granted.push_back(rng.next_below(8) == 0 ? 0x80 : static_cast<uint8_t>(rng.next_below(2)));
        return s;
    }
    case 6: return PingReq{};
    case 7: return PingResp{};
    default: return Disconnect{};
    }
}

bool packets_equal(const Packet& a, const Packet& b) {
    return encode_packet(a) == encode_packet(b);
}

} // namespace

TEST_CASE("encode: qos0 publish 'a/b' + 'hi' matches the hand-assembled frame") {
    Publish p;
    p.topic = "a/b";
    p.payload = {'h', 'i'};
    p.qos = 0;
    CHECK(encode_packet(Packet{p}) == bytes_of({0x30, 0x07, 0x00, 0x03, 0x61, 0x2F, 0x62, 0x68, 0x69}));
}

TEST_CASE("encode: PINGREQ is C0 00") {
    CHECK(encode_packet(Packet{PingReq{}}) == bytes_of({0xC0, 0x00}));
}

TEST_CASE("encode: remaining length 321 uses continuation bytes C1 02") {
    Publish p;
    p.topic = "abcd";                // 2 + 4 bytes
    p.payload.assign(315, 0x55);     // total body = 6 + 315 = 321
    p.qos = 0;
    auto bytes = encode_packet(Packet{p});
    REQUIRE(bytes.size() >= 3);
    CHECK(bytes[1] == 0xC1);
    CHECK(bytes[2] == 0x02);
}

TEST_CASE("encode rejects oversize remaining length") {
    Publish p;
    p.topic = "t";
    p.qos = 0;
    p.payload.resize(kMaxRemainingLength + 1);
    CHECK_THROWS_AS((void)encode_packet(Packet{p}), Error);
}

TEST_CASE("decode(encode(p)) == p over generated packets") {
    Rng rng(0x5eed);
    for (int i = 0; i < 5000; ++i) {
        Packet p = random_packet(rng);
        auto bytes = encode_packet(p);
        auto res = decode_packet(bytes);
        REQUIRE(res.status == DecodeStatus::ok);
        CHECK(res.consumed == bytes.size());
        CHECK(packets_equal(res.packet, p));
    }
}

TEST_CASE("decode: truncated publish prefix asks for more data") {
    auto res = decode_packet(bytes_of({0x30, 0x07, 0x00, 0x03}));
    CHECK(res.status == DecodeStatus::need_more);
    CHECK(decode_packet(bytes_of({})).status == DecodeStatus::need_more);
    CHECK(decode_packet(bytes_of({0x30})).status == DecodeStatus::need_more);
}

TEST_CASE("decode: reserved packet type 15 is malformed") {
    CHECK(decode_packet(bytes_of({0xF0, 0x00})).status == DecodeStatus::malformed);
    CHECK(decode_packet(bytes_of({0x00, 0x00})).status == DecodeStatus::malformed);
}

TEST_CASE("decode: protocol violations are malformed") {
    // qos2 publish
    CHECK(decode_packet(bytes_of({0x34, 0x05, 0x00, 0x01, 0x61, 0x00, 0x01})).status ==
          DecodeStatus::malformed);
    // qos1 with packet id 0
    CHECK(decode_packet(bytes_of({0x32, 0x05, 0x00, 0x01, 0x61, 0x00, 0x00})).status ==
          DecodeStatus::malformed);
    // wildcard in publish topic
    CHECK(decode_packet(bytes_of({0x30, 0x03, 0x00, 0x01, '#'})).status == DecodeStatus::malformed);
    // remaining length with five continuation bytes
    CHECK(decode_packet(bytes_of({0x30, 0x80, 0x80, 0x80, 0x80, 0x01})).status == DecodeStatus::malformed);
}

TEST_CASE("decode never reads past consumed; byte-by-byte feed equals whole-buffer feed") {
    Rng rng(0xfeedbeef);
    std::vector<Packet> sent;
    std::vector<uint8_t> stream;
    for (int i = 0; i < 200; ++i) {
        Packet p = random_packet(rng);
        auto b = encode_packet(p);
        stream.insert(stream.end(), b.begin(), b.end());
        sent.push_back(std::move(p));
    }

    // whole-buffer pass
    std::vector<Packet> whole;
    size_t pos = 0;
    while (pos < stream.size()) {
        auto res = decode_packet({stream.data() + pos, stream.size() - pos});
        REQUIRE(res.status == DecodeStatus::ok);
        whole.push_back(res.packet);
        pos += res.consumed;
    }

    // dribble one byte at a time into a growing buffer
    std::vector<Packet> dribble;
    std::vector<uint8_t> buf;
    for (uint8_t byte : stream) {
        buf.push_back(byte);
        while (true) {
            auto res = decode_packet(buf);
            if (res.status != DecodeStatus::ok) {
                REQUIRE(res.status == DecodeStatus::need_more);
                break;
            }
            REQUIRE(res.consumed <= buf.size());
            dribble.push_back(res.packet);
            buf.erase(buf.begin(), buf.begin() + static_cast<long>(res.consumed));
        }
    }

    REQUIRE(whole.size() == sent.size());
    REQUIRE(dribble.size() == sent.size());
    for (size_t i = 0; i < sent.size(); ++i) {
        CHECK(packets_equal(whole[i], sent[i]));
        CHECK(packets_equal(dribble[i], sent[i]));
    }
}

TEST_CASE("malformed-input fuzz never crashes") {
    Rng rng(0xabad1dea);
    for (int i = 0; i < 20000; ++i) {
        size_t n = rng.next_below(64);
        std::vector<uint8_t> buf(n);
        for (auto& b : buf) b = static_cast<uint8_t>(rng.next_u64());
        auto res = decode_packet(buf);
        bool sane = res.status == DecodeStatus::ok || res.status == DecodeStatus::need_more ||
                    res.status == DecodeStatus::malformed;
        CHECK(sane);
        if (res.status == DecodeStatus::ok) CHECK(res.consumed <= buf.size());
    }
}

// ---------------------------------------------------------------------------

TEST_CASE("topic_matches: single-level wildcard") {
    CHECK(topic_matches("flatform/+/energy", "flatform/cell07/energy"));
    CHECK_FALSE(topic_matches("flatform/+", "flatform/a/b"));
    CHECK(topic_matches("flatform/+", "flatform/a"));
}

TEST_CASE("topic_matches: multi-level wildcard includes the parent level") {
    CHECK(topic_matches("flatform/#", "flatform"));
    CHECK(topic_matches("flatform/#", "flatform/a/b/c"));
    CHECK(topic_matches("#", "anything/at/all"));
    CHECK_FALSE(topic_matches("flatform/#", "other"));
}

TEST_CASE("topic_matches: exact levels and invalid filters") {
    CHECK(topic_matches("a/b/c", "a/b/c"));
    CHECK_FALSE(topic_matches("a/b", "a/b/c"));
    CHECK_FALSE(topic_matches("a/b/c", "a/b"));
    CHECK(filter_valid("a/+/c"));
    CHECK_FALSE(filter_valid("a/#/c"));   // # must be last
    CHECK_FALSE(filter_valid("a/b+/c"));  // + must fill a level
    CHECK_FALSE(filter_valid("a/b#"));
    CHECK_FALSE(filter_valid(""));
    CHECK(topic_matches("a//b", "a//b")); // empty levels are real levels
}

// ---------------------------------------------------------------------------

namespace {

Registry make_registry() {
    Registry reg;
    for (SessionId id = 1; id <= 3; ++id) {
        SessionInfo s;
        s.id = id;
        s.connected = true;
        reg.sessions[id] = s;
    }
    reg.sessions[2].subscriptions = {{"flatform/#", 0}};
    reg.sessions[3].subscriptions = {{"flatform/+/energy", 0}};
    return reg;
}

} // namespace

TEST_CASE("broker_handle: qos1 publish fans out and acks the publisher first") {
    Registry reg = make_registry();
    Publish p;
    p.topic = "flatform/cell01/energy";
    p.payload = {1, 2, 3};
    p.qos = 1;
    p.packet_id = 77;
    auto hr = broker_handle(1, Packet{p}, reg);
    CHECK_FALSE(hr.close_connection);
    REQUIRE(hr.actions.size() == 3);
    auto* ack = std::get_if<PubAck>(&hr.actions[0].packet);
    REQUIRE(ack != nullptr);
    CHECK(hr.actions[0].target == 1);
    CHECK(ack->packet_id == 77);
    for (size_t i = 1; i < 3; ++i) {
        auto* fan = std::get_if<Publish>(&hr.actions[i].packet);
        REQUIRE(fan != nullptr);
        CHECK(fan->payload == p.payload);
        CHECK(fan->qos == 0); // min(pub 1, sub 0)
    }
}

TEST_CASE("broker_handle: publish with zero subscribers still acks") {
    Registry reg = make_registry();
    Publish p;
    p.topic = "other/topic";
    p.qos = 1;
    p.packet_id = 5;
    auto hr = broker_handle(1, Packet{p}, reg);
    REQUIRE(hr.actions.size() == 1);
    CHECK(std::holds_alternative<PubAck>(hr.actions[0].packet));
}

TEST_CASE("broker_handle: publish before connect is a protocol violation") {
    Registry reg = make_registry();
    reg.sessions[1].connected = false;
    Publish p;
    p.topic = "t";
    p.qos = 0;
    auto hr = broker_handle(1, Packet{p}, reg);
    CHECK(hr.close_connection);
}

TEST_CASE("broker_handle: subscribe grants qos and rejects invalid filters") {
    Registry reg = make_registry();
    Subscribe s;
    s.packet_id = 9;
    s.filters = {{"a/b", 1}, {"bad/#/filter", 0}};
    auto hr = broker_handle(1, Packet{s}, reg);
    REQUIRE(hr.actions.size() == 1);
    auto* ack = std::get_if<SubAck>(&hr.actions[0].packet);
    REQUIRE(ack != nullptr);
    CHECK(ack->granted == std::vector<uint8_t>{1, 0x80});
    CHECK(reg.sessions[1].subscriptions.size() == 1);
}
