#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace cw::wire {

// MQTT 3.1.1 subset: CONNECT/CONNACK, PUBLISH qos 0|1, PUBACK,
// SUBSCRIBE/SUBACK, PINGREQ/PINGRESP, DISCONNECT. CleanSession is always 1;
// no will, no auth, no retain, no qos2.

enum class PacketType : uint8_t {
    connect = 1,
    connack = 2,
    publish = 3,
    puback = 4,
    subscribe = 8,
    suback = 9,
    pingreq = 12,
    pingresp = 13,
    disconnect = 14,
};

struct Connect {
    std::string client_id;
    uint16_t keepalive_s = 60;
};

struct ConnAck {
    uint8_t return_code = 0; // 0 = accepted
};

struct Publish {
    std::string topic;
    std::vector<uint8_t> payload;
    uint8_t qos = 0;        // 0 or 1
    uint16_t packet_id = 0; // nonzero iff qos == 1
    bool dup = false;
};

struct PubAck {
    uint16_t packet_id = 0;
};

struct Subscribe {
    uint16_t packet_id = 0;
    std::vector<std::pair<std::string, uint8_t>> filters; // (filter, requested qos)
};

struct SubAck {
    uint16_t packet_id = 0;
    std::vector<uint8_t> granted; // granted qos, or 0x80 = failure
};

struct PingReq {};
struct PingResp {};
struct Disconnect {};

using Packet =
    std::variant<Connect, ConnAck, Publish, PubAck, Subscribe, SubAck, PingReq, PingResp, Disconnect>;

PacketType packet_type(const Packet& p);
const char* packet_type_name(PacketType t);

} // namespace cw::wire
