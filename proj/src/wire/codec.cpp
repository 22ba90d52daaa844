#include "wire/codec.hpp"

#include "util/error.hpp"

namespace cw::wire {

PacketType packet_type(const Packet& p) {
    struct V {
        PacketType operator()(const Connect&) { return PacketType::connect; }
        PacketType operator()(const ConnAck&) { return PacketType::connack; }
        PacketType operator()(const Publish&) { return PacketType::publish; }
        PacketType operator()(const PubAck&) { return PacketType::puback; }
        PacketType operator()(const Subscribe&) { return PacketType::subscribe; }
        PacketType operator()(const SubAck&) { return PacketType::suback; }
        PacketType operator()(const PingReq&) { return PacketType::pingreq; }
        PacketType operator()(const PingResp&) { return PacketType::pingresp; }
        PacketType operator()(const Disconnect&) { return PacketType::disconnect; }
    };
    return std::visit(V{}, p);
}

const char* packet_type_name(PacketType t) {
    switch (t) {
    case PacketType::connect: return "CONNECT";
    case PacketType::connack: return "CONNACK";
    case PacketType::publish: return "PUBLISH";
    case PacketType::puback: return "PUBACK";
    case PacketType::subscribe: return "SUBSCRIBE";
    case PacketType::suback: return "SUBACK";
    case PacketType::pingreq: return "PINGREQ";
    case PacketType::pingresp: return "PINGRESP";
    case PacketType::disconnect: return "DISCONNECT";
    }
    return "?";
}

namespace {

// MQTT integers and string lengths are big-endian on the wire.
void be16(std::vector<uint8_t>& out, uint16_t v) {
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v));
}

void mqtt_string(std::vector<uint8_t>& out, const std::string& s) {
    if (s.size() > 0xffff) raise(Errc::oversize, "MQTT string exceeds 65535 bytes");
    be16(out, static_cast<uint16_t>(s.size()));
    out.insert(out.end(), s.begin(), s.end());
}

void remaining_length(std::vector<uint8_t>& out, size_t len) {
    if (len > kMaxRemainingLength) raise(Errc::oversize, "remaining length exceeds MQTT maximum");
    do {
        uint8_t byte = static_cast<uint8_t>(len % 128);
        len /= 128;
        if (len > 0) byte |= 0x80;
        out.push_back(byte);
    } while (len > 0);
}

bool has_wildcard(const std::string& topic) {
    return topic.find('+') != std::string::npos || topic.find('#') != std::string::npos;
}

struct BodyReader {
    std::span<const uint8_t> b;
    size_t pos = 0;

    bool u8(uint8_t& v) {
        if (pos + 1 > b.size()) return false;
        v = b[pos++];
        return true;
    }
    bool u16(uint16_t& v) {
        if (pos + 2 > b.size()) return false;
        v = static_cast<uint16_t>((b[pos] << 8) | b[pos + 1]);
        pos += 2;
        return true;
    }
    bool str(std::string& s) {
        uint16_t n;
        if (!u16(n) || pos + n > b.size()) return false;
        s.assign(reinterpret_cast<const char*>(b.data() + pos), n);
        pos += n;
        return true;
    }
    size_t remaining() const { return b.size() - pos; }
};

DecodeResult malformed(std::string why) {
    DecodeResult r;
    r.status = DecodeStatus::malformed;
    r.error = std::move(why);
    return r;
}

} // namespace

std::vector<uint8_t> encode_packet(const Packet& p) {
    std::vector<uint8_t> body;
    uint8_t first;

    if (const auto* c = std::get_if<Connect>(&p)) {
        first = 0x10;
        mqtt_string(body, "MQTT");
        body.push_back(0x04);       // protocol level 3.1.1
        body.push_back(0x02);       // clean session, nothing else
        be16(body, c->keepalive_s); // keepalive
        mqtt_string(body, c->client_id);
    } else if (const auto* c = std::get_if<ConnAck>(&p)) {
        first = 0x20;
        body.push_back(0x00); // session present = 0 (clean sessions only)
        body.push_back(c->return_code);
    } else if (const auto* pub = std::get_if<Publish>(&p)) {
        if (pub->qos > 1) raise(Errc::invalid_argument, "qos2 not supported");
        if (pub->qos == 1 && pub->packet_id == 0)
            raise(Errc::invalid_argument, "qos1 publish requires nonzero packet id");
        if (has_wildcard(pub->topic)) raise(Errc::invalid_argument, "publish topic must not contain wildcards");
        first = static_cast<uint8_t>(0x30 | (pub->dup ? 0x08 : 0) | (pub->qos << 1));
        mqtt_string(body, pub->topic);
        if (pub->qos == 1) be16(body, pub->packet_id);
        body.insert(body.end(), pub->payload.begin(), pub->payload.end());
    } else if (const auto* a = std::get_if<PubAck>(&p)) {
        first = 0x40;
        be16(body, a->packet_id);
    } else if (const auto* s = std::get_if<Subscribe>(&p)) {
        if (s->filters.empty()) raise(Errc::invalid_argument, "subscribe needs at least one filter");
        first = 0x82; // reserved flags 0010
        be16(body, s->packet_id);
        for (const auto& [filter, qos] : s->filters) {
            mqtt_string(body, filter);
            body.push_back(qos);
        }
    } else if (const auto* s = std::get_if<SubAck>(&p)) {
        first = 0x90;
        be16(body, s->packet_id);
        for (uint8_t g : s->granted) body.push_back(g);
    } else if (std::holds_alternative<PingReq>(p)) {
        first = 0xC0;
    } else if (std::holds_alternative<PingResp>(p)) {
        first = 0xD0;
    } else {
        first = 0xE0; // disconnect
    }

    std::vector<uint8_t> out;
    out.reserve(body.size() + 5);
    out.push_back(first);
    remaining_length(out, body.size());
    out.insert(out.end(), body.begin(), body.end());
    return out;
}

DecodeResult decode_packet(std::span<const uint8_t> buf) {
    DecodeResult need_more;
    need_more.status = DecodeStatus::need_more;
    if (buf.empty()) return need_more;

    const uint8_t first = buf[0];
    const uint8_t type = first >> 4;
    const uint8_t flags = first & 0x0f;
    if (type == 0 || type == 15) return malformed("reserved packet type");

    // Remaining Length: up to 4 bytes, 7 bits each.
    uint32_t rl = 0;
    uint32_t mult = 1;
    size_t idx = 1;
    while (true) {
        if (idx >= buf.size()) return need_more;
        uint8_t byte = buf[idx++];
        rl += static_cast<uint32_t>(byte & 0x7f) * mult;
        if (!(byte & 0x80)) break;
        if (idx > 4) return malformed("remaining length exceeds 4 bytes");
        mult *= 128;
    }
    if (buf.size() < idx + rl) return need_more;

    BodyReader r{buf.subspan(idx, rl)};
    DecodeResult res;
    res.status = DecodeStatus::ok;
    res.consumed = idx + rl;

    auto check_flags = [&](uint8_t expected) { return flags == expected; };

    switch (static_cast<PacketType>(type)) {
    case PacketType::connect: {
        if (!check_flags(0)) return malformed("CONNECT flags must be 0");
        std::string proto;
        uint8_t level, cflags;
        uint16_t keepalive;
        Connect c;
        if (!r.str(proto) || !r.u8(level) || !r.u8(cflags) || !r.u16(keepalive) || !r.str(c.client_id))
            return malformed("truncated CONNECT");
        if (proto != "MQTT" || level != 0x04) return malformed("unsupported protocol");
        if (cflags != 0x02) return malformed("only CleanSession=1 without will/auth is supported");
        if (r.remaining() != 0) return malformed("trailing bytes in CONNECT");
        c.keepalive_s = keepalive;
        res.packet = std::move(c);
        return res;
    }
    case PacketType::connack: {
        if (!check_flags(0)) return malformed("CONNACK flags must be 0");
        uint8_t sp, rc;
        if (!r.u8(sp) || !r.u8(rc) || r.remaining() != 0) return malformed("bad CONNACK body");
        res.packet = ConnAck{rc};
        return res;
    }
    case PacketType::publish: {
        Publish pub;
        pub.dup = (flags & 0x08) != 0;
        pub.qos = (flags >> 1) & 0x03;
        if (pub.qos > 1) return malformed("qos2 not supported");
        if (flags & 0x01) return malformed("retain not supported");
        if (pub.qos == 0 && pub.dup) return malformed("dup flag with qos0");
        if (!r.str(pub.topic)) return malformed("truncated PUBLISH topic");
        if (pub.topic.empty() || has_wildcard(pub.topic)) return malformed("invalid publish topic");
        if (pub.qos == 1) {
            if (!r.u16(pub.packet_id)) return malformed("truncated PUBLISH packet id");
            if (pub.packet_id == 0) return malformed("qos1 packet id must be nonzero");
        }
        pub.payload.assign(r.b.begin() + r.pos, r.b.end());
        res.packet = std::move(pub);
        return res;
    }
    case PacketType::puback: {
        if (!check_flags(0)) return malformed("PUBACK flags must be 0");
        PubAck a;
        if (!r.u16(a.packet_id) || r.remaining() != 0) return malformed("bad PUBACK body");
        res.packet = a;
        return res;
    }
    case PacketType::subscribe: {
        if (!check_flags(2)) return malformed("SUBSCRIBE flags must be 0010");
        Subscribe s;
        if (!r.u16(s.packet_id)) return malformed("truncated SUBSCRIBE");
        if (s.packet_id == 0) return malformed("subscribe packet id must be nonzero");
        while (r.remaining() > 0) {
            std::string filter;
            uint8_t qos;
            if (!r.str(filter) || !r.u8(qos)) return malformed("truncated SUBSCRIBE filter");
            if (qos > 1) return malformed("requested qos above 1");
            s.filters.emplace_back(std::move(filter), qos);
        }
        if (s.filters.empty()) return malformed("SUBSCRIBE without filters");
        res.packet = std::move(s);
        return res;
    }
    case PacketType::suback: {
        if (!check_flags(0)) return malformed("SUBACK flags must be 0");
        SubAck s;
        if (!r.u16(s.packet_id)) return malformed("truncated SUBACK");
        while (r.remaining() > 0) {
            uint8_t g;
            r.u8(g);
            s.granted.push_back(g);
        }
        if (s.granted.empty()) return malformed("SUBACK without return codes");
        res.packet = std::move(s);
        return res;
    }
    case PacketType::pingreq:
    case PacketType::pingresp:
    case PacketType::disconnect: {
        if (!check_flags(0)) return malformed("flags must be 0");
        if (rl != 0) return malformed("unexpected body");
        if (type == static_cast<uint8_t>(PacketType::pingreq)) res.packet = PingReq{};
        else if (type == static_cast<uint8_t>(PacketType::pingresp)) res.packet = PingResp{};
        else res.packet = Disconnect{};
        return res;
    }
    default:
        return malformed("unsupported packet type");
    }
}

} // namespace cw::wire
