#include "wire/router.hpp"

#include <algorithm>

#include "wire/topic.hpp"

namespace cw::wire {

namespace {

HandleResult violation(std::string why) {
    HandleResult r;
    r.close_connection = true;
    r.error = std::move(why);
    return r;
}

} // namespace

HandleResult broker_handle(SessionId from, const Packet& p, Registry& registry) {
    HandleResult out;
    auto it = registry.sessions.find(from);
    if (it == registry.sessions.end()) return violation("unknown session");
    SessionInfo& self = it->second;

    if (const auto* c = std::get_if<Connect>(&p)) {
        if (self.connected) return violation("duplicate CONNECT");
        self.connected = true;
        self.client_id = c->client_id;
        self.keepalive_s = c->keepalive_s;
        out.actions.push_back({from, ConnAck{0}});
        return out;
    }

    if (!self.connected) return violation("packet before CONNECT");

    if (const auto* pub = std::get_if<Publish>(&p)) {
        if (pub->qos == 1) out.actions.push_back({from, PubAck{pub->packet_id}});
        for (const auto& [sid, session] : registry.sessions) {
            if (!session.connected) continue;
            uint8_t best = 0;
            bool matched = false;
            for (const auto& [filter, qos] : session.subscriptions) {
                if (topic_matches(filter, pub->topic)) {
                    matched = true;
                    best = std::max(best, qos);
                }
            }
            if (!matched) continue;
            Publish fan;
            fan.topic = pub->topic;
            fan.payload = pub->payload;
            fan.qos = std::min(pub->qos, best);
            out.actions.push_back({sid, std::move(fan)}); // engine assigns qos1 packet ids
        }
        return out;
    }

    if (const auto* sub = std::get_if<Subscribe>(&p)) {
        SubAck ack;
        ack.packet_id = sub->packet_id;
        for (const auto& [filter, qos] : sub->filters) {
            if (!filter_valid(filter)) {
                ack.granted.push_back(0x80);
                continue;
            }
            uint8_t granted = std::min<uint8_t>(qos, 1);
            // same-filter resubscribe replaces the previous grant
            auto existing = std::find_if(self.subscriptions.begin(), self.subscriptions.end(),
                                         [&](const auto& s) { return s.first == filter; });
            if (existing != self.subscriptions.end()) existing->second = granted;
            else self.subscriptions.emplace_back(filter, granted);
            ack.granted.push_back(granted);
        }
        out.actions.push_back({from, std::move(ack)});
        return out;
    }

    if (std::holds_alternative<PubAck>(p)) return out; // engine clears its inflight map
    if (std::holds_alternative<PingReq>(p)) {
        out.actions.push_back({from, PingResp{}});
        return out;
    }
    if (std::holds_alternative<Disconnect>(p)) {
        out.close_connection = true; // clean close, no error
        return out;
    }
    return violation("unexpected packet from client");
}

} // namespace cw::wire
