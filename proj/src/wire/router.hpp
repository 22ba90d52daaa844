#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "wire/packet.hpp"

namespace cw::wire {

using SessionId = uint64_t;

struct SessionInfo {
    SessionId id = 0;
    std::string client_id;
    bool connected = false; // CONNECT accepted
    uint16_t keepalive_s = 0;
    std::vector<std::pair<std::string, uint8_t>> subscriptions; // (filter, granted qos)
};

// Everything the routing decision needs; the broker engine keeps one behind
// a readers-writer lock and snapshots are cheap.
struct Registry {
    std::map<SessionId, SessionInfo> sessions;
};

struct Action {
    SessionId target = 0;
    Packet packet;
};

struct HandleResult {
    std::vector<Action> actions;
    bool close_connection = false; // protocol violation: drop the session
    std::string error;
};

// Pure routing step: applies one inbound packet from `from` to the registry
// and returns the packets to emit. Publish fans out to every session with a
// matching filter at min(publish qos, subscription qos); qos1 publishes are
// acknowledged to the sender (the engine delays the PubAck until the bridge
// has durably logged the message). Mutates only the registry entries for
// `from` (connect state, subscriptions).
HandleResult broker_handle(SessionId from, const Packet& p, Registry& registry);

} // namespace cw::wire
