#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "model/catalog.hpp"

namespace cw {

// The JSON document carried by one MQTT publish: every value one device
// produced in one second. Keys in `values` are machine-native source names.
struct DeviceMessage {
    int64_t ts_ms = 0;
    std::string cell_id;
    DeviceClass device = DeviceClass::injection_machine;
    std::vector<std::pair<std::string, double>> values; // (source_name, value)
};

// Serialized form: {"ts":..., "cell":"...", "device":"...", "values":{...}}.
// Field and value order is deterministic so byte-for-byte comparisons hold.
std::string payload_json(const DeviceMessage& msg);

// Same document with a trailing "cycle_index" field; this is the NDJSON
// export row and the raw-JSON baseline the compression ratio is measured
// against.
std::string payload_json_with_cycle(const DeviceMessage& msg, uint64_t cycle_index);

// Strict parse of payload_json output (also accepts the cycle_index variant).
// Returns nullopt on malformed input.
std::optional<DeviceMessage> parse_payload(const std::string& json, uint64_t* cycle_index_out = nullptr);

std::string topic_for(const std::string& cell_id, DeviceClass device);

} // namespace cw
