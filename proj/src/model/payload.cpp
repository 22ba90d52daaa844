#include "model/payload.hpp"

#include <nlohmann/json.hpp>

#include "util/numfmt.hpp"

namespace cw {

namespace {

void append_payload_prefix(std::string& out, const DeviceMessage& msg) {
    out += "{\"ts\":";
    out += std::to_string(msg.ts_ms);
    out += ",\"cell\":\"";
    out += msg.cell_id;
    out += "\",\"device\":\"";
    out += device_class_name(msg.device);
    out += "\",\"values\":{";
    bool first = true;
    for (const auto& [name, value] : msg.values) {
        if (!first) out += ',';
        first = false;
        out += '"';
        out += name;
        out += "\":";
        append_double(out, value);
    }
    out += '}';
}

} // namespace

std::string payload_json(const DeviceMessage& msg) {
    std::string out;
    out.reserve(64 + msg.values.size() * 24);
    append_payload_prefix(out, msg);
    out += '}';
    return out;
}

std::string payload_json_with_cycle(const DeviceMessage& msg, uint64_t cycle_index) {
    std::string out;
    out.reserve(80 + msg.values.size() * 24);
    append_payload_prefix(out, msg);
    out += ",\"cycle_index\":";
    out += std::to_string(cycle_index);
    out += '}';
    return out;
}

std::optional<DeviceMessage> parse_payload(const std::string& json, uint64_t* cycle_index_out) {
    nlohmann::json doc = nlohmann::json::parse(json, nullptr, /*allow_exceptions=*/false);
    if (doc.is_discarded() || !doc.is_object()) return std::nullopt;
    auto ts = doc.find("ts");
    auto cell = doc.find("cell");
    auto device = doc.find("device");
    auto values = doc.find("values");
    if (ts == doc.end() || cell == doc.end() || device == doc.end() || values == doc.end())
        return std::nullopt;
    if (!ts->is_number_integer() || !cell->is_string() || !device->is_string() || !values->is_object())
        return std::nullopt;
    DeviceMessage msg;
    msg.ts_ms = ts->get<int64_t>();
    msg.cell_id = cell->get<std::string>();
    auto dev = device_class_from(device->get<std::string>());
    if (!dev) return std::nullopt;
    msg.device = *dev;
    msg.values.reserve(values->size());
    for (auto it = values->begin(); it != values->end(); ++it) {
        if (!it.value().is_number()) return std::nullopt;
        msg.values.emplace_back(it.key(), it.value().get<double>());
    }
    if (cycle_index_out) {
        auto ci = doc.find("cycle_index");
        *cycle_index_out = (ci != doc.end() && ci->is_number_unsigned()) ? ci->get<uint64_t>() : 0;
    }
    return msg;
}

std::string topic_for(const std::string& cell_id, DeviceClass device) {
    std::string t = "flatform/";
    t += cell_id;
    t += '/';
    t += device_class_name(device);
    t += "/data";
    return t;
}

} // namespace cw
