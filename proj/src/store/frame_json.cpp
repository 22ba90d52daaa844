#include "store/frame_json.hpp"

#include <unordered_map>

#include "model/payload.hpp"

namespace cw {

void append_frame_ndjson(const ParameterCatalog& catalog, const CycleFrame& frame, std::string& out) {
    // Row of each frame param, or -1 when the frame is a projection that
    // does not carry a catalog param.
    std::unordered_map<std::string, int> row_of;
    for (size_t i = 0; i < frame.params->size(); ++i) row_of[(*frame.params)[i]] = static_cast<int>(i);

    // Device order is enum order, params within a device in catalog order -
    // the same order the simulator publishes.
    std::vector<std::vector<std::pair<const std::string*, int>>> by_device(kDeviceClassCount);
    for (size_t i = 0; i < catalog.size(); ++i) {
        const auto& spec = catalog.at(i);
        auto it = row_of.find(spec.canonical_id);
        if (it == row_of.end()) continue;
        by_device[static_cast<int>(spec.device_class)].emplace_back(&spec.source_name, it->second);
    }

    DeviceMessage msg;
    msg.cell_id = frame.cell_id;
    const size_t T = frame.tick_count();
    for (size_t k = 0; k < T; ++k) {
        msg.ts_ms = frame.tick_ts(k);
        for (int d = 0; d < kDeviceClassCount; ++d) {
            if (by_device[d].empty()) continue;
            msg.device = static_cast<DeviceClass>(d);
            msg.values.clear();
            for (const auto& [source, row] : by_device[d])
                msg.values.emplace_back(*source, frame.ticks[row][k]);
            out += payload_json_with_cycle(msg, frame.cycle_index);
            out += '\n';
        }
    }
}

uint64_t frame_ndjson_bytes(const ParameterCatalog& catalog, const CycleFrame& frame) {
    std::string buf;
    buf.reserve(frame.tick_count() * 512);
    append_frame_ndjson(catalog, frame, buf);
    return buf.size();
}

} // namespace cw
