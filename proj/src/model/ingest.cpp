#include "model/ingest.hpp"

#include "model/payload.hpp"
#include "util/numfmt.hpp"

namespace cw {

IngestAdapter::IngestAdapter(const ParameterCatalog& catalog, CycleAssembler& assembler,
                             QuarantineSink quarantine)
    : catalog_(catalog), assembler_(assembler), quarantine_(std::move(quarantine)) {}

void IngestAdapter::on_payload(const std::string& payload) {
    auto msg = parse_payload(payload);
    if (!msg) {
        ++counters_.malformed_payloads;
        if (quarantine_) quarantine_("{\"error\":\"malformed_payload\"}");
        return;
    }
    ++counters_.messages;
    std::vector<std::pair<int, double>> resolved;
    resolved.reserve(msg->values.size());
    for (const auto& [source, value] : msg->values) {
        const ParameterSpec* spec = catalog_.try_normalize(source, msg->device);
        if (!spec) {
            ++counters_.quarantined_samples;
            if (quarantine_) {
                std::string line = "{\"ts\":" + std::to_string(msg->ts_ms) + ",\"cell\":\"" + msg->cell_id +
                                   "\",\"device\":\"" + device_class_name(msg->device) + "\",\"param\":\"" +
                                   source + "\",\"value\":" + format_double(value) +
                                   ",\"error\":\"unknown_parameter\"}";
                quarantine_(line);
            }
            continue;
        }
        resolved.emplace_back(catalog_.index_of(spec->canonical_id), value);
    }
    assembler_.on_message(msg->cell_id, msg->device, msg->ts_ms, resolved);
}

} // namespace cw
