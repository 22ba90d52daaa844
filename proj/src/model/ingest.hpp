#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "model/assembler.hpp"
#include "model/catalog.hpp"

namespace cw {

// Normalizes raw wire payloads into assembler input. Samples whose source
// name the catalog cannot resolve are handed to the quarantine sink (never
// silently dropped) together with a reason line.
class IngestAdapter {
public:
    struct Counters {
        uint64_t messages = 0;
        uint64_t malformed_payloads = 0;
        uint64_t quarantined_samples = 0;
    };

    using QuarantineSink = std::function<void(const std::string& ndjson_line)>;

    IngestAdapter(const ParameterCatalog& catalog, CycleAssembler& assembler, QuarantineSink quarantine);

    // One raw record as appended by the broker bridge.
    void on_payload(const std::string& payload);

    const Counters& counters() const { return counters_; }

private:
    const ParameterCatalog& catalog_;
    CycleAssembler& assembler_;
    QuarantineSink quarantine_;
    Counters counters_;
};

} // namespace cw
