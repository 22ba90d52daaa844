#pragma once

#include <string>

#include "model/catalog.hpp"
#include "model/frame.hpp"

namespace cw {

// Appends the NDJSON rows for one frame: per tick second, per device class,
// one payload-shaped line with a trailing cycle_index field. This is both
// the `export --format ndjson` row format and the raw-JSON baseline that
// compression_stats measures against, so the two are byte-identical by
// construction.
void append_frame_ndjson(const ParameterCatalog& catalog, const CycleFrame& frame, std::string& out);

uint64_t frame_ndjson_bytes(const ParameterCatalog& catalog, const CycleFrame& frame);

} // namespace cw
