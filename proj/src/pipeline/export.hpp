#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "model/catalog.hpp"
#include "store/cycle_store.hpp"

namespace cw {

// NDJSON export: the compression-baseline serialization, one line per
// (tick, device).
void export_ndjson(const CycleStore& store, const ParameterCatalog& catalog,
                   const CycleStore::ScanSelection& sel, std::ostream& out);

// Wide CSV: one row per (cell, cycle, tick) with a column per parameter.
void export_csv(const CycleStore& store, const CycleStore::ScanSelection& sel, std::ostream& out);

// Re-assembles cycle frames from exported NDJSON text (round-trip checks and
// store rebuilds).
std::vector<CycleFrame> reingest_ndjson(const ParameterCatalog& catalog, std::istream& in);

} // namespace cw
