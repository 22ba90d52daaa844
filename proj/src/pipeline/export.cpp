#include "pipeline/export.hpp"

#include <algorithm>
#include <istream>

#include "model/assembler.hpp"
#include "model/ingest.hpp"
#include "model/payload.hpp"
#include "store/frame_json.hpp"
#include "util/error.hpp"
#include "util/numfmt.hpp"

namespace cw {

void export_ndjson(const CycleStore& store, const ParameterCatalog& catalog,
                   const CycleStore::ScanSelection& sel, std::ostream& out) {
    std::string buf;
    store.scan(sel, [&](CycleFrame&& f) {
        buf.clear();
        append_frame_ndjson(catalog, f, buf);
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    });
}

void export_csv(const CycleStore& store, const CycleStore::ScanSelection& sel, std::ostream& out) {
    bool header_done = false;
    std::string line;
    store.scan(sel, [&](CycleFrame&& f) {
        if (!header_done) {
            line = "cell,cycle_index,tick,ts_ms,stale";
            for (const auto& p : *f.params) line += "," + p;
            line += '\n';
            out.write(line.data(), static_cast<std::streamsize>(line.size()));
            header_done = true;
        }
        const size_t T = f.tick_count();
        for (size_t k = 0; k < T; ++k) {
            line.clear();
            line += f.cell_id;
            line += ',';
            line += std::to_string(f.cycle_index);
            line += ',';
            line += std::to_string(k);
            line += ',';
            line += std::to_string(f.tick_ts(k));
            line += ',';
            line += f.stale ? '1' : '0';
            for (size_t p = 0; p < f.ticks.size(); ++p) {
                line += ',';
                append_double(line, f.ticks[p][k]);
            }
            line += '\n';
            out.write(line.data(), static_cast<std::streamsize>(line.size()));
        }
    });
}

std::vector<CycleFrame> reingest_ndjson(const ParameterCatalog& catalog, std::istream& in) {
    std::vector<CycleFrame> frames;
    CycleAssembler assembler(catalog, {}, [&](CycleFrame&& f) { frames.push_back(std::move(f)); });
    IngestAdapter adapter(catalog, assembler, nullptr);

    // Lines arrive ordered by (cell, cycle, tick); the assembler needs
    // non-decreasing timestamps per cell, which that ordering guarantees.
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        adapter.on_payload(line);
    }
    assembler.flush();
    std::sort(frames.begin(), frames.end(), [](const CycleFrame& a, const CycleFrame& b) {
        if (a.cell_id != b.cell_id) return a.cell_id < b.cell_id;
        return a.cycle_index < b.cycle_index;
    });
    return frames;
}

} // namespace cw
