#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "model/catalog.hpp"
#include "model/frame.hpp"
#include "store/column_codec.hpp"

namespace cw {

// Columnar cycle store, file magic "CCF1" (all integers little-endian).
//
//   [magic][row group]...[row group][footer][footer len u32][magic]
//
// Row groups hold up to 256 cycles of one cell: one chunk per schema param
// plus a tick-timestamp column and the two per-cycle scalar columns, with a
// trailing CRC32. The footer carries the schema and the group index
// (offsets, cell, cycle range, per-column min/max) and is rewritten after
// the new groups on every commit; a tiny sidecar (<path>.commit) naming the
// live footer is replaced via write-temp-then-rename, which makes the
// footer switch atomic - a crash anywhere leaves the store opening with
// exactly the previously committed groups. Superseded footers remain as
// dead bytes inside the file (a few hundred bytes per commit). A cleanly
// committed store is also self-describing without the sidecar through the
// trailing [footer len][magic].
class CycleStore {
public:
    struct ScanSelection {
        std::optional<std::string> cell;
        std::optional<std::pair<uint64_t, uint64_t>> cycle_range; // inclusive
        std::optional<std::vector<std::string>> params;
    };

    struct ScanStats {
        uint64_t groups_read = 0;
        uint64_t groups_skipped = 0;
    };

    struct StatsReport {
        uint64_t columnar_bytes = 0;
        uint64_t json_bytes = 0;
        double ratio = 0.0;
        uint64_t cycles = 0;
        uint64_t cells_observed = 0;
        double observed_cell_seconds = 0.0;
        int fleet_cells = 0;
        double annualized_tb = 0.0;
        std::string to_json() const;
    };

    // Opens an existing store, or creates one with the given schema when the
    // file does not exist. Writers must pass a catalog (the raw-JSON
    // baseline is bookkept against it at write time).
    static CycleStore open(const std::string& path, const ParameterCatalog* catalog_for_write = nullptr);

    // Appends the frames as one or more row groups (at most 256 cycles
    // each) and commits the footer once. Frames must be one cell with
    // contiguous cycle_index and the schema's exact param list. Returns the
    // number of bytes appended.
    uint64_t write_rowgroup(const std::vector<CycleFrame>& frames);

    // Streams frames in (cell, cycle_index) order, decoding only requested
    // columns; groups whose cell or cycle range cannot match are skipped
    // via the footer index.
    ScanStats scan(const ScanSelection& sel, const std::function<void(CycleFrame&&)>& sink) const;

    std::vector<CycleFrame> scan_all() const;

    StatsReport compression_stats(int fleet_cells = 80) const;

    const std::vector<std::string>& schema() const { return schema_; }
    uint64_t cycle_count() const;
    uint64_t group_count() const { return groups_.size(); }
    std::optional<uint64_t> max_cycle_index(const std::string& cell) const;

    const std::string& path() const { return path_; }

    // Test hook: invoked with a stage name at each write step; returning
    // true abandons the write mid-flight the way a crash would.
    std::function<bool(const char*)> test_crash_hook;

private:
    struct GroupMeta {
        uint64_t offset = 0;
        uint32_t byte_len = 0;
        std::string cell;
        uint64_t cyc_lo = 0;
        uint64_t cyc_hi = 0;
        uint32_t n_cycles = 0;
        uint32_t total_ticks = 0;
        uint64_t raw_json_bytes = 0;
        int64_t min_start_ts = 0;
        int64_t max_end_ts = 0;
        std::vector<std::pair<double, double>> column_minmax; // schema cols + _ts/_energy/_mass
    };

    CycleStore() = default;

    void load_footer(const std::vector<uint8_t>& footer, const std::string& why);
    std::vector<uint8_t> build_footer() const;
    void commit_footer(uint64_t data_end);
    std::vector<uint8_t> encode_group(const CycleFrame* frames, size_t n, GroupMeta& meta) const;
    void read_group(const GroupMeta& meta, const ScanSelection& sel,
                    const std::function<void(CycleFrame&&)>& sink) const;

    std::string path_;
    const ParameterCatalog* catalog_ = nullptr;
    std::vector<std::string> schema_;
    std::vector<uint8_t> dtypes_;
    std::vector<GroupMeta> groups_;
    uint64_t total_raw_json_bytes_ = 0;
    uint64_t data_end_ = 0; // file position where the next group goes
    int fd_ = -1;

public:
    ~CycleStore();
    CycleStore(CycleStore&& other) noexcept;
    CycleStore& operator=(CycleStore&&) = delete;
    CycleStore(const CycleStore&) = delete;
};

} // namespace cw
