#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "model/frame.hpp"

namespace cw {

// Builds CycleFrames from per-second device messages. A new cycle begins at
// each rising edge (0 -> 1) of the boundary parameter; missing (param,
// second) pairs are filled by last observation carried forward, leading gaps
// by the first value observed in the cycle.
//
// Handles any number of cells; per-cell processing is strictly sequential
// (samples must arrive with non-decreasing ts_ms per cell). Duplicate
// messages - qos1 redelivery or log replay - are dropped on a per-device
// timestamp high-water mark.
class CycleAssembler {
public:
    struct Options {
        std::string boundary_param = "inj.cycle_flag";
        std::string energy_param = "energy.cum_kwh";   // cumulative register
        std::string mass_param = "scale.part_mass_g";  // last reading = part mass
        int64_t stale_timeout_ms = 600'000;
    };

    struct Counters {
        uint64_t frames = 0;
        uint64_t empty_cycles = 0;
        uint64_t stale_frames = 0;
        uint64_t deduped_messages = 0;
        uint64_t unassigned_samples = 0; // before the first edge or after a stale close
    };

    using FrameSink = std::function<void(CycleFrame&&)>;

    CycleAssembler(const ParameterCatalog& catalog, Options opt, FrameSink sink);

    // One wire message: every value shares (cell, device, ts).
    void on_message(const std::string& cell_id, DeviceClass device, int64_t ts_ms,
                    std::span<const std::pair<int, double>> values);

    // End of stream: emit any open cycle as a stale partial frame.
    void flush();

    const Counters& counters() const { return counters_; }

private:
    struct CellState {
        bool open = false;
        int64_t start_ts = 0;
        int64_t last_obs_ts = 0;
        uint64_t next_cycle_index = 0;
        double prev_boundary = 0.0;
        bool boundary_seen = false;
        std::vector<std::vector<std::pair<int64_t, double>>> obs; // per param
        std::vector<double> last_known;
        std::vector<bool> has_last_known;
        std::map<DeviceClass, int64_t> high_water;
    };

    CellState& cell(const std::string& id);
    void open_cycle(CellState& st, int64_t ts);
    void close_cycle(const std::string& cell_id, CellState& st, int64_t end_ts, bool stale);

    const ParameterCatalog& catalog_;
    Options opt_;
    FrameSink sink_;
    std::shared_ptr<const std::vector<std::string>> params_;
    int boundary_idx_;
    int energy_idx_;
    int mass_idx_;
    Counters counters_;
    std::map<std::string, CellState> cells_;
};

} // namespace cw
