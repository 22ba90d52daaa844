#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "model/catalog.hpp"

namespace cw {

// One reading of one parameter at one instant.
struct TelemetrySample {
    std::string cell_id;
    DeviceClass device_class;
    int param_index; // index into the active catalog
    int64_t ts_ms;
    double value;
};

// One machine cycle: P parameter rows over T whole-second ticks, plus the
// two per-cycle scalars. Row k of ticks belongs to params->at(k).
struct CycleFrame {
    std::string cell_id;
    uint64_t cycle_index = 0;
    int64_t start_ts_ms = 0;
    int64_t end_ts_ms = 0;
    std::shared_ptr<const std::vector<std::string>> params;
    std::vector<std::vector<double>> ticks; // P rows, each of length T
    double energy_kwh = 0.0;
    double part_mass_g = 0.0;
    bool stale = false; // emitted without seeing the closing boundary edge

    size_t param_count() const { return ticks.size(); }
    size_t tick_count() const { return ticks.empty() ? 0 : ticks[0].size(); }
    int64_t tick_ts(size_t k) const { return start_ts_ms + static_cast<int64_t>(k) * 1000; }
};

// Cycle traces interpolated onto a fixed grid of L points so cycles of
// different lengths are comparable.
struct ResampledFrame {
    std::string cell_id;
    uint64_t cycle_index = 0;
    std::shared_ptr<const std::vector<std::string>> params;
    std::vector<std::vector<double>> grid; // P rows, each of length L
};

std::shared_ptr<const std::vector<std::string>> param_names(const ParameterCatalog& cat);

// Linear interpolation of each row from T points onto L equally spaced
// points over [0, T-1]; endpoints are preserved exactly and L == T returns
// the rows unchanged. Throws Errc::degenerate when T < 2 or L < 2.
ResampledFrame resample_frame(const CycleFrame& f, int L);

std::vector<double> resample_row(const std::vector<double>& row, int L);

} // namespace cw
