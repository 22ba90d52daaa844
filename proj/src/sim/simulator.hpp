#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "model/catalog.hpp"
#include "model/frame.hpp"
#include "model/payload.hpp"
#include "util/rng.hpp"

namespace cw {

enum class AnomalyKind : uint8_t { spike, drift, stuck_sensor, correlation_break, energy_surge };
const char* anomaly_kind_name(AnomalyKind k);

struct AnomalyLabel {
    std::string cell_id;
    uint64_t cycle_index = 0;
    AnomalyKind kind = AnomalyKind::spike;
    std::vector<std::string> affected_params;

    std::string to_ndjson() const;
};

struct CellConfig {
    std::string cell_id;
    const ParameterCatalog* catalog = nullptr;
    double cycle_len_s_mean = 30.0;
    double cycle_len_s_jitter = 1.5;
    uint64_t seed = 42;
    double anomaly_rate = 0.0;
    int64_t epoch_ms = 1'735'689'600'000; // 2025-01-01T00:00:00Z

    void validate() const;
};

// Clean cycle: a deterministic function of (seed, cell_id, cycle_index).
// Every parameter follows a smooth phase template (injection / hold /
// plastication / ejection segments) inside its nominal range, with AR(1)
// noise and slow ambient drift; the energy register accumulates the
// integrated power trace across cycles. All published values sit on the
// 1e-6 grid. Cost is O(cycle_index) because the cycle start time and the
// register value are prefix sums; the streaming generator below caches
// them.
CycleFrame generate_cycle(const CellConfig& cfg, uint64_t cycle_index);

// Applies one labeled fault to a clean frame. spike: 3 consecutive ticks
// shifted by 8 in-cycle sigma; drift: linear ramp to 4 sigma by cycle end;
// stuck_sensor: row frozen at its first tick; correlation_break: row
// replaced by an independent tone spanning the same value range;
// energy_surge: register slope and the power/current rows scaled 1.5x.
// Values never leave [nominal_min - 2*range, nominal_max + 2*range].
AnomalyLabel inject_anomaly(CycleFrame& f, AnomalyKind kind, Rng& rng, const ParameterCatalog& catalog);

// Streaming per-cell generator with cached prefix state and the per-cycle
// anomaly decision applied.
class CellGenerator {
public:
    explicit CellGenerator(CellConfig cfg);

    // Frame covering the given second since epoch (monotone calls only).
    const CycleFrame& frame_covering(int64_t second);
    const std::optional<AnomalyLabel>& current_label() const { return label_; }
    uint64_t current_index() const { return index_; }
    int64_t current_end_s() const { return end_s_; }

private:
    void advance();

    CellConfig cfg_;
    CycleFrame frame_;
    std::optional<AnomalyLabel> label_;
    uint64_t index_ = 0;
    int64_t start_s_ = 0;
    int64_t end_s_ = 0;
    bool primed_ = false;
    double register_base_ = 0.0;
};

// Per-second publish plan: one DeviceMessage per device class per cell per
// second, in deterministic (cell, device) order.
struct SimConfig {
    int cells = 10;
    uint64_t seed = 42;
    double anomaly_rate = 0.0;
    int64_t duration_s = 60;
    double cycle_len_s_mean = 30.0;
    double cycle_len_s_jitter = 1.5;
    int64_t epoch_ms = 1'735'689'600'000;
    const ParameterCatalog* catalog = nullptr;
};

struct SimCounters {
    uint64_t messages = 0;
    uint64_t values = 0;
    uint64_t full_cycles = 0; // cycles fully inside the run
    uint64_t labels = 0;
};

std::string sim_cell_id(int i); // "cell01", "cell02", ...

// Drives the generators over the whole duration. `publish` receives each
// message in order; `label_sink` receives labels of fully covered cycles.
SimCounters run_simulation(const SimConfig& cfg,
                           const std::function<void(const std::string& topic, const std::string& payload)>& publish,
                           const std::function<void(const AnomalyLabel&)>& label_sink,
                           const std::function<bool()>& stop = {});

} // namespace cw
