#pragma once

#include <atomic>
#include <string>

#include "pipeline/config.hpp"
#include "store/cycle_store.hpp"

namespace cw {

// The Fig-2-shaped pipeline, wired in one process: simulator publishes over
// MQTT to the embedded broker, the bridge appends every payload to the
// event-log topic "raw", and two independent consumer groups
// ("store-writer", "analytics") assemble cycles into the column store and
// the reports NDJSON. Returns the process exit code.
int cmd_run(const RunConfig& cfg, const std::atomic<bool>& stop);

// Simulator alone, publishing to an external broker.
int cmd_simulate(const RunConfig& cfg, const std::atomic<bool>& stop);

// Broker + event-log bridge alone, until stopped.
int cmd_broker(const RunConfig& cfg, const std::atomic<bool>& stop);

// Offline detector pass over the store; equals the online reports.
int cmd_analyze(const RunConfig& cfg, const std::string& out_path);

std::string cmd_stats(const RunConfig& cfg, int fleet_cells);

int cmd_export(const RunConfig& cfg, const std::string& format, const CycleStore::ScanSelection& sel,
               const std::string& out_path);

} // namespace cw
