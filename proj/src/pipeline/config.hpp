#pragma once

#include <string>
#include <vector>

#include "analytics/types.hpp"

namespace cw {

// Pipeline configuration: line-oriented `key = value` files with `#`
// comments; CLI flags override file values. Paths default under the data
// root (CYCLEWATCH_ROOT or ./cyclewatch-data).
struct RunConfig {
    std::string broker_host = "127.0.0.1";
    int broker_port = 1883;

    std::string data_root;
    std::string log_root;
    std::string store_path;
    std::string reports_path;
    std::string labels_path;
    std::string manifest_path;
    std::string quarantine_path;
    std::string catalog_path; // empty = embedded demo catalog

    int cells = 10;
    uint64_t seed = 42;
    double anomaly_rate = 0.0;
    int64_t duration_s = 60;
    double cycle_len_mean_s = 30.0;
    double cycle_len_jitter_s = 1.5;
    bool realtime = false;
    int64_t epoch_ms = 1'735'689'600'000;

    AnalyticsConfig analytics;
    int store_batch = 64; // frames buffered per cell before a row-group write

    void set(const std::string& key, const std::string& value);
    void load_file(const std::string& path);

    // Fills path defaults from data_root / environment and validates.
    void finalize();

    std::vector<std::pair<std::string, std::string>> items() const;
};

} // namespace cw
