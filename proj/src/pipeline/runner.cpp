#include "pipeline/runner.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <thread>
#include <vector>

#include "analytics/engine.hpp"
#include "log/event_log.hpp"
#include "model/assembler.hpp"
#include "model/ingest.hpp"
#include "model/payload.hpp"
#include "pipeline/export.hpp"
#include "sim/simulator.hpp"
#include "util/error.hpp"
#include "wire/broker.hpp"
#include "wire/client.hpp"

namespace fs = std::filesystem;

namespace cw {

namespace {

constexpr const char* kRawTopic = "raw";

ParameterCatalog load_catalog(const RunConfig& cfg) {
    return cfg.catalog_path.empty() ? demo_catalog() : ParameterCatalog::load_file(cfg.catalog_path);
}

SimConfig sim_config(const RunConfig& cfg, const ParameterCatalog& catalog) {
    SimConfig sc;
    sc.cells = cfg.cells;
    sc.seed = cfg.seed;
    sc.anomaly_rate = cfg.anomaly_rate;
    sc.duration_s = cfg.duration_s;
    sc.cycle_len_s_mean = cfg.cycle_len_mean_s;
    sc.cycle_len_s_jitter = cfg.cycle_len_jitter_s;
    sc.epoch_ms = cfg.epoch_ms;
    sc.catalog = &catalog;
    return sc;
}

void write_sorted_reports(std::vector<AnomalyReport>& reports, const std::string& path) {
    std::sort(reports.begin(), reports.end(), [](const AnomalyReport& a, const AnomalyReport& b) {
        if (a.cell_id != b.cell_id) return a.cell_id < b.cell_id;
        if (a.cycle_index != b.cycle_index) return a.cycle_index < b.cycle_index;
        return static_cast<int>(a.detector) < static_cast<int>(b.detector);
    });
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) raise(Errc::storage, "cannot write reports file: " + path);
    for (const auto& r : reports) out << r.to_ndjson() << '\n';
}

int64_t wall_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

struct RunCounts {
    uint64_t publishes = 0;
    uint64_t values = 0;
    uint64_t full_cycles = 0;
    uint64_t labels = 0;
    uint64_t bridge_appends = 0;
    uint64_t store_frames = 0;
    uint64_t store_stale = 0;
    uint64_t store_deduped = 0;
    uint64_t analytics_frames = 0;
    uint64_t analytics_deduped = 0;
    uint64_t reports = 0;
    uint64_t quarantined = 0;
};

void write_manifest(const RunConfig& cfg, const RunCounts& c, bool interrupted, int64_t started,
                    int64_t finished) {
    std::ofstream out(cfg.manifest_path, std::ios::binary | std::ios::trunc);
    if (!out) raise(Errc::storage, "cannot write manifest: " + cfg.manifest_path);
    out << "{\n  \"version\": \"0.1.0\",\n  \"command\": \"run\",\n";
    out << "  \"interrupted\": " << (interrupted ? "true" : "false") << ",\n";
    out << "  \"config\": {\n";
    auto items = cfg.items();
    for (size_t i = 0; i < items.size(); ++i) {
        out << "    \"" << items[i].first << "\": \"" << items[i].second << "\"";
        out << (i + 1 < items.size() ? ",\n" : "\n");
    }
    out << "  },\n  \"counts\": {\n";
    const std::pair<const char*, uint64_t> counts[] = {
        {"publishes", c.publishes},
        {"values", c.values},
        {"full_cycles", c.full_cycles},
        {"labels", c.labels},
        {"bridge_appends", c.bridge_appends},
        {"store_frames", c.store_frames},
        {"store_stale_frames", c.store_stale},
        {"store_deduped_messages", c.store_deduped},
        {"analytics_frames", c.analytics_frames},
        {"analytics_deduped_messages", c.analytics_deduped},
        {"reports", c.reports},
        {"quarantined_samples", c.quarantined},
    };
    for (size_t i = 0; i < std::size(counts); ++i) {
        out << "    \"" << counts[i].first << "\": " << counts[i].second;
        out << (i + 1 < std::size(counts) ? ",\n" : "\n");
    }
    out << "  },\n";
    out << "  \"started_at_ms\": " << started << ",\n";
    out << "  \"finished_at_ms\": " << finished << "\n}\n";
}

// Sequential consumer over the raw topic. Offsets are committed only after
// a clean drain; a crashed run replays from the last commit and relies on
// timestamp dedup plus idempotent store appends for exactly-once effects.
class RawConsumer {
public:
    RawConsumer(EventLog& log, std::string group) : log_(log), group_(std::move(group)) {
        next_ = log_.fetch_committed(group_, kRawTopic);
    }

    // Feeds payloads until the drain flag is up and the log tail is reached.
    void pump(IngestAdapter& adapter, const std::atomic<bool>& drain) {
        while (true) {
            auto recs = log_.read(kRawTopic, next_, 512);
            if (recs.empty()) {
                if (drain && next_ >= log_.end_offset(kRawTopic)) return;
                std::this_thread::sleep_for(std::chrono::milliseconds(2));
                continue;
            }
            for (const auto& rec : recs) {
                std::string payload(rec.payload.begin(), rec.payload.end());
                adapter.on_payload(payload);
            }
            next_ = recs.back().offset + 1;
        }
    }

    void commit() { log_.commit_offset(group_, kRawTopic, next_); }

private:
    EventLog& log_;
    std::string group_;
    uint64_t next_ = 0;
};

} // namespace

int cmd_run(const RunConfig& cfg, const std::atomic<bool>& stop) {
    const int64_t started = wall_ms();
    ParameterCatalog catalog = load_catalog(cfg);
    fs::create_directories(cfg.data_root);

    EventLog log(cfg.log_root);

    std::atomic<uint64_t> last_raw_offset{0};
    wire::Broker broker({cfg.broker_host, static_cast<uint16_t>(cfg.broker_port), 1024});
    broker.set_bridge(
        "flatform/#",
        [&](const std::string&, const std::vector<uint8_t>& payload) {
            last_raw_offset = log.append(kRawTopic, payload);
        },
        [&] { log.wait_durable(kRawTopic, last_raw_offset); });
    broker.start();

    CycleStore store = CycleStore::open(cfg.store_path, &catalog);

    std::ofstream quarantine_out(cfg.quarantine_path, std::ios::binary | std::ios::app);
    std::mutex quarantine_mu;
    auto quarantine = [&](const std::string& line) {
        std::lock_guard lk(quarantine_mu);
        quarantine_out << line << '\n';
    };

    std::atomic<bool> drain{false};
    RunCounts counts;
    std::exception_ptr consumer_error;
    std::mutex error_mu;
    auto capture_error = [&] {
        std::lock_guard lk(error_mu);
        if (!consumer_error) consumer_error = std::current_exception();
        drain = true;
    };

    // --- store-writer consumer group ---
    std::thread store_thread([&] {
        try {
            std::map<std::string, std::vector<CycleFrame>> buffers;
            std::map<std::string, uint64_t> skip_through; // idempotent resume
            auto flush_cell = [&](const std::string& cell) {
                auto& buf = buffers[cell];
                if (!buf.empty()) {
                    store.write_rowgroup(buf);
                    buf.clear();
                }
            };
            CycleAssembler assembler(catalog, {}, [&](CycleFrame&& f) {
                auto it = skip_through.find(f.cell_id);
                if (it == skip_through.end()) {
                    auto max = store.max_cycle_index(f.cell_id);
                    it = skip_through.emplace(f.cell_id, max ? *max + 1 : 0).first;
                }
                if (f.cycle_index < it->second) return; // already persisted by a previous run
                if (f.stale) ++counts.store_stale;
                ++counts.store_frames;
                auto& buf = buffers[f.cell_id];
                buf.push_back(std::move(f));
                if (buf.size() >= static_cast<size_t>(cfg.store_batch)) flush_cell(buf.front().cell_id);
            });
            IngestAdapter adapter(catalog, assembler, quarantine);
            RawConsumer consumer(log, "store-writer");
            consumer.pump(adapter, drain);
            assembler.flush();
            for (auto& [cell, buf] : buffers)
                if (!buf.empty()) store.write_rowgroup(buf);
            consumer.commit();
            counts.store_deduped = assembler.counters().deduped_messages;
            counts.quarantined += adapter.counters().quarantined_samples;
        } catch (...) {
            capture_error();
        }
    });

    // --- analytics consumer group ---
    std::vector<AnomalyReport> reports;
    std::thread analytics_thread([&] {
        try {
            AnalyticsEngine engine(cfg.analytics);
            CycleAssembler assembler(catalog, {}, [&](CycleFrame&& f) {
                auto batch = engine.on_frame(f);
                for (auto& r : batch) reports.push_back(std::move(r));
            });
            IngestAdapter adapter(catalog, assembler, nullptr);
            RawConsumer consumer(log, "analytics");
            consumer.pump(adapter, drain);
            assembler.flush();
            write_sorted_reports(reports, cfg.reports_path);
            consumer.commit();
            counts.analytics_frames = engine.frames_seen();
            counts.analytics_deduped = assembler.counters().deduped_messages;
        } catch (...) {
            capture_error();
        }
    });

    // --- simulator publishing into the broker ---
    int sim_rc = 0;
    try {
        wire::MqttClient client({.client_id = "cyclewatch-sim", .keepalive_s = 60, .qos1_window = 256});
        client.connect(cfg.broker_host, broker.port());

        std::ofstream labels_out(cfg.labels_path, std::ios::binary | std::ios::trunc);
        if (!labels_out) raise(Errc::storage, "cannot write labels file: " + cfg.labels_path);

        auto t0 = std::chrono::steady_clock::now();
        int64_t last_paced_second = -1;
        SimCounters sim_counters = run_simulation(
            sim_config(cfg, catalog),
            [&](const std::string& topic, const std::string& payload) {
                if (cfg.realtime) {
                    auto msg = parse_payload(payload);
                    if (msg) {
                        int64_t s = (msg->ts_ms - cfg.epoch_ms) / 1000;
                        if (s != last_paced_second) {
                            last_paced_second = s;
                            std::this_thread::sleep_until(t0 + std::chrono::seconds(s));
                        }
                    }
                }
                client.publish(topic, payload, 1);
            },
            [&](const AnomalyLabel& label) { labels_out << label.to_ndjson() << '\n'; },
            [&] { return stop.load(); });
        client.flush();
        client.disconnect();
        counts.publishes = sim_counters.messages;
        counts.values = sim_counters.values;
        counts.full_cycles = sim_counters.full_cycles;
        counts.labels = sim_counters.labels;
    } catch (const Error& e) {
        std::fprintf(stderr, "cyclewatch: simulator failed: %s\n", e.what());
        sim_rc = e.exit_group();
        drain = true;
    }

    drain = true;
    store_thread.join();
    analytics_thread.join();
    broker.stop();
    counts.bridge_appends = broker.counters().bridge_appends.load();
    counts.reports = reports.size();
    log.close();

    if (consumer_error) {
        try {
            std::rethrow_exception(consumer_error);
        } catch (const Error& e) {
            std::fprintf(stderr, "cyclewatch: pipeline failed: %s\n", e.what());
            write_manifest(cfg, counts, true, started, wall_ms());
            return e.exit_group();
        } catch (const std::exception& e) {
            std::fprintf(stderr, "cyclewatch: pipeline failed: %s\n", e.what());
            write_manifest(cfg, counts, true, started, wall_ms());
            return 1;
        }
    }
    write_manifest(cfg, counts, stop.load(), started, wall_ms());
    return sim_rc;
}

int cmd_simulate(const RunConfig& cfg, const std::atomic<bool>& stop) {
    ParameterCatalog catalog = load_catalog(cfg);
    fs::create_directories(cfg.data_root);
    wire::MqttClient client({.client_id = "cyclewatch-sim", .keepalive_s = 60, .qos1_window = 256});
    client.connect(cfg.broker_host, static_cast<uint16_t>(cfg.broker_port));

    std::ofstream labels_out(cfg.labels_path, std::ios::binary | std::ios::trunc);
    if (!labels_out) raise(Errc::storage, "cannot write labels file: " + cfg.labels_path);

    auto t0 = std::chrono::steady_clock::now();
    int64_t last_paced_second = -1;
    SimCounters counters = run_simulation(
        sim_config(cfg, catalog),
        [&](const std::string& topic, const std::string& payload) {
            if (cfg.realtime) {
                auto msg = parse_payload(payload);
                if (msg) {
                    int64_t s = (msg->ts_ms - cfg.epoch_ms) / 1000;
                    if (s != last_paced_second) {
                        last_paced_second = s;
                        std::this_thread::sleep_until(t0 + std::chrono::seconds(s));
                    }
                }
            }
            client.publish(topic, payload, 1);
        },
        [&](const AnomalyLabel& label) { labels_out << label.to_ndjson() << '\n'; },
        [&] { return stop.load(); });
    client.flush();
    client.disconnect();

    std::printf("{\"messages\":%llu,\"values\":%llu,\"full_cycles\":%llu,\"labels\":%llu}\n",
                static_cast<unsigned long long>(counters.messages),
                static_cast<unsigned long long>(counters.values),
                static_cast<unsigned long long>(counters.full_cycles),
                static_cast<unsigned long long>(counters.labels));
    return 0;
}

int cmd_broker(const RunConfig& cfg, const std::atomic<bool>& stop) {
    fs::create_directories(cfg.data_root);
    EventLog log(cfg.log_root);
    std::atomic<uint64_t> last_raw_offset{0};
    wire::Broker broker({cfg.broker_host, static_cast<uint16_t>(cfg.broker_port), 1024});
    broker.set_bridge(
        "flatform/#",
        [&](const std::string&, const std::vector<uint8_t>& payload) {
            last_raw_offset = log.append(kRawTopic, payload);
        },
        [&] { log.wait_durable(kRawTopic, last_raw_offset); });
    broker.start();
    std::printf("cyclewatch broker listening on %s:%u\n", cfg.broker_host.c_str(), broker.port());
    std::fflush(stdout);
    while (!stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    broker.stop();
    log.close();
    return 0;
}

int cmd_analyze(const RunConfig& cfg, const std::string& out_path) {
    CycleStore store = CycleStore::open(cfg.store_path);
    AnalyticsEngine engine(cfg.analytics);
    std::vector<AnomalyReport> reports;
    store.scan({}, [&](CycleFrame&& f) {
        auto batch = engine.on_frame(f);
        for (auto& r : batch) reports.push_back(std::move(r));
    });
    write_sorted_reports(reports, out_path.empty() ? cfg.reports_path : out_path);
    return 0;
}

std::string cmd_stats(const RunConfig& cfg, int fleet_cells) {
    CycleStore store = CycleStore::open(cfg.store_path);
    return store.compression_stats(fleet_cells).to_json();
}

int cmd_export(const RunConfig& cfg, const std::string& format, const CycleStore::ScanSelection& sel,
               const std::string& out_path) {
    CycleStore store = CycleStore::open(cfg.store_path);
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) raise(Errc::storage, "cannot write export file: " + out_path);
    if (format == "ndjson") {
        ParameterCatalog catalog = load_catalog(cfg);
        export_ndjson(store, catalog, sel, out);
    } else if (format == "csv") {
        export_csv(store, sel, out);
    } else {
        raise(Errc::config, "unknown export format: " + format);
    }
    return 0;
}

} // namespace cw
