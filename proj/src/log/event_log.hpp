#pragma once

#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace cw {

struct LogRecord {
    uint64_t offset = 0;
    uint32_t crc32 = 0;
    std::vector<uint8_t> payload;
};

// Per-topic segmented append-only log with CRC-framed records and persisted
// consumer-group offsets.
//
// Record framing (little-endian): [len u32][crc32 u32][payload]; crc32 is
// the IEEE polynomial over the payload only. Segments live under
// <root>/<topic>/<base_offset>.seg; only the last segment is unsealed.
// Consumer offsets live under <root>/_offsets/<group>/<topic>.
//
// Durability is group-committed: append() returns as soon as the record is
// written to the OS (immediately readable), and a sync thread fsyncs batches
// at most sync_interval_ms (or sync_batch records) apart. wait_durable()
// blocks until an offset is on disk; the MQTT bridge acks qos1 publishes
// only after that barrier.
//
// One writer per topic is enforced with an advisory file lock. Any number
// of concurrent readers may run against a live writer.
class EventLog {
public:
    struct Options {
        uint64_t segment_bytes = 64ull << 20;
        uint64_t max_payload = 1ull << 20;
        int sync_interval_ms = 10;
        int sync_batch = 512;
    };

    explicit EventLog(std::string root) : EventLog(std::move(root), Options()) {}
    EventLog(std::string root, Options opt);
    ~EventLog();

    EventLog(const EventLog&) = delete;
    EventLog& operator=(const EventLog&) = delete;

    // Appends and returns the record's offset. Throws: oversize (payload
    // above the 1 MiB cap), storage (I/O failure), corruption (recovery
    // found a damaged sealed segment on first touch of the topic).
    uint64_t append(const std::string& topic, std::span<const uint8_t> payload);

    // Blocks until everything at or before `offset` has been fsynced.
    void wait_durable(const std::string& topic, uint64_t offset);

    uint64_t append_durable(const std::string& topic, std::span<const uint8_t> payload);

    // Contiguous records starting at from_offset; empty at the tail (poll
    // semantics). Throws not_found past the tail, state for offsets before
    // the earliest retained record, corruption on a CRC mismatch.
    std::vector<LogRecord> read(const std::string& topic, uint64_t from_offset, size_t max_records);

    uint64_t end_offset(const std::string& topic);
    uint64_t begin_offset(const std::string& topic);

    // Deletes oldest sealed segments while the topic exceeds byte_budget.
    void apply_retention(const std::string& topic, uint64_t byte_budget);

    // Durable, monotone per (group, topic); regressions are ignored with a
    // warning on stderr.
    void commit_offset(const std::string& group, const std::string& topic, uint64_t offset);
    uint64_t fetch_committed(const std::string& group, const std::string& topic);

    void close();

    const std::string& root() const { return root_; }

private:
    struct Segment {
        uint64_t base = 0;
        uint64_t bytes = 0;
        std::string path;
    };

    struct Topic {
        std::string name;
        std::string dir;
        std::vector<Segment> sealed;
        Segment active;
        int fd = -1;
        int lock_fd = -1;
        uint64_t next_offset = 0;
        uint64_t synced_offset = 0;  // offsets < synced_offset are on disk
        uint64_t pending = 0;        // records appended since last fsync
        int64_t first_dirty_ms = 0;  // steady-clock stamp of oldest unsynced append
        std::mutex write_mu;
        // sequential-read cursor: (next offset, segment base, byte position)
        uint64_t cur_offset = 0;
        uint64_t cur_base = 0;
        uint64_t cur_pos = 0;
        bool cur_valid = false;
    };

    Topic& open_topic(const std::string& name);
    void recover_topic(Topic& t);
    void roll_segment(Topic& t);
    void sync_loop();

    std::string root_;
    Options opt_;
    std::mutex topics_mu_;
    std::map<std::string, std::unique_ptr<Topic>> topics_;

    std::mutex sync_mu_;
    std::condition_variable sync_cv_;     // wakes the sync thread
    std::condition_variable durable_cv_;  // wakes wait_durable callers
    std::vector<int> retired_fds_;        // closed by the sync thread
    bool shutdown_ = false;
    std::thread sync_thread_;

    std::mutex offsets_mu_;
    std::map<std::string, uint64_t> committed_; // "<group>/<topic>" -> offset
};

} // namespace cw
