#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include "wire/router.hpp"

namespace cw::wire {

// Minimal MQTT 3.1.1-subset broker: one reader and one writer thread per
// connection, a shared subscription registry behind a readers-writer lock,
// and bounded per-session outbound queues (qos0 overflow drops the oldest
// message and counts it; qos1 overflow blocks the router).
//
// The ingestion bridge is an in-process subscriber: every PUBLISH matching
// its filter is handed to `append` synchronously, and inbound qos1 packets
// are acknowledged only after `barrier` confirms the batch is durable -
// this ties MQTT qos1 to event-log durability.
class Broker {
public:
    struct Options {
        std::string bind = "127.0.0.1";
        uint16_t port = 1883; // 0 = ephemeral
        size_t queue_capacity = 1024;
    };

    struct Counters {
        std::atomic<uint64_t> connections{0};
        std::atomic<uint64_t> publishes{0};
        std::atomic<uint64_t> bridge_appends{0};
        std::atomic<uint64_t> fanout{0};
        std::atomic<uint64_t> qos0_dropped{0};
        std::atomic<uint64_t> protocol_errors{0};
    };

    explicit Broker(Options opt);
    ~Broker();

    // Both callbacks run on connection reader threads.
    void set_bridge(std::string filter, std::function<void(const std::string& topic, const std::vector<uint8_t>&)> append,
                    std::function<void()> barrier);

    void start();
    void stop();
    uint16_t port() const { return port_; }
    const Counters& counters() const { return counters_; }

    // Test hook: return true to hard-drop the connection at the named fault
    // point ("before_bridge", "after_bridge").
    std::function<bool(const char*)> test_fault_hook;

private:
    struct Conn;

    void accept_loop();
    void reader_loop(std::shared_ptr<Conn> conn);
    void writer_loop(std::shared_ptr<Conn> conn);
    void handle_buffer(Conn& conn, std::vector<uint8_t>& buf);
    void drop_session(Conn& conn);
    void deliver(SessionId target, const Publish& pub);

    Options opt_;
    uint16_t port_ = 0;
    int listen_fd_ = -1;
    std::atomic<bool> running_{false};
    std::thread accept_thread_;

    std::shared_mutex registry_mu_;
    Registry registry_;
    std::vector<std::shared_ptr<Conn>> conns_;
    std::mutex conns_mu_;
    SessionId next_session_ = 1;

    std::string bridge_filter_;
    std::function<void(const std::string&, const std::vector<uint8_t>&)> bridge_append_;
    std::function<void()> bridge_barrier_;

    Counters counters_;
};

} // namespace cw::wire
