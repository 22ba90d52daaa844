#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace cw::wire {

// Blocking MQTT 3.1.1-subset client. qos1 publishes keep a bounded in-flight
// window (full window blocks the caller, never drops), and on a broken
// connection the client reconnects and retransmits every unacknowledged
// publish in order with the DUP flag - the at-least-once half of the
// pipeline's durability story.
class MqttClient {
public:
    struct Options {
        std::string client_id = "cyclewatch";
        uint16_t keepalive_s = 60;
        size_t qos1_window = 256;
        int reconnect_attempts = 5;      // per failure
        int reconnect_delay_ms = 50;
    };

    struct Counters {
        uint64_t published = 0;
        uint64_t acked = 0;
        uint64_t retransmits = 0;
        uint64_t received = 0;
        uint64_t reconnects = 0;
    };

    MqttClient() : MqttClient(Options()) {}
    explicit MqttClient(Options opt);
    ~MqttClient();

    using MessageHandler = std::function<void(const std::string& topic, const std::vector<uint8_t>& payload)>;
    void set_message_handler(MessageHandler h) { handler_ = std::move(h); }

    void connect(const std::string& host, uint16_t port);
    void subscribe(const std::vector<std::pair<std::string, uint8_t>>& filters);
    void publish(const std::string& topic, std::string_view payload, uint8_t qos);
    void flush();      // wait until every qos1 publish is acknowledged
    void disconnect(); // graceful DISCONNECT + close

    Counters counters() const;

private:
    struct Unacked {
        uint16_t packet_id;
        std::string topic;
        std::vector<uint8_t> payload;
    };

    void reader_loop();
    void open_socket();
    void handshake();
    bool send_bytes(const std::vector<uint8_t>& bytes);
    void handle_disconnect();

    Options opt_;
    MessageHandler handler_;
    std::string host_;
    uint16_t port_ = 0;
    int fd_ = -1;
    std::thread reader_;
    std::atomic<bool> running_{false};
    std::atomic<bool> closing_{false};

    mutable std::mutex mu_;
    std::condition_variable cv_;
    bool connack_ = false;
    uint8_t connack_rc_ = 0;
    bool suback_ = false;
    std::deque<Unacked> window_;
    std::vector<std::pair<std::string, uint8_t>> subscriptions_;
    uint16_t next_packet_id_ = 0;
    Counters counters_;
    std::mutex write_mu_;
};

} // namespace cw::wire
