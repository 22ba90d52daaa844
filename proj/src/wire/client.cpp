#include "wire/client.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cstring>

#include "util/error.hpp"
#include "wire/codec.hpp"
#include "wire/packet.hpp"

namespace cw::wire {

MqttClient::MqttClient(Options opt) : opt_(std::move(opt)) {}

MqttClient::~MqttClient() {
    closing_ = true;
    running_ = false;
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
    cv_.notify_all();
    if (reader_.joinable()) reader_.join();
    if (fd_ >= 0) ::close(fd_);
}

void MqttClient::open_socket() {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    std::string port_str = std::to_string(port_);
    if (::getaddrinfo(host_.c_str(), port_str.c_str(), &hints, &res) != 0 || !res)
        raise(Errc::network, "cannot resolve broker host " + host_);
    int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    if (fd < 0) {
        ::freeaddrinfo(res);
        raise(Errc::network, "socket() failed");
    }
    if (::connect(fd, res->ai_addr, res->ai_addrlen) != 0) {
        int e = errno;
        ::close(fd);
        ::freeaddrinfo(res);
        raise(Errc::network, "cannot connect to " + host_ + ":" + port_str + ": " + std::strerror(e));
    }
    ::freeaddrinfo(res);
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    fd_ = fd;
}

bool MqttClient::send_bytes(const std::vector<uint8_t>& bytes) {
    std::lock_guard lk(write_mu_);
    const uint8_t* p = bytes.data();
    size_t n = bytes.size();
    while (n > 0) {
        ssize_t w = ::send(fd_, p, n, MSG_NOSIGNAL);
        if (w < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        p += w;
        n -= static_cast<size_t>(w);
    }
    return true;
}

void MqttClient::handshake() {
    {
        std::lock_guard lk(mu_);
        connack_ = false;
    }
    Connect c;
    c.client_id = opt_.client_id;
    c.keepalive_s = opt_.keepalive_s;
    if (!send_bytes(encode_packet(Packet{c}))) raise(Errc::network, "CONNECT write failed");
    std::unique_lock lk(mu_);
    if (!cv_.wait_for(lk, std::chrono::seconds(10), [&] { return connack_ || closing_; }))
        raise(Errc::network, "CONNACK timeout");
    if (connack_rc_ != 0) raise(Errc::network, "broker refused connection (rc=" + std::to_string(connack_rc_) + ")");
}

void MqttClient::connect(const std::string& host, uint16_t port) {
    host_ = host;
    port_ = port;
    open_socket();
    running_ = true;
    reader_ = std::thread([this] { reader_loop(); });
    handshake();
}

void MqttClient::subscribe(const std::vector<std::pair<std::string, uint8_t>>& filters) {
    Subscribe s;
    {
        std::lock_guard lk(mu_);
        do {
            ++next_packet_id_;
        } while (next_packet_id_ == 0);
        s.packet_id = next_packet_id_;
        suback_ = false;
        for (const auto& f : filters) subscriptions_.push_back(f);
    }
    s.filters = filters;
    if (!send_bytes(encode_packet(Packet{s}))) raise(Errc::network, "SUBSCRIBE write failed");
    std::unique_lock lk(mu_);
    if (!cv_.wait_for(lk, std::chrono::seconds(10), [&] { return suback_ || closing_; }))
        raise(Errc::network, "SUBACK timeout");
}

void MqttClient::publish(const std::string& topic, std::string_view payload, uint8_t qos) {
    Publish p;
    p.topic = topic;
    p.payload.assign(payload.begin(), payload.end());
    p.qos = qos;
    if (qos == 1) {
        std::unique_lock lk(mu_);
        cv_.wait(lk, [&] { return window_.size() < opt_.qos1_window || closing_; });
        if (closing_) raise(Errc::state, "client closing");
        do {
            ++next_packet_id_;
        } while (next_packet_id_ == 0);
        p.packet_id = next_packet_id_;
        window_.push_back({p.packet_id, topic, p.payload});
        ++counters_.published;
    } else {
        std::lock_guard lk(mu_);
        ++counters_.published;
    }
    if (!send_bytes(encode_packet(Packet{p}))) {
        // reader notices the broken socket and reconnects; qos1 payloads sit
        // in the window and will be retransmitted
        if (qos == 0) raise(Errc::network, "publish write failed");
    }
}

void MqttClient::flush() {
    std::unique_lock lk(mu_);
    cv_.wait(lk, [&] { return window_.empty() || closing_; });
}

void MqttClient::disconnect() {
    flush();
    closing_ = true;
    send_bytes(encode_packet(Packet{Disconnect{}}));
    running_ = false;
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
    cv_.notify_all();
    if (reader_.joinable()) reader_.join();
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

MqttClient::Counters MqttClient::counters() const {
    std::lock_guard lk(mu_);
    return counters_;
}

void MqttClient::handle_disconnect() {
    if (closing_ || !running_) return;
    // Reconnect and retransmit the window in order.
    for (int attempt = 0; attempt < opt_.reconnect_attempts && !closing_; ++attempt) {
        std::this_thread::sleep_for(std::chrono::milliseconds(opt_.reconnect_delay_ms));
        try {
            {
                std::lock_guard lk(write_mu_);
                if (fd_ >= 0) ::close(fd_);
                fd_ = -1;
            }
            open_socket();
            {
                std::lock_guard lk(mu_);
                connack_ = false;
                ++counters_.reconnects;
            }
            Connect c;
            c.client_id = opt_.client_id;
            c.keepalive_s = opt_.keepalive_s;
            if (!send_bytes(encode_packet(Packet{c}))) continue;
            // CONNACK is consumed by the caller loop; wait inline here.
            // (We are the reader thread, so poll the socket directly.)
            std::vector<uint8_t> buf;
            uint8_t chunk[256];
            bool ok = false;
            auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(5);
            while (std::chrono::steady_clock::now() < deadline) {
                pollfd pfd{fd_, POLLIN, 0};
                if (::poll(&pfd, 1, 200) <= 0) continue;
                ssize_t n = ::recv(fd_, chunk, sizeof(chunk), 0);
                if (n <= 0) break;
                buf.insert(buf.end(), chunk, chunk + n);
                auto res = decode_packet(buf);
                if (res.status == DecodeStatus::need_more) continue;
                if (res.status == DecodeStatus::ok && std::holds_alternative<ConnAck>(res.packet) &&
                    std::get<ConnAck>(res.packet).return_code == 0) {
                    ok = true;
                }
                break;
            }
            if (!ok) continue;

            std::vector<std::pair<std::string, uint8_t>> subs;
            std::deque<Unacked> window;
            {
                std::lock_guard lk(mu_);
                subs = subscriptions_;
                window = window_;
            }
            if (!subs.empty()) {
                Subscribe s;
                s.packet_id = 1;
                s.filters = subs;
                if (!send_bytes(encode_packet(Packet{s}))) continue;
                // SubAck will be handled by the normal loop once we return.
            }
            bool resent_all = true;
            for (const auto& u : window) {
                Publish p;
                p.topic = u.topic;
                p.payload = u.payload;
                p.qos = 1;
                p.packet_id = u.packet_id;
                p.dup = true;
                if (!send_bytes(encode_packet(Packet{p}))) {
                    resent_all = false;
                    break;
                }
                std::lock_guard lk(mu_);
                ++counters_.retransmits;
            }
            if (resent_all) return; // back to the main reader loop
        } catch (const Error&) {
            // next attempt
        }
    }
    // Out of attempts: unblock everyone.
    closing_ = true;
    cv_.notify_all();
}

void MqttClient::reader_loop() {
    std::vector<uint8_t> buf;
    std::vector<uint8_t> chunk(64 * 1024);
    auto last_tx = std::chrono::steady_clock::now();
    while (running_) {
        pollfd pfd{fd_, POLLIN, 0};
        int rc = ::poll(&pfd, 1, 500);
        if (!running_) break;
        if (rc < 0) {
            if (errno == EINTR) continue;
            handle_disconnect();
            buf.clear();
            continue;
        }
        if (rc == 0) {
            auto now = std::chrono::steady_clock::now();
            if (opt_.keepalive_s > 0 &&
                now - last_tx > std::chrono::seconds(std::max<int>(1, opt_.keepalive_s / 2))) {
                send_bytes(encode_packet(Packet{PingReq{}}));
                last_tx = now;
            }
            continue;
        }
        ssize_t n = ::recv(fd_, chunk.data(), chunk.size(), 0);
        if (n <= 0) {
            if (n < 0 && errno == EINTR) continue;
            if (closing_ || !running_) break;
            handle_disconnect();
            buf.clear();
            continue;
        }
        buf.insert(buf.end(), chunk.begin(), chunk.begin() + n);
        size_t pos = 0;
        while (pos < buf.size()) {
            auto res = decode_packet({buf.data() + pos, buf.size() - pos});
            if (res.status == DecodeStatus::need_more) break;
            if (res.status == DecodeStatus::malformed) {
                handle_disconnect();
                buf.clear();
                pos = 0;
                break;
            }
            pos += res.consumed;
            if (const auto* ca = std::get_if<ConnAck>(&res.packet)) {
                std::lock_guard lk(mu_);
                connack_ = true;
                connack_rc_ = ca->return_code;
                cv_.notify_all();
            } else if (std::holds_alternative<SubAck>(res.packet)) {
                std::lock_guard lk(mu_);
                suback_ = true;
                cv_.notify_all();
            } else if (const auto* ack = std::get_if<PubAck>(&res.packet)) {
                std::lock_guard lk(mu_);
                for (auto it = window_.begin(); it != window_.end(); ++it) {
                    if (it->packet_id == ack->packet_id) {
                        window_.erase(it);
                        ++counters_.acked;
                        break;
                    }
                }
                cv_.notify_all();
            } else if (const auto* pub = std::get_if<Publish>(&res.packet)) {
                {
                    std::lock_guard lk(mu_);
                    ++counters_.received;
                }
                if (pub->qos == 1) send_bytes(encode_packet(Packet{PubAck{pub->packet_id}}));
                if (handler_) handler_(pub->topic, pub->payload);
            }
            // PingResp and anything else: nothing to do.
        }
        if (pos > 0) buf.erase(buf.begin(), buf.begin() + static_cast<long>(pos));
    }
}

} // namespace cw::wire
