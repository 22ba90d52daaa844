#include "wire/broker.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cstring>
#include <map>

#include "util/bounded_queue.hpp"
#include "util/error.hpp"
#include "wire/codec.hpp"
#include "wire/topic.hpp"

namespace cw::wire {

namespace {

int64_t now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

bool write_all_fd(int fd, const uint8_t* data, size_t n) {
    while (n > 0) {
        ssize_t w = ::send(fd, data, n, MSG_NOSIGNAL);
        if (w < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        data += w;
        n -= static_cast<size_t>(w);
    }
    return true;
}

} // namespace

struct Broker::Conn {
    explicit Conn(size_t queue_cap) : outbound(queue_cap) {}

    int fd = -1;
    SessionId id = 0;
    std::thread reader;
    std::thread writer;
    BoundedQueue<std::vector<uint8_t>> outbound;
    std::atomic<bool> closing{false};

    std::mutex inflight_mu;
    std::map<uint16_t, bool> inflight; // outbound qos1 packet ids awaiting PubAck
    uint16_t next_packet_id = 0;

    std::atomic<int64_t> last_rx_ms{0};
    std::atomic<uint16_t> keepalive_s{0};
    std::atomic<bool> connected{false};

    void shutdown_socket() {
        bool expected = false;
        if (closing.compare_exchange_strong(expected, true)) {
            ::shutdown(fd, SHUT_RDWR);
            outbound.close();
        }
    }
};

Broker::Broker(Options opt) : opt_(std::move(opt)) {}

Broker::~Broker() { stop(); }

void Broker::set_bridge(std::string filter,
                        std::function<void(const std::string&, const std::vector<uint8_t>&)> append,
                        std::function<void()> barrier) {
    if (!filter_valid(filter)) raise(Errc::invalid_argument, "invalid bridge filter: " + filter);
    bridge_filter_ = std::move(filter);
    bridge_append_ = std::move(append);
    bridge_barrier_ = std::move(barrier);
}

void Broker::start() {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) raise(Errc::network, "socket() failed");
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(opt_.port);
    if (::inet_pton(AF_INET, opt_.bind.c_str(), &addr.sin_addr) != 1)
        raise(Errc::config, "bad bind address: " + opt_.bind);
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        int e = errno;
        ::close(listen_fd_);
        listen_fd_ = -1;
        raise(Errc::network, "cannot bind port " + std::to_string(opt_.port) + ": " + std::strerror(e));
    }
    if (::listen(listen_fd_, 64) != 0) raise(Errc::network, "listen() failed");
    sockaddr_in bound{};
    socklen_t len = sizeof(bound);
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
    port_ = ntohs(bound.sin_port);
    running_ = true;
    accept_thread_ = std::thread([this] { accept_loop(); });
}

void Broker::stop() {
    if (!running_.exchange(false)) {
        return;
    }
    if (listen_fd_ >= 0) {
        ::shutdown(listen_fd_, SHUT_RDWR);
        ::close(listen_fd_);
        listen_fd_ = -1;
    }
    if (accept_thread_.joinable()) accept_thread_.join();
    std::vector<std::shared_ptr<Conn>> conns;
    {
        std::lock_guard lk(conns_mu_);
        conns = conns_;
    }
    for (auto& c : conns) c->shutdown_socket();
    for (auto& c : conns) {
        if (c->reader.joinable()) c->reader.join();
        if (c->writer.joinable()) c->writer.join();
        if (c->fd >= 0) {
            ::close(c->fd);
            c->fd = -1;
        }
    }
    std::lock_guard lk(conns_mu_);
    conns_.clear();
}

void Broker::accept_loop() {
    while (running_) {
        sockaddr_in peer{};
        socklen_t len = sizeof(peer);
        int fd = ::accept(listen_fd_, reinterpret_cast<sockaddr*>(&peer), &len);
        if (fd < 0) {
            if (running_ && (errno == EINTR || errno == ECONNABORTED)) continue;
            break;
        }
        int one = 1;
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
        auto conn = std::make_shared<Conn>(opt_.queue_capacity);
        conn->fd = fd;
        conn->last_rx_ms = now_ms();
        {
            std::lock_guard lk(conns_mu_);
            conn->id = next_session_++;
            conns_.push_back(conn);
        }
        {
            std::unique_lock lk(registry_mu_);
            registry_.sessions[conn->id] = SessionInfo{conn->id, "", false, 0, {}};
        }
        counters_.connections.fetch_add(1);
        conn->writer = std::thread([this, conn] { writer_loop(conn); });
        conn->reader = std::thread([this, conn] { reader_loop(conn); });
    }
}

void Broker::writer_loop(std::shared_ptr<Conn> conn) {
    while (true) {
        auto item = conn->outbound.pop();
        if (!item) break;
        if (!write_all_fd(conn->fd, item->data(), item->size())) break;
    }
    conn->shutdown_socket();
}

void Broker::drop_session(Conn& conn) {
    std::unique_lock lk(registry_mu_);
    registry_.sessions.erase(conn.id);
}

void Broker::deliver(SessionId target, const Publish& pub) {
    std::shared_ptr<Conn> t;
    {
        std::lock_guard lk(conns_mu_);
        for (auto& c : conns_)
            if (c->id == target && !c->closing) t = c;
    }
    if (!t) return;
    Publish out = pub;
    if (out.qos == 1) {
        std::lock_guard lk(t->inflight_mu);
        do {
            ++t->next_packet_id;
        } while (t->next_packet_id == 0 || t->inflight.count(t->next_packet_id));
        out.packet_id = t->next_packet_id;
        t->inflight[out.packet_id] = true;
    }
    auto bytes = encode_packet(out);
    counters_.fanout.fetch_add(1);
    if (out.qos == 0) {
        if (t->outbound.push_drop_oldest(std::move(bytes))) counters_.qos0_dropped.fetch_add(1);
    } else {
        t->outbound.push_wait(std::move(bytes)); // backpressure toward the router
    }
}

void Broker::handle_buffer(Conn& conn, std::vector<uint8_t>& buf) {
    size_t pos = 0;
    std::vector<uint16_t> pending_acks;
    bool pending_append = false;

    auto flush_acks = [&] {
        if (pending_append && bridge_barrier_) bridge_barrier_(); // group commit for the batch
        for (uint16_t id : pending_acks) conn.outbound.push_wait(encode_packet(PubAck{id}));
        pending_acks.clear();
        pending_append = false;
    };

    while (pos < buf.size()) {
        DecodeResult res = decode_packet({buf.data() + pos, buf.size() - pos});
        if (res.status == DecodeStatus::need_more) break;
        if (res.status == DecodeStatus::malformed) {
            counters_.protocol_errors.fetch_add(1);
            flush_acks();
            conn.shutdown_socket();
            buf.clear();
            return;
        }
        pos += res.consumed;
        conn.last_rx_ms = now_ms();

        HandleResult hr;
        if (const auto* pub = std::get_if<Publish>(&res.packet)) {
            counters_.publishes.fetch_add(1);
            {
                std::shared_lock lk(registry_mu_);
                hr = broker_handle(conn.id, res.packet, registry_);
            }
            if (!hr.close_connection) {
                // The bridge sees the message before anything is acknowledged.
                if (bridge_append_ && topic_matches(bridge_filter_, pub->topic)) {
                    if (test_fault_hook && test_fault_hook("before_bridge")) {
                        conn.shutdown_socket();
                        buf.clear();
                        return;
                    }
                    bridge_append_(pub->topic, pub->payload);
                    counters_.bridge_appends.fetch_add(1);
                    pending_append = true;
                    if (test_fault_hook && test_fault_hook("after_bridge")) {
                        conn.shutdown_socket();
                        buf.clear();
                        return;
                    }
                }
                for (auto& action : hr.actions) {
                    if (auto* ack = std::get_if<PubAck>(&action.packet); ack && action.target == conn.id)
                        pending_acks.push_back(ack->packet_id); // deferred past the durability barrier
                    else if (const auto* fan = std::get_if<Publish>(&action.packet))
                        deliver(action.target, *fan);
                }
            }
        } else {
            if (const auto* ack = std::get_if<PubAck>(&res.packet)) {
                std::lock_guard lk(conn.inflight_mu);
                conn.inflight.erase(ack->packet_id); // duplicate acks tolerated
            }
            {
                std::unique_lock lk(registry_mu_);
                hr = broker_handle(conn.id, res.packet, registry_);
            }
            if (!hr.close_connection) {
                if (const auto* c = std::get_if<Connect>(&res.packet)) {
                    conn.connected = true;
                    conn.keepalive_s = c->keepalive_s;
                }
                for (auto& action : hr.actions) {
                    if (action.target == conn.id)
                        conn.outbound.push_wait(encode_packet(action.packet));
                    else if (const auto* fan = std::get_if<Publish>(&action.packet))
                        deliver(action.target, *fan);
                }
            }
        }
        if (hr.close_connection) {
            if (!hr.error.empty()) counters_.protocol_errors.fetch_add(1);
            flush_acks(); // acks for work already made durable
            conn.shutdown_socket();
            buf.clear();
            return;
        }
    }

    flush_acks();
    buf.erase(buf.begin(), buf.begin() + static_cast<long>(pos));
}

void Broker::reader_loop(std::shared_ptr<Conn> conn) {
    std::vector<uint8_t> buf;
    std::vector<uint8_t> chunk(64 * 1024);
    while (!conn->closing) {
        pollfd pfd{conn->fd, POLLIN, 0};
        int rc = ::poll(&pfd, 1, 1000);
        if (conn->closing) break;
        if (rc < 0) {
            if (errno == EINTR) continue;
            break;
        }
        if (rc == 0) {
            // keepalive enforcement at 1.5x the negotiated interval
            if (conn->connected && conn->keepalive_s > 0 &&
                now_ms() - conn->last_rx_ms > static_cast<int64_t>(conn->keepalive_s.load()) * 1500)
                break;
            continue;
        }
        ssize_t n = ::recv(conn->fd, chunk.data(), chunk.size(), 0);
        if (n <= 0) {
            if (n < 0 && errno == EINTR) continue;
            break;
        }
        buf.insert(buf.end(), chunk.begin(), chunk.begin() + n);
        handle_buffer(*conn, buf);
    }
    conn->shutdown_socket();
    drop_session(*conn);
}

} // namespace cw::wire
