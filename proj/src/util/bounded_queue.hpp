#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>

namespace cw {

// MPSC queue with a hard capacity. Two overflow policies, chosen per push:
// blocking (qos1 backpressure) or drop-oldest (qos0, counted).
template <typename T>
class BoundedQueue {
public:
    explicit BoundedQueue(size_t capacity) : cap_(capacity) {}

    // Blocks while full. Returns false if the queue was closed.
    bool push_wait(T v) {
        std::unique_lock lk(mu_);
        not_full_.wait(lk, [&] { return q_.size() < cap_ || closed_; });
        if (closed_) return false;
        q_.push_back(std::move(v));
        not_empty_.notify_one();
        return true;
    }

    // Never blocks; evicts the oldest entry when full. Returns true when an
    // eviction happened.
    bool push_drop_oldest(T v) {
        std::unique_lock lk(mu_);
        if (closed_) return false;
        bool evicted = false;
        if (q_.size() >= cap_) {
            q_.pop_front();
            ++dropped_;
            evicted = true;
        }
        q_.push_back(std::move(v));
        not_empty_.notify_one();
        return evicted;
    }

    // Blocks until an item arrives or the queue is closed and drained.
    std::optional<T> pop() {
        std::unique_lock lk(mu_);
        not_empty_.wait(lk, [&] { return !q_.empty() || closed_; });
        if (q_.empty()) return std::nullopt;
        T v = std::move(q_.front());
        q_.pop_front();
        not_full_.notify_one();
        return v;
    }

    void close() {
        std::lock_guard lk(mu_);
        closed_ = true;
        not_empty_.notify_all();
        not_full_.notify_all();
    }

    uint64_t dropped() const {
        std::lock_guard lk(mu_);
        return dropped_;
    }

private:
    mutable std::mutex mu_;
    std::condition_variable not_empty_, not_full_;
    std::deque<T> q_;
    size_t cap_;
    uint64_t dropped_ = 0;
    bool closed_ = false;
};

} // namespace cw
