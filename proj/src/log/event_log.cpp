#include "log/event_log.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <sys/stat.h>
#include <unistd.h>
#include <zlib.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <filesystem>

#include "util/bytes.hpp"
#include "util/error.hpp"

namespace fs = std::filesystem;

namespace cw {

namespace {

constexpr size_t kHeaderBytes = 8; // len u32 + crc32 u32

int64_t steady_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

uint32_t payload_crc(std::span<const uint8_t> payload) {
    return static_cast<uint32_t>(::crc32(0L, payload.data(), static_cast<uInt>(payload.size())));
}

void write_all(int fd, const uint8_t* data, size_t n, const std::string& what) {
    while (n > 0) {
        ssize_t w = ::write(fd, data, n);
        if (w < 0) {
            if (errno == EINTR) continue;
            raise(Errc::storage, what + ": write failed: " + std::strerror(errno));
        }
        data += w;
        n -= static_cast<size_t>(w);
    }
}

uint64_t read_offset_file(const std::string& path) {
    uint8_t buf[8];
    int fd = ::open(path.c_str(), O_RDONLY);
    if (fd < 0) return 0;
    bool ok = ::read(fd, buf, 8) == 8;
    ::close(fd);
    if (!ok) return 0;
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(buf[i]) << (8 * i);
    return v;
}

std::string segment_name(uint64_t base) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%020llu.seg", static_cast<unsigned long long>(base));
    return buf;
}

void fsync_dir(const std::string& dir) {
    int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY);
    if (fd >= 0) {
        ::fsync(fd);
        ::close(fd);
    }
}

void atomic_write_file(const std::string& path, const void* data, size_t n) {
    std::string tmp = path + ".tmp";
    int fd = ::open(tmp.c_str(), O_CREAT | O_TRUNC | O_WRONLY, 0644);
    if (fd < 0) raise(Errc::storage, "cannot create " + tmp + ": " + std::strerror(errno));
    write_all(fd, static_cast<const uint8_t*>(data), n, tmp);
    ::fsync(fd);
    ::close(fd);
    if (::rename(tmp.c_str(), path.c_str()) != 0)
        raise(Errc::storage, "rename failed for " + path + ": " + std::strerror(errno));
    fsync_dir(fs::path(path).parent_path().string());
}

// Scans one segment file. Returns the number of whole valid records and the
// byte position just past them; sets bad=true if trailing bytes exist that
// do not form a valid record (partial or CRC-failing tail).
struct ScanResult {
    uint64_t records = 0;
    uint64_t good_end = 0;
    bool bad_tail = false;
};

ScanResult scan_segment(const std::string& path, uint64_t max_payload) {
    ScanResult res;
    std::vector<uint8_t> data;
    {
        int fd = ::open(path.c_str(), O_RDONLY);
        if (fd < 0) raise(Errc::storage, "cannot open segment " + path);
        struct stat st{};
        ::fstat(fd, &st);
        data.resize(static_cast<size_t>(st.st_size));
        size_t off = 0;
        while (off < data.size()) {
            ssize_t r = ::pread(fd, data.data() + off, data.size() - off, static_cast<off_t>(off));
            if (r <= 0) {
                ::close(fd);
                raise(Errc::storage, "cannot read segment " + path);
            }
            off += static_cast<size_t>(r);
        }
        ::close(fd);
    }
    size_t pos = 0;
    while (pos + kHeaderBytes <= data.size()) {
        uint32_t len = static_cast<uint32_t>(data[pos]) | (static_cast<uint32_t>(data[pos + 1]) << 8) |
                       (static_cast<uint32_t>(data[pos + 2]) << 16) |
                       (static_cast<uint32_t>(data[pos + 3]) << 24);
        if (len > max_payload || pos + kHeaderBytes + len > data.size()) break;
        uint32_t crc = static_cast<uint32_t>(data[pos + 4]) | (static_cast<uint32_t>(data[pos + 5]) << 8) |
                       (static_cast<uint32_t>(data[pos + 6]) << 16) |
                       (static_cast<uint32_t>(data[pos + 7]) << 24);
        if (payload_crc({data.data() + pos + kHeaderBytes, len}) != crc) break;
        pos += kHeaderBytes + len;
        ++res.records;
    }
    res.good_end = pos;
    res.bad_tail = pos != data.size();
    return res;
}

} // namespace

EventLog::EventLog(std::string root, Options opt) : root_(std::move(root)), opt_(opt) {
    std::error_code ec;
    fs::create_directories(root_, ec);
    if (ec) raise(Errc::storage, "cannot create log root " + root_ + ": " + ec.message());
    sync_thread_ = std::thread([this] { sync_loop(); });
}

EventLog::~EventLog() { close(); }

void EventLog::close() {
    {
        std::lock_guard lk(sync_mu_);
        if (shutdown_) return;
        shutdown_ = true;
        sync_cv_.notify_all();
    }
    if (sync_thread_.joinable()) sync_thread_.join();
    std::lock_guard lk(topics_mu_);
    for (auto& [name, t] : topics_) {
        if (t->fd >= 0) {
            ::fsync(t->fd);
            ::close(t->fd);
            t->fd = -1;
        }
        if (t->lock_fd >= 0) {
            ::close(t->lock_fd);
            t->lock_fd = -1;
        }
    }
}

EventLog::Topic& EventLog::open_topic(const std::string& name) {
    if (name.empty() || name.front() == '_' || name.find('/') != std::string::npos)
        raise(Errc::invalid_argument, "bad topic name: " + name);
    std::lock_guard lk(topics_mu_);
    auto it = topics_.find(name);
    if (it != topics_.end()) return *it->second;

    auto t = std::make_unique<Topic>();
    t->name = name;
    t->dir = root_ + "/" + name;
    std::error_code ec;
    fs::create_directories(t->dir, ec);
    if (ec) raise(Errc::storage, "cannot create topic dir: " + ec.message());

    std::string lock_path = t->dir + "/lock";
    t->lock_fd = ::open(lock_path.c_str(), O_CREAT | O_RDWR, 0644);
    if (t->lock_fd < 0) raise(Errc::storage, "cannot open " + lock_path);
    if (::flock(t->lock_fd, LOCK_EX | LOCK_NB) != 0)
        raise(Errc::state, "topic already has an active writer: " + name);

    recover_topic(*t);
    auto& ref = *t;
    topics_[name] = std::move(t);
    return ref;
}

void EventLog::recover_topic(Topic& t) {
    std::vector<Segment> segs;
    for (const auto& entry : fs::directory_iterator(t.dir)) {
        auto fname = entry.path().filename().string();
        if (fname.size() != 24 || fname.substr(20) != ".seg") continue;
        Segment s;
        s.base = std::strtoull(fname.c_str(), nullptr, 10);
        s.path = entry.path().string();
        s.bytes = entry.file_size();
        segs.push_back(std::move(s));
    }
    std::sort(segs.begin(), segs.end(), [](const Segment& a, const Segment& b) { return a.base < b.base; });

    if (segs.empty()) {
        t.active.base = 0;
        t.active.bytes = 0;
        t.active.path = t.dir + "/" + segment_name(0);
        t.fd = ::open(t.active.path.c_str(), O_CREAT | O_WRONLY | O_APPEND, 0644);
        if (t.fd < 0) raise(Errc::storage, "cannot create segment " + t.active.path);
        t.next_offset = t.synced_offset = 0;
        return;
    }

    // Sealed segments must be fully intact; a failure here needs operator
    // action, so refuse to start.
    for (size_t i = 0; i + 1 < segs.size(); ++i) {
        ScanResult sr = scan_segment(segs[i].path, opt_.max_payload);
        if (sr.bad_tail)
            raise(Errc::corruption, "sealed segment damaged: " + segs[i].path);
        if (segs[i].base + sr.records != segs[i + 1].base)
            raise(Errc::corruption, "segment offsets not contiguous at " + segs[i + 1].path);
    }

    // The last segment may have a torn tail from a crash: truncate it away.
    Segment& last = segs.back();
    ScanResult sr = scan_segment(last.path, opt_.max_payload);
    if (sr.bad_tail) {
        int fd = ::open(last.path.c_str(), O_WRONLY);
        if (fd < 0 || ::ftruncate(fd, static_cast<off_t>(sr.good_end)) != 0)
            raise(Errc::storage, "cannot truncate torn tail of " + last.path);
        ::fsync(fd);
        ::close(fd);
        last.bytes = sr.good_end;
    }

    t.sealed.assign(segs.begin(), segs.end() - 1);
    t.active = last;
    t.next_offset = t.synced_offset = last.base + sr.records;
    t.fd = ::open(t.active.path.c_str(), O_WRONLY | O_APPEND, 0644);
    if (t.fd < 0) raise(Errc::storage, "cannot open segment " + t.active.path);
}

void EventLog::roll_segment(Topic& t) {
    // Everything in the sealed segment is durable once this fsync returns;
    // the old fd is handed to the sync thread for closing so an in-flight
    // group commit never touches a dead descriptor.
    ::fsync(t.fd);
    {
        std::lock_guard lk(sync_mu_);
        t.synced_offset = std::max(t.synced_offset, t.next_offset);
        t.pending = 0;
        retired_fds_.push_back(t.fd);
        durable_cv_.notify_all();
    }
    t.sealed.push_back(t.active);
    t.active.base = t.next_offset;
    t.active.bytes = 0;
    t.active.path = t.dir + "/" + segment_name(t.next_offset);
    t.fd = ::open(t.active.path.c_str(), O_CREAT | O_WRONLY | O_APPEND, 0644);
    if (t.fd < 0) raise(Errc::storage, "cannot create segment " + t.active.path);
    fsync_dir(t.dir);
}

uint64_t EventLog::append(const std::string& topic, std::span<const uint8_t> payload) {
    if (payload.size() > opt_.max_payload)
        raise(Errc::oversize, "payload exceeds max record size (" + std::to_string(payload.size()) + " bytes)");
    Topic& t = open_topic(topic);
    std::lock_guard wl(t.write_mu);

    std::vector<uint8_t> rec;
    rec.reserve(kHeaderBytes + payload.size());
    put_u32(rec, static_cast<uint32_t>(payload.size()));
    put_u32(rec, payload_crc(payload));
    rec.insert(rec.end(), payload.begin(), payload.end());
    write_all(t.fd, rec.data(), rec.size(), t.active.path);
    t.active.bytes += rec.size();

    uint64_t offset;
    {
        std::lock_guard lk(sync_mu_);
        offset = t.next_offset++;
        if (t.pending == 0) t.first_dirty_ms = steady_ms();
        ++t.pending;
        if (t.pending >= static_cast<uint64_t>(opt_.sync_batch)) sync_cv_.notify_one();
    }
    sync_cv_.notify_one();

    if (t.active.bytes >= opt_.segment_bytes) roll_segment(t);
    return offset;
}

void EventLog::wait_durable(const std::string& topic, uint64_t offset) {
    Topic& t = open_topic(topic);
    std::unique_lock lk(sync_mu_);
    durable_cv_.wait(lk, [&] { return t.synced_offset > offset || shutdown_; });
}

uint64_t EventLog::append_durable(const std::string& topic, std::span<const uint8_t> payload) {
    uint64_t off = append(topic, payload);
    wait_durable(topic, off);
    return off;
}

void EventLog::sync_loop() {
    std::unique_lock lk(sync_mu_);
    while (!shutdown_) {
        sync_cv_.wait_for(lk, std::chrono::milliseconds(opt_.sync_interval_ms));
        struct Work {
            Topic* t;
            int fd;
            uint64_t through;
        };
        std::vector<Work> work;
        int64_t now = steady_ms();
        {
            // Collect topics due for a sync: batch full or deadline passed.
            std::lock_guard tl(topics_mu_);
            for (auto& [name, t] : topics_) {
                if (t->pending == 0) continue;
                bool due = t->pending >= static_cast<uint64_t>(opt_.sync_batch) ||
                           now - t->first_dirty_ms >= opt_.sync_interval_ms || shutdown_;
                if (due) work.push_back({t.get(), t->fd, t->next_offset});
            }
        }
        std::vector<int> to_close;
        to_close.swap(retired_fds_);
        if (work.empty() && to_close.empty()) continue;
        lk.unlock();
        for (auto& w : work) ::fsync(w.fd); // sealed-before-roll data was fsynced at roll time
        for (int fd : to_close) ::close(fd);
        lk.lock();
        for (auto& w : work) {
            w.t->synced_offset = std::max(w.t->synced_offset, w.through);
            w.t->pending = w.t->next_offset - w.t->synced_offset;
            if (w.t->pending > 0) w.t->first_dirty_ms = steady_ms();
        }
        durable_cv_.notify_all();
    }
    for (int fd : retired_fds_) ::close(fd);
    retired_fds_.clear();
    // Final sync on shutdown.
    std::vector<std::pair<Topic*, uint64_t>> final_work;
    {
        std::lock_guard tl(topics_mu_);
        for (auto& [name, t] : topics_)
            if (t->fd >= 0) final_work.emplace_back(t.get(), t->next_offset);
    }
    lk.unlock();
    for (auto& [t, through] : final_work) ::fsync(t->fd);
    lk.lock();
    for (auto& [t, through] : final_work) {
        t->synced_offset = std::max(t->synced_offset, through);
        t->pending = 0;
    }
    durable_cv_.notify_all();
}

std::vector<LogRecord> EventLog::read(const std::string& topic, uint64_t from_offset, size_t max_records) {
    Topic& t = open_topic(topic);
    uint64_t end, begin;
    {
        std::lock_guard lk(sync_mu_);
        end = t.next_offset;
    }
    begin = t.sealed.empty() ? t.active.base : t.sealed.front().base;
    if (from_offset > end) raise(Errc::not_found, "offset past the log tail");
    if (from_offset < begin) raise(Errc::state, "offset before earliest retained record");
    if (from_offset == end || max_records == 0) return {};

    std::lock_guard wl(t.write_mu); // protects the read cursor; writers are rare contenders

    // Find the segment holding from_offset.
    const Segment* seg = &t.active;
    for (const auto& s : t.sealed)
        if (s.base <= from_offset) seg = &s;
    if (t.active.base <= from_offset) seg = &t.active;

    uint64_t pos = 0;
    uint64_t offset = seg->base;
    if (t.cur_valid && t.cur_offset == from_offset && t.cur_base == seg->base) {
        pos = t.cur_pos;
        offset = from_offset;
    }

    std::vector<LogRecord> out;
    while (out.size() < max_records && offset < end) {
        int fd = ::open(seg->path.c_str(), O_RDONLY);
        if (fd < 0) raise(Errc::storage, "cannot open segment " + seg->path);
        struct stat st{};
        ::fstat(fd, &st);
        auto file_size = static_cast<uint64_t>(st.st_size);
        while (out.size() < max_records && offset < end && pos + kHeaderBytes <= file_size) {
            uint8_t hdr[kHeaderBytes];
            if (::pread(fd, hdr, kHeaderBytes, static_cast<off_t>(pos)) != static_cast<ssize_t>(kHeaderBytes))
                break;
            uint32_t len = static_cast<uint32_t>(hdr[0]) | (static_cast<uint32_t>(hdr[1]) << 8) |
                           (static_cast<uint32_t>(hdr[2]) << 16) | (static_cast<uint32_t>(hdr[3]) << 24);
            uint32_t crc = static_cast<uint32_t>(hdr[4]) | (static_cast<uint32_t>(hdr[5]) << 8) |
                           (static_cast<uint32_t>(hdr[6]) << 16) | (static_cast<uint32_t>(hdr[7]) << 24);
            if (len > opt_.max_payload || pos + kHeaderBytes + len > file_size) break;
            if (offset >= from_offset) {
                LogRecord rec;
                rec.offset = offset;
                rec.crc32 = crc;
                rec.payload.resize(len);
                if (len > 0 &&
                    ::pread(fd, rec.payload.data(), len, static_cast<off_t>(pos + kHeaderBytes)) !=
                        static_cast<ssize_t>(len)) {
                    ::close(fd);
                    raise(Errc::storage, "short read in " + seg->path);
                }
                if (payload_crc(rec.payload) != crc) {
                    ::close(fd);
                    raise(Errc::corruption, "CRC mismatch at offset " + std::to_string(offset) + " in " +
                                                seg->path);
                }
                out.push_back(std::move(rec));
            }
            pos += kHeaderBytes + len;
            ++offset;
        }
        ::close(fd);
        if (out.size() >= max_records || offset >= end) break;
        // Advance to the next segment.
        const Segment* next = nullptr;
        for (const auto& s : t.sealed)
            if (s.base == offset) next = &s;
        if (!next && t.active.base == offset) next = &t.active;
        if (!next) break;
        seg = next;
        pos = 0;
    }

    t.cur_valid = true;
    t.cur_offset = offset;
    t.cur_base = seg->base;
    t.cur_pos = pos;
    return out;
}

uint64_t EventLog::end_offset(const std::string& topic) {
    Topic& t = open_topic(topic);
    std::lock_guard lk(sync_mu_);
    return t.next_offset;
}

uint64_t EventLog::begin_offset(const std::string& topic) {
    Topic& t = open_topic(topic);
    std::lock_guard wl(t.write_mu);
    return t.sealed.empty() ? t.active.base : t.sealed.front().base;
}

void EventLog::apply_retention(const std::string& topic, uint64_t byte_budget) {
    Topic& t = open_topic(topic);
    std::lock_guard wl(t.write_mu);
    uint64_t total = t.active.bytes;
    for (const auto& s : t.sealed) total += s.bytes;
    while (total > byte_budget && !t.sealed.empty()) {
        total -= t.sealed.front().bytes;
        std::error_code ec;
        fs::remove(t.sealed.front().path, ec);
        t.sealed.erase(t.sealed.begin());
        t.cur_valid = false;
    }
}

void EventLog::commit_offset(const std::string& group, const std::string& topic, uint64_t offset) {
    if (group.empty() || group.find('/') != std::string::npos)
        raise(Errc::invalid_argument, "bad group name: " + group);
    std::lock_guard lk(offsets_mu_);
    std::string key = group + "/" + topic;
    std::string dir = root_ + "/_offsets/" + group;
    std::error_code ec;
    fs::create_directories(dir, ec);
    std::string path = dir + "/" + topic;

    uint64_t prev = 0;
    auto it = committed_.find(key);
    if (it != committed_.end()) prev = it->second;
    else prev = read_offset_file(path);
    if (offset < prev) {
        std::fprintf(stderr, "cyclewatch: ignoring offset regression for %s (%llu < %llu)\n", key.c_str(),
                     static_cast<unsigned long long>(offset), static_cast<unsigned long long>(prev));
        committed_[key] = prev;
        return;
    }
    uint8_t buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<uint8_t>(offset >> (8 * i));
    atomic_write_file(path, buf, 8);
    committed_[key] = offset;
}

uint64_t EventLog::fetch_committed(const std::string& group, const std::string& topic) {
    std::lock_guard lk(offsets_mu_);
    std::string key = group + "/" + topic;
    auto it = committed_.find(key);
    if (it != committed_.end()) return it->second;
    std::string path = root_ + "/_offsets/" + group + "/" + topic;
    uint64_t v = read_offset_file(path);
    committed_[key] = v;
    return v;
}

} // namespace cw
