#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "log/event_log.hpp"
#include "util/error.hpp"
#include "test_util.hpp"

using namespace cw;
namespace fs = std::filesystem;

namespace {

std::vector<uint8_t> payload_of(const std::string& s) { return {s.begin(), s.end()}; }

std::string str_of(const LogRecord& r) { return {r.payload.begin(), r.payload.end()}; }

} // namespace

TEST_CASE("append assigns offsets from zero and read returns them back") {
    test::TempDir dir("log-basic");
    EventLog log(dir.str());
    CHECK(log.append("t", payload_of("a")) == 0);
    CHECK(log.append("t", payload_of("b")) == 1);
    CHECK(log.append("t", payload_of("c")) == 2);

    auto recs = log.read("t", 0, 10);
    REQUIRE(recs.size() == 3);
    CHECK(str_of(recs[0]) == "a");
    CHECK(str_of(recs[2]) == "c");
    CHECK(recs[2].offset == 2);

    // poll at the tail
    CHECK(log.read("t", 3, 10).empty());
    CHECK_THROWS_AS((void)log.read("t", 4, 1), Error);
}

TEST_CASE("read-your-writes: an appended offset is immediately readable") {
    test::TempDir dir("log-ryw");
    EventLog log(dir.str());
    for (int i = 0; i < 100; ++i) {
        uint64_t off = log.append("t", payload_of("msg" + std::to_string(i)));
        auto recs = log.read("t", off, 1);
        REQUIRE(recs.size() == 1);
        CHECK(str_of(recs[0]) == "msg" + std::to_string(i));
    }
}

TEST_CASE("segment rollover creates a new file named by its base offset") {
    test::TempDir dir("log-roll");
    EventLog::Options opt;
    opt.segment_bytes = 4096;
    EventLog log(dir.str(), opt);
    std::string big(512, 'x');
    uint64_t n = 0;
    while (fs::exists(dir.path / "t") == false || [&] {
        size_t count = 0;
        for (auto& e : fs::directory_iterator(dir.path / "t"))
            if (e.path().extension() == ".seg") ++count;
        return count;
    }() < 3) {
        log.append("t", payload_of(big));
        if (++n > 100) break;
    }
    size_t segs = 0;
    for (auto& e : fs::directory_iterator(dir.path / "t"))
        if (e.path().extension() == ".seg") ++segs;
    CHECK(segs >= 3);

    // all records still readable across segments
    auto recs = log.read("t", 0, 1000);
    CHECK(recs.size() == n);
}

TEST_CASE("oversize payloads are rejected") {
    test::TempDir dir("log-size");
    EventLog log(dir.str());
    std::vector<uint8_t> big(1024 * 1024 + 1);
    CHECK_THROWS_AS((void)log.append("t", big), Error);
}

TEST_CASE("full scan after many appends verifies every crc") {
    test::TempDir dir("log-scan");
    EventLog::Options opt;
    opt.segment_bytes = 64 * 1024;
    {
        EventLog log(dir.str(), opt);
        for (int i = 0; i < 10'000; ++i) log.append("t", payload_of("payload-" + std::to_string(i)));
        log.wait_durable("t", 9'999);
    }
    EventLog log(dir.str(), opt);
    CHECK(log.end_offset("t") == 10'000);
    uint64_t off = 0;
    while (true) {
        auto recs = log.read("t", off, 512); // read verifies each crc
        if (recs.empty()) break;
        for (const auto& r : recs) CHECK(r.offset == off++);
    }
    CHECK(off == 10'000);
}

TEST_CASE("flipping one payload byte surfaces CorruptRecord on read, never silence") {
    test::TempDir dir("log-corrupt");
    EventLog log(dir.str());
    for (int i = 0; i < 50; ++i) log.append("t", payload_of("record-" + std::to_string(i)));
    log.wait_durable("t", 49);

    // flip a byte in the middle of some payload while the log stays open
    std::string seg = (dir.path / "t" / "00000000000000000000.seg").string();
    {
        std::fstream f(seg, std::ios::in | std::ios::out | std::ios::binary);
        REQUIRE(f.good());
        char byte;
        f.seekg(200);
        f.get(byte);
        f.seekp(200);
        f.put(static_cast<char>(byte ^ 0x40));
    }

    CHECK_THROWS_AS((void)log.read("t", 0, 100), Error);
    try {
        (void)log.read("t", 0, 100);
    } catch (const Error& e) {
        CHECK(e.code() == Errc::corruption);
    }
}

TEST_CASE("consumer offsets: new group at zero, durable commits, monotone") {
    test::TempDir dir("log-offsets");
    {
        EventLog log(dir.str());
        CHECK(log.fetch_committed("g1", "t") == 0);
        log.commit_offset("g1", "t", 41);
        CHECK(log.fetch_committed("g1", "t") == 41);
        log.commit_offset("g1", "t", 40); // regression ignored with a warning
        CHECK(log.fetch_committed("g1", "t") == 41);
    }
    EventLog log(dir.str()); // crash + restart
    CHECK(log.fetch_committed("g1", "t") == 41);
    CHECK(log.fetch_committed("g2", "t") == 0);
}

TEST_CASE("two consumer groups observe identical record sequences") {
    test::TempDir dir("log-groups");
    EventLog log(dir.str());
    for (int i = 0; i < 500; ++i) log.append("t", payload_of("r" + std::to_string(i * 7)));

    auto drain = [&](const std::string& group) {
        std::vector<std::string> seen;
        uint64_t off = log.fetch_committed(group, "t");
        while (true) {
            auto recs = log.read("t", off, 64);
            if (recs.empty()) break;
            for (auto& r : recs) seen.push_back(str_of(r));
            off = recs.back().offset + 1;
        }
        log.commit_offset(group, "t", off);
        return seen;
    };
    auto a = drain("alpha");
    auto b = drain("beta");
    CHECK(a == b);
    CHECK(a.size() == 500);
}

TEST_CASE("recover: empty directory yields end offset zero") {
    test::TempDir dir("log-empty");
    EventLog log(dir.str());
    CHECK(log.end_offset("fresh") == 0);
}

TEST_CASE("recover: random truncation always leaves a readable prefix") {
    test::TempDir dir("log-fuzz");
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 60; ++trial) {
        std::string topic = "t" + std::to_string(trial);
        std::vector<std::string> payloads;
        uint64_t file_size;
        std::string seg;
        {
            EventLog log(dir.str());
            int n = 5 + static_cast<int>(rng() % 40);
            for (int i = 0; i < n; ++i) {
                std::string p(1 + rng() % 300, static_cast<char>('A' + i % 26));
                payloads.push_back(p);
                log.append(topic, payload_of(p));
            }
            log.wait_durable(topic, static_cast<uint64_t>(n - 1));
            seg = (dir.path / topic / "00000000000000000000.seg").string();
            file_size = fs::file_size(seg);
        }
        // tear the tail at a random byte boundary
        uint64_t cut = rng() % (file_size + 1);
        fs::resize_file(seg, cut);

        EventLog log(dir.str());
        uint64_t end = log.end_offset(topic);
        auto recs = log.read(topic, 0, 1000);
        REQUIRE(recs.size() == end);
        for (size_t i = 0; i < recs.size(); ++i) CHECK(str_of(recs[i]) == payloads[i]); // exact prefix
        if (cut >= file_size) CHECK(end == payloads.size());
    }
}

TEST_CASE("recover: a damaged sealed segment refuses to start") {
    test::TempDir dir("log-sealed");
    EventLog::Options opt;
    opt.segment_bytes = 2048;
    {
        EventLog log(dir.str(), opt);
        std::string big(256, 'z');
        for (int i = 0; i < 40; ++i) log.append("t", payload_of(big));
    }
    // find a sealed (non-last) segment and corrupt it
    std::vector<fs::path> segs;
    for (auto& e : fs::directory_iterator(dir.path / "t"))
        if (e.path().extension() == ".seg") segs.push_back(e.path());
    std::sort(segs.begin(), segs.end());
    REQUIRE(segs.size() >= 2);
    {
        std::fstream f(segs[0], std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(100);
        f.put('\x7f');
    }
    CHECK_THROWS_AS(EventLog(dir.str(), opt).end_offset("t"), Error);
}

TEST_CASE("single-writer lock: a second handle on the same topic is refused") {
    test::TempDir dir("log-lock");
    EventLog a(dir.str());
    a.append("t", payload_of("x"));
    EventLog b(dir.str());
    CHECK_THROWS_AS((void)b.append("t", payload_of("y")), Error);
}

TEST_CASE("retention deletes oldest sealed segments and read before the horizon fails") {
    test::TempDir dir("log-retention");
    EventLog::Options opt;
    opt.segment_bytes = 2048;
    EventLog log(dir.str(), opt);
    std::string big(256, 'r');
    for (int i = 0; i < 60; ++i) log.append("t", payload_of(big));
    uint64_t before = log.begin_offset("t");
    CHECK(before == 0);
    log.apply_retention("t", 4096);
    CHECK(log.begin_offset("t") > 0);
    CHECK_THROWS_AS((void)log.read("t", 0, 1), Error);
    // records after the horizon still readable
    auto recs = log.read("t", log.begin_offset("t"), 10);
    CHECK(!recs.empty());
}

TEST_CASE("throughput sanity: 50k appends of 256-byte payloads per second") {
    test::TempDir dir("log-throughput");
    EventLog log(dir.str());
    std::vector<uint8_t> payload(256, 0x42);
    const int n = 100'000;
    auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < n; ++i) log.append("t", payload);
    log.wait_durable("t", n - 1);
    auto dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    double rate = n / dt;
    MESSAGE("append rate: ", rate, " records/s");
    CHECK(rate >= 50'000.0);
}
