#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>

#include "model/catalog.hpp"
#include "sim/simulator.hpp"
#include "store/column_codec.hpp"
#include "store/cycle_store.hpp"
#include "store/frame_json.hpp"
#include "util/numfmt.hpp"
#include "util/error.hpp"
#include "test_util.hpp"

using namespace cw;
namespace fs = std::filesystem;

// ---- column codec ---------------------------------------------------------

TEST_CASE("constant column picks rle and decodes identically") {
    std::vector<double> v(8, 5.0);
    ColumnChunk c = encode_column("p", v);
    CHECK(c.encoding == Encoding::rle);
    CHECK(decode_column(c) == v);
    CHECK(c.min == 5.0);
    CHECK(c.max == 5.0);
}

TEST_CASE("1e-6 ramp picks delta_varint and beats raw by 4x") {
    std::vector<double> v;
    for (int i = 0; i < 4096; ++i) v.push_back(quantize6(100.0 + 1e-6 * i));
    ColumnChunk c = encode_column("p", v);
    CHECK(c.encoding == Encoding::delta_varint);
    CHECK(c.bytes.size() * 4 < v.size() * 8);
    CHECK(decode_column(c) == v);
}

TEST_CASE("values off the 1e-6 grid fall back to raw and round-trip bit-exactly") {
    std::vector<double> v;
    for (int i = 1; i <= 300; ++i) v.push_back(3.14159265358979e-9 * i * 1.000000017);
    ColumnChunk c = encode_column("p", v);
    CHECK(c.encoding == Encoding::raw);
    std::vector<double> back = decode_column(c);
    REQUIRE(back.size() == v.size());
    for (size_t i = 0; i < v.size(); ++i) CHECK(std::memcmp(&back[i], &v[i], 8) == 0);
}

TEST_CASE("small alphabets pick dict") {
    std::vector<double> v;
    std::mt19937_64 rng(3);
    for (int i = 0; i < 1000; ++i) v.push_back(static_cast<double>(rng() % 7) * 0.125 + 0.001);
    ColumnChunk c = encode_column("p", v);
    CHECK(c.encoding == Encoding::dict);
    CHECK(decode_column(c) == v);
}

TEST_CASE("decode(encode(v)) == v over generated columns") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<double> v;
        size_t n = 1 + rng() % 400;
        int mode = static_cast<int>(rng() % 4);
        double base = static_cast<double>(static_cast<int64_t>(rng() % 2000000) - 1000000) / 100.0;
        for (size_t i = 0; i < n; ++i) {
            switch (mode) {
            case 0: v.push_back(base); break;                                 // constant
            case 1: v.push_back(quantize6(base + 0.001 * i)); break;          // smooth grid
            case 2: v.push_back(std::ldexp(static_cast<double>(rng()), -32)); break; // irregular
            default: v.push_back(static_cast<double>(rng() % 5)); break;      // tiny alphabet
            }
        }
        ColumnChunk c = encode_column("p", v);
        std::vector<double> back = decode_column(c);
        REQUIRE(back.size() == v.size());
        for (size_t i = 0; i < v.size(); ++i) CHECK(back[i] == v[i]);
        // header min/max equal recomputed min/max of the decoded values
        double lo = back[0], hi = back[0];
        for (double x : back) {
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
        CHECK(lo == c.min);
        CHECK(hi == c.max);
    }
}

TEST_CASE("truncated or mangled chunk bytes raise CorruptChunk") {
    std::vector<double> v;
    for (int i = 0; i < 100; ++i) v.push_back(quantize6(7.25 + i * 0.5));
    ColumnChunk c = encode_column("p", v);
    ColumnChunk cut = c;
    cut.bytes.resize(cut.bytes.size() / 2);
    CHECK_THROWS_AS((void)decode_column(cut), Error);

    ColumnChunk wrong_count = c;
    wrong_count.value_count += 1;
    CHECK_THROWS_AS((void)decode_column(wrong_count), Error);
}

TEST_CASE("non-finite and empty inputs are rejected") {
    CHECK_THROWS_AS((void)encode_column("p", {}), Error);
    CHECK_THROWS_AS((void)encode_column("p", {1.0, std::nan("")}), Error);
    CHECK_THROWS_AS((void)encode_column("p", {std::numeric_limits<double>::infinity()}), Error);
}

// ---- cycle store ------------------------------------------------------------

namespace {

ParameterCatalog& demo() {
    static ParameterCatalog cat = demo_catalog();
    return cat;
}

std::vector<CycleFrame> sim_frames(const std::string& cell, uint64_t seed, int count) {
    CellConfig cc;
    cc.cell_id = cell;
    cc.catalog = &demo();
    cc.seed = seed;
    std::vector<CycleFrame> frames;
    for (int i = 0; i < count; ++i) frames.push_back(generate_cycle(cc, static_cast<uint64_t>(i)));
    return frames;
}

bool frames_close(const CycleFrame& a, const CycleFrame& b, double tol = 1e-6) {
    if (a.cell_id != b.cell_id || a.cycle_index != b.cycle_index) return false;
    if (a.start_ts_ms != b.start_ts_ms || a.end_ts_ms != b.end_ts_ms) return false;
    if (a.ticks.size() != b.ticks.size()) return false;
    for (size_t p = 0; p < a.ticks.size(); ++p) {
        if (a.ticks[p].size() != b.ticks[p].size()) return false;
        for (size_t t = 0; t < a.ticks[p].size(); ++t)
            if (std::fabs(a.ticks[p][t] - b.ticks[p][t]) > tol) return false;
    }
    return a.energy_kwh == b.energy_kwh && a.part_mass_g == b.part_mass_g && a.stale == b.stale;
}

} // namespace

TEST_CASE("store round-trip: written frames scan back equal, scalars exact") {
    test::TempDir dir("store-roundtrip");
    auto frames = sim_frames("cell01", 5, 12);
    {
        CycleStore store = CycleStore::open(dir.file("s.ccf"), &demo());
        store.write_rowgroup(frames);
    }
    CycleStore store = CycleStore::open(dir.file("s.ccf"));
    auto back = store.scan_all();
    REQUIRE(back.size() == frames.size());
    for (size_t i = 0; i < frames.size(); ++i) CHECK(frames_close(back[i], frames[i]));
}

TEST_CASE("256 frames make one group, 257 make two") {
    test::TempDir dir("store-cap");
    auto frames = sim_frames("cell01", 6, 257);
    {
        CycleStore store = CycleStore::open(dir.file("a.ccf"), &demo());
        store.write_rowgroup({frames.begin(), frames.begin() + 256});
        CHECK(store.group_count() == 1);
    }
    CycleStore store = CycleStore::open(dir.file("b.ccf"), &demo());
    store.write_rowgroup(frames);
    CHECK(store.group_count() == 2);
    CHECK(store.cycle_count() == 257);
}

TEST_CASE("schema mismatch is rejected") {
    test::TempDir dir("store-schema");
    CycleStore store = CycleStore::open(dir.file("s.ccf"), &demo());
    CycleFrame f = test::make_frame("c", 0, {{1.0, 2.0}, {3.0, 4.0}});
    CHECK_THROWS_AS((void)store.write_rowgroup({f}), Error);
}

TEST_CASE("scan projections return only requested params") {
    test::TempDir dir("store-proj");
    auto frames = sim_frames("cell01", 7, 8);
    CycleStore store = CycleStore::open(dir.file("s.ccf"), &demo());
    store.write_rowgroup(frames);

    CycleStore::ScanSelection sel;
    sel.params = std::vector<std::string>{"inj.melt_temp"};
    size_t seen = 0;
    store.scan(sel, [&](CycleFrame&& f) {
        CHECK(f.params->size() == 1);
        CHECK((*f.params)[0] == "inj.melt_temp");
        REQUIRE(f.ticks.size() == 1);
        CHECK(f.ticks[0].size() == f.tick_count());
        ++seen;
    });
    CHECK(seen == 8);

    CycleStore::ScanSelection bad;
    bad.params = std::vector<std::string>{"no.such_param"};
    CHECK_THROWS_AS(store.scan(bad, [](CycleFrame&&) {}), Error);
}

TEST_CASE("cycle-range scan skips non-overlapping groups via the footer index") {
    test::TempDir dir("store-skip");
    CycleStore store = CycleStore::open(dir.file("s.ccf"), &demo());
    auto frames = sim_frames("cell01", 8, 100);
    // ten groups of ten cycles
    for (int g = 0; g < 10; ++g)
        store.write_rowgroup({frames.begin() + g * 10, frames.begin() + (g + 1) * 10});
    REQUIRE(store.group_count() == 10);

    CycleStore::ScanSelection sel;
    sel.cycle_range = {{41, 52}};
    std::vector<uint64_t> seen;
    auto stats = store.scan(sel, [&](CycleFrame&& f) { seen.push_back(f.cycle_index); });
    CHECK(seen.size() == 12);
    CHECK(seen.front() == 41);
    CHECK(seen.back() == 52);
    CHECK(stats.groups_read == 2);
    CHECK(stats.groups_skipped == 8);
}

TEST_CASE("scan all returns every cycle exactly once, ordered by (cell, cycle)") {
    test::TempDir dir("store-order");
    CycleStore store = CycleStore::open(dir.file("s.ccf"), &demo());
    store.write_rowgroup(sim_frames("cell02", 9, 10));
    store.write_rowgroup(sim_frames("cell01", 9, 10));
    std::vector<std::pair<std::string, uint64_t>> order;
    store.scan({}, [&](CycleFrame&& f) { order.emplace_back(f.cell_id, f.cycle_index); });
    REQUIRE(order.size() == 20);
    CHECK(std::is_sorted(order.begin(), order.end()));
    CHECK(std::adjacent_find(order.begin(), order.end()) == order.end());
}

TEST_CASE("crash between group data and footer commit leaves only committed groups") {
    test::TempDir dir("store-crash");
    std::string path = dir.file("s.ccf");
    auto frames = sim_frames("cell01", 10, 30);

    for (const char* stage : {"after_group_data", "before_commit_rename"}) {
        fs::remove(path);
        fs::remove(path + ".commit");
        CycleStore store = CycleStore::open(path, &demo());
        store.write_rowgroup({frames.begin(), frames.begin() + 10});

        store.test_crash_hook = [&](const char* s) { return std::string(s) == stage; };
        CHECK_THROWS_AS((void)store.write_rowgroup({frames.begin() + 10, frames.begin() + 20}), Error);

        CycleStore reopened = CycleStore::open(path);
        CHECK(reopened.cycle_count() == 10); // the second batch never committed
        auto back = reopened.scan_all();
        REQUIRE(back.size() == 10);
        for (size_t i = 0; i < back.size(); ++i) CHECK(frames_close(back[i], frames[i]));
    }
}

TEST_CASE("crash-point fuzz: the store always reopens with whole committed groups") {
    test::TempDir dir("store-crash-fuzz");
    std::mt19937_64 rng(77);
    auto frames = sim_frames("cell01", 11, 60);
    for (int trial = 0; trial < 40; ++trial) {
        std::string path = dir.file("s" + std::to_string(trial) + ".ccf");
        CycleStore store = CycleStore::open(path, &demo());
        size_t committed = 0;
        size_t pos = 0;
        while (pos < frames.size()) {
            size_t batch = 1 + rng() % 12;
            batch = std::min(batch, frames.size() - pos);
            bool crash = rng() % 3 == 0;
            int countdown = static_cast<int>(rng() % 3);
            if (crash) {
                store.test_crash_hook = [&](const char*) mutable { return countdown-- <= 0; };
            } else {
                store.test_crash_hook = nullptr;
            }
            try {
                store.write_rowgroup({frames.begin() + pos, frames.begin() + pos + batch});
                committed += batch;
                pos += batch;
            } catch (const Error&) {
                break; // crashed mid-write; stop like a dead process
            }
        }
        CycleStore reopened = CycleStore::open(path);
        auto back = reopened.scan_all();
        CHECK(back.size() == committed);
        for (size_t i = 0; i < back.size(); ++i) CHECK(frames_close(back[i], frames[i]));
    }
}

TEST_CASE("compression stats: json_bytes equals the export serialization length") {
    test::TempDir dir("store-stats");
    auto frames = sim_frames("cell01", 12, 20);
    CycleStore store = CycleStore::open(dir.file("s.ccf"), &demo());
    store.write_rowgroup(frames);

    std::string ndjson;
    for (const auto& f : frames) append_frame_ndjson(demo(), f, ndjson);

    auto rep = store.compression_stats(80);
    CHECK(rep.json_bytes == ndjson.size());
    CHECK(rep.ratio > 1.0);
    CHECK(rep.cycles == 20);
    CHECK(rep.cells_observed == 1);
    CHECK(rep.fleet_cells == 80);
    CHECK(rep.annualized_tb > 0.0);
}

TEST_CASE("all-constant columns give a degenerate rle ratio >= 100") {
    test::TempDir dir("store-const");
    ParameterCatalog cat = ParameterCatalog::parse_csv(
        "canonical_id,source_name,device_class,unit,dtype,min,max\n"
        "a.one,One,injection_machine,u,f64,0,100\n"
        "a.two,Two,injection_machine,u,f64,0,100\n");
    CycleStore store = CycleStore::open(dir.file("s.ccf"), &cat);
    std::vector<CycleFrame> frames;
    for (int i = 0; i < 64; ++i) {
        CycleFrame f = test::make_frame("c1", static_cast<uint64_t>(i),
                                        {std::vector<double>(120, 42.0), std::vector<double>(120, 7.0)},
                                        {"a.one", "a.two"});
        f.start_ts_ms = 1'000'000 + i * 120'000;
        f.end_ts_ms = f.start_ts_ms + 120'000;
        frames.push_back(std::move(f));
    }
    store.write_rowgroup(frames);
    auto rep = store.compression_stats(80);
    MESSAGE("constant-column ratio: ", rep.ratio);
    CHECK(rep.ratio >= 100.0);
}

TEST_CASE("empty store stats raise EmptyStore") {
    test::TempDir dir("store-empty");
    CycleStore store = CycleStore::open(dir.file("s.ccf"), &demo());
    CHECK_THROWS_AS((void)store.compression_stats(80), Error);
}
