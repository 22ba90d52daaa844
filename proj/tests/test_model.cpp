#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <random>

#include "model/assembler.hpp"
#include "model/catalog.hpp"
#include "model/frame.hpp"
#include "util/error.hpp"
#include "test_util.hpp"

using namespace cw;

TEST_CASE("demo catalog loads with 40 parameters and matches the shipped file") {
    ParameterCatalog cat = demo_catalog();
    CHECK(cat.size() == 40);

    std::ifstream f("data/catalog_demo.csv", std::ios::binary);
    if (f) { // run from the repo root
        std::string disk((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
        CHECK(disk == demo_catalog_csv());
    }
}

TEST_CASE("normalize_param resolves source names case-insensitively") {
    ParameterCatalog cat = demo_catalog();

    const ParameterSpec& spec = cat.normalize("ActSimPara1", DeviceClass::injection_machine);
    CHECK(spec.canonical_id == "inj.melt_temp");

    const ParameterSpec& lower = cat.normalize("actsimpara1", DeviceClass::injection_machine);
    CHECK(&lower == &spec);

    CHECK_THROWS_AS((void)cat.normalize("NoSuchName", DeviceClass::robot6ax), Error);
    try {
        (void)cat.normalize("NoSuchName", DeviceClass::robot6ax);
    } catch (const Error& e) {
        CHECK(e.code() == Errc::unknown_parameter);
    }

    // same spec must not resolve under a different device class
    CHECK(cat.try_normalize("ActSimPara1", DeviceClass::robot6ax) == nullptr);
}

TEST_CASE("normalize_param is pure: repeated lookups return the same spec") {
    ParameterCatalog cat = demo_catalog();
    const ParameterSpec* a = cat.try_normalize("EnerCumKWh", DeviceClass::energy_analyzer);
    const ParameterSpec* b = cat.try_normalize("EnerCumKWh", DeviceClass::energy_analyzer);
    REQUIRE(a != nullptr);
    CHECK(a == b);
}

TEST_CASE("catalog rejects bad rows") {
    CHECK_THROWS_AS(ParameterCatalog::parse_csv("canonical_id,source_name,device_class,unit,dtype,min,max\n"
                                                "a,b,injection_machine,u,f64,5,5\n"),
                    Error); // min == max
    CHECK_THROWS_AS(ParameterCatalog::parse_csv("canonical_id,source_name,device_class,unit,dtype,min,max\n"
                                                "a,b,not_a_device,u,f64,0,1\n"),
                    Error);
    CHECK_THROWS_AS(ParameterCatalog::parse_csv("canonical_id,source_name,device_class,unit,dtype,min,max\n"
                                                "a,b,injection_machine,u,bool,0,2\n"),
                    Error); // bool range must be {0,1}
    CHECK_THROWS_AS(ParameterCatalog::parse_csv("canonical_id,source_name,device_class,unit,dtype,min,max\n"
                                                "a,b,injection_machine,u,f64,0,1\n"
                                                "a,c,injection_machine,u,f64,0,1\n"),
                    Error); // duplicate canonical id
}

// ---------------------------------------------------------------------------

namespace {

// Catalog with a handful of params for assembly tests: flag + energy + mass
// + two ordinary params.
ParameterCatalog tiny_catalog() {
    return ParameterCatalog::parse_csv(
        "canonical_id,source_name,device_class,unit,dtype,min,max\n"
        "inj.cycle_flag,Flag,injection_machine,flag,bool,0,1\n"
        "inj.pressure,Prs,injection_machine,bar,f64,0,100\n"
        "energy.cum_kwh,Ener,energy_analyzer,kWh,f64,0,1000000\n"
        "scale.part_mass_g,Mass,precision_scale,g,f64,0,100\n"
        "amb.humidity,Hum,ambient_sensor,pct,f64,0,100\n");
}

struct Harness {
    ParameterCatalog cat = tiny_catalog();
    std::vector<CycleFrame> frames;
    CycleAssembler::Options opt;
    std::unique_ptr<CycleAssembler> asmblr;

    Harness() { reset(); }
    void reset() {
        opt.boundary_param = "inj.cycle_flag";
        opt.energy_param = "energy.cum_kwh";
        opt.mass_param = "scale.part_mass_g";
        asmblr = std::make_unique<CycleAssembler>(cat, opt, [this](CycleFrame&& f) {
            frames.push_back(std::move(f));
        });
    }

    // One machine message carrying flag + pressure at second s.
    void machine(int64_t s, double flag, double pressure) {
        std::vector<std::pair<int, double>> v{{0, flag}, {1, pressure}};
        asmblr->on_message("c1", DeviceClass::injection_machine, s * 1000, v);
    }
    void energy(int64_t s, double kwh) {
        std::vector<std::pair<int, double>> v{{2, kwh}};
        asmblr->on_message("c1", DeviceClass::energy_analyzer, s * 1000, v);
    }
    void mass(int64_t s, double g) {
        std::vector<std::pair<int, double>> v{{3, g}};
        asmblr->on_message("c1", DeviceClass::precision_scale, s * 1000, v);
    }
    void humidity(int64_t s, double pct) {
        std::vector<std::pair<int, double>> v{{4, pct}};
        asmblr->on_message("c1", DeviceClass::ambient_sensor, s * 1000, v);
    }
};

} // namespace

TEST_CASE("assemble_cycle: edges at t=0 and t=30 give one frame with T=30") {
    Harness h;
    for (int s = 0; s < 31; ++s) {
        h.machine(s, s == 0 || s == 30 ? 1.0 : 0.0, 50.0 + s);
        h.energy(s, 100.0 + 0.01 * s);
    }
    REQUIRE(h.frames.size() == 1);
    const CycleFrame& f = h.frames[0];
    CHECK(f.cycle_index == 0);
    CHECK(f.tick_count() == 30);
    CHECK(f.start_ts_ms == 0);
    CHECK(f.end_ts_ms == 30'000);
    for (const auto& row : f.ticks) CHECK(row.size() == 30);
    CHECK_FALSE(f.stale);
}

TEST_CASE("assemble_cycle: LOCF fills gaps, leading gap takes the first observation") {
    Harness h;
    for (int s = 0; s < 31; ++s) h.machine(s, s == 0 || s == 30 ? 1.0 : 0.0, 1.0);
    h.humidity(5, 44.0);  // first observation at t=5
    h.humidity(29, 48.0); // then nothing until t=29
    h.machine(31, 0.0, 1.0);
    h.machine(32, 1.0, 1.0); // force-close via a second edge? already closed at 30

    REQUIRE(h.frames.size() >= 1);
    const auto& row = h.frames[0].ticks[4]; // amb.humidity
    for (int t = 0; t <= 4; ++t) CHECK(row[t] == 44.0);  // leading backfill
    for (int t = 5; t <= 28; ++t) CHECK(row[t] == 44.0); // carried forward
    CHECK(row[29] == 48.0);
}

TEST_CASE("assemble_cycle: energy scalar is last minus first cumulative reading") {
    Harness h;
    for (int s = 0; s < 61; ++s) {
        h.machine(s, s % 30 == 0 ? 1.0 : 0.0, 2.0);
        h.energy(s, 100.0 + 0.4 * s / 30.0);
    }
    REQUIRE(h.frames.size() == 2);
    CHECK(h.frames[0].energy_kwh == doctest::Approx(100.0 + 0.4 * 29 / 30.0 - 100.0).epsilon(1e-12));
    CHECK(h.frames[1].cycle_index == 1);
}

TEST_CASE("assemble_cycle: part mass is the last scale reading in the cycle") {
    Harness h;
    for (int s = 0; s < 31; ++s) {
        h.machine(s, s == 0 || s == 30 ? 1.0 : 0.0, 2.0);
        h.mass(s, s < 28 ? 0.0 : 57.25);
    }
    REQUIRE(h.frames.size() == 1);
    CHECK(h.frames[0].part_mass_g == 57.25);
}

TEST_CASE("assemble_cycle: duplicate (cell, device, ts) messages are dropped") {
    Harness h;
    for (int s = 0; s < 31; ++s) {
        h.machine(s, s == 0 || s == 30 ? 1.0 : 0.0, 10.0 + s);
        h.machine(s, 9.0, -1.0); // redelivery with different content must be ignored
    }
    REQUIRE(h.frames.size() == 1);
    CHECK(h.asmblr->counters().deduped_messages == 31);
    CHECK(h.frames[0].ticks[1][5] == 15.0);
}

TEST_CASE("assemble_cycle: stale timeout emits a partial flagged frame") {
    Harness h;
    h.opt.stale_timeout_ms = 10'000;
    h.reset();
    h.machine(0, 1.0, 5.0);
    for (int s = 1; s < 8; ++s) h.machine(s, 0.0, 5.0 + s);
    h.machine(20, 0.0, 99.0); // 20 s after start: beyond the 10 s timeout
    REQUIRE(h.frames.size() == 1);
    CHECK(h.frames[0].stale);
    CHECK(h.frames[0].tick_count() == 8); // covers the observed seconds only
    CHECK(h.asmblr->counters().stale_frames == 1);
}

TEST_CASE("assemble_cycle: flush emits the trailing partial cycle as stale") {
    Harness h;
    for (int s = 0; s < 12; ++s) h.machine(s, s == 0 ? 1.0 : 0.0, 1.0);
    CHECK(h.frames.empty());
    h.asmblr->flush();
    REQUIRE(h.frames.size() == 1);
    CHECK(h.frames[0].stale);
    CHECK(h.frames[0].tick_count() == 12);
}

TEST_CASE("assemble_cycle: sub-second cycles are skipped and counted as empty") {
    Harness h;
    std::vector<std::pair<int, double>> flag_on{{0, 1.0}};
    std::vector<std::pair<int, double>> flag_off{{0, 0.0}};
    h.asmblr->on_message("c1", DeviceClass::injection_machine, 0, flag_on);
    h.asmblr->on_message("c1", DeviceClass::injection_machine, 100, flag_off);
    // rising edge again at 400 ms: the open cycle spans T = round(0.4) = 0
    h.asmblr->on_message("c1", DeviceClass::injection_machine, 400, flag_on);
    CHECK(h.frames.empty());
    CHECK(h.asmblr->counters().empty_cycles == 1);
}

TEST_CASE("assemble_cycle frames are non-overlapping and ordered per cell") {
    Harness h;
    std::mt19937 rng(7);
    int64_t s = 0;
    for (int cyc = 0; cyc < 20; ++cyc) {
        int len = 5 + static_cast<int>(rng() % 10);
        for (int t = 0; t < len; ++t) {
            h.machine(s, t == 0 ? 1.0 : 0.0, static_cast<double>(rng() % 100));
            ++s;
        }
    }
    h.machine(s, 1.0, 0.0); // close the last cycle
    REQUIRE(h.frames.size() == 20);
    for (size_t i = 0; i < h.frames.size(); ++i) {
        CHECK(h.frames[i].cycle_index == i);
        if (i > 0) CHECK(h.frames[i].start_ts_ms >= h.frames[i - 1].end_ts_ms);
        CHECK(h.frames[i].end_ts_ms > h.frames[i].start_ts_ms);
    }
    // LOCF never invents extra ticks: total ticks <= seconds elapsed + frames
    uint64_t total_ticks = 0;
    for (const auto& f : h.frames) total_ticks += f.tick_count();
    CHECK(total_ticks <= static_cast<uint64_t>(s) + h.frames.size());
}

// ---------------------------------------------------------------------------

TEST_CASE("resample_row: [0,10] onto 5 points") {
    std::vector<double> out = resample_row({0.0, 10.0}, 5);
    REQUIRE(out.size() == 5);
    CHECK(out[0] == 0.0);
    CHECK(out[1] == doctest::Approx(2.5).epsilon(1e-15));
    CHECK(out[2] == doctest::Approx(5.0).epsilon(1e-15));
    CHECK(out[3] == doctest::Approx(7.5).epsilon(1e-15));
    CHECK(out[4] == 10.0);
}

TEST_CASE("resample_row: L == T is an exact identity") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> dist(-50.0, 50.0);
    for (int trial = 0; trial < 50; ++trial) {
        size_t T = 2 + rng() % 40;
        std::vector<double> row(T);
        for (auto& v : row) v = dist(rng);
        std::vector<double> out = resample_row(row, static_cast<int>(T));
        CHECK(out == row); // bitwise
    }
}

TEST_CASE("resample_frame: 5x37 onto 64, endpoints preserved exactly") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> dist(-5.0, 5.0);
    CycleFrame f = test::make_frame("c1", 0, {});
    f.ticks.resize(5);
    for (auto& row : f.ticks) {
        row.resize(37);
        for (auto& v : row) v = dist(rng);
    }
    f.params = test::make_params({"a", "b", "c", "d", "e"});
    f.end_ts_ms = f.start_ts_ms + 37'000;

    ResampledFrame rf = resample_frame(f, 64);
    REQUIRE(rf.grid.size() == 5);
    for (size_t p = 0; p < 5; ++p) {
        REQUIRE(rf.grid[p].size() == 64);
        CHECK(rf.grid[p].front() == f.ticks[p].front());
        CHECK(rf.grid[p].back() == f.ticks[p].back());
        // interior points agree with direct evaluation of the interpolant
        for (int j = 0; j < 64; ++j) {
            double pos = 36.0 / 63.0 * j;
            int i = std::min(static_cast<int>(pos), 35);
            double expect = f.ticks[p][i] + (f.ticks[p][i + 1] - f.ticks[p][i]) * (pos - i);
            CHECK(rf.grid[p][j] == doctest::Approx(expect).epsilon(1e-12));
        }
    }
}

TEST_CASE("resample_frame rejects degenerate cycles") {
    CycleFrame f = test::make_frame("c1", 0, {{1.0}});
    CHECK_THROWS_AS((void)resample_frame(f, 8), Error);
    CycleFrame g = test::make_frame("c1", 0, {{1.0, 2.0}});
    CHECK_THROWS_AS((void)resample_frame(g, 1), Error);
}
