#include "sim/simulator.hpp"

#include <algorithm>
#include <cmath>

#include "util/error.hpp"
#include "util/numfmt.hpp"

namespace cw {

const char* anomaly_kind_name(AnomalyKind k) {
    switch (k) {
    case AnomalyKind::spike: return "spike";
    case AnomalyKind::drift: return "drift";
    case AnomalyKind::stuck_sensor: return "stuck_sensor";
    case AnomalyKind::correlation_break: return "correlation_break";
    case AnomalyKind::energy_surge: return "energy_surge";
    }
    return "?";
}

std::string AnomalyLabel::to_ndjson() const {
    std::string s = "{\"cell\":\"" + cell_id + "\",\"cycle\":" + std::to_string(cycle_index) +
                    ",\"kind\":\"" + anomaly_kind_name(kind) + "\",\"params\":[";
    for (size_t i = 0; i < affected_params.size(); ++i) {
        if (i) s += ',';
        s += '"' + affected_params[i] + '"';
    }
    s += "]}";
    return s;
}

void CellConfig::validate() const {
    if (!catalog) raise(Errc::config, "cell config needs a catalog");
    if (!(cycle_len_s_mean > 2.0 * cycle_len_s_jitter))
        raise(Errc::config, "cycle length mean must exceed 2x jitter");
    if (!(anomaly_rate >= 0.0 && anomaly_rate < 0.5)) raise(Errc::config, "anomaly_rate must be in [0, 0.5)");
    if (cycle_len_s_mean < 3.0) raise(Errc::config, "cycle length too short");
}

namespace {

// ---- phase templates ----------------------------------------------------

double sstep(double x) {
    x = std::clamp(x, 0.0, 1.0);
    return x * x * (3.0 - 2.0 * x);
}

double pulse(double phi, double a, double b) {
    if (phi <= a || phi >= b) return 0.0;
    double r = std::min(0.05, (b - a) / 3.0);
    return std::min(sstep((phi - a) / r), sstep((b - phi) / r));
}

enum Shape : int {
    kFlat = 0,
    kInject = 1,
    kHold = 2,
    kPlast = 3,
    kCool = 4,
    kEject = 5,
    kScrew = 6,
    kRampEnd = 7,
    kThermal = 8,
    kClamp = 9,
    kPower = 10,
    kCushion = 11,
    kFlag = 12,
};

double shape_value(int shape, double phi) {
    switch (shape) {
    case kFlat: return 0.0;
    case kInject: return pulse(phi, 0.01, 0.14);
    case kHold: return pulse(phi, 0.15, 0.40);
    case kPlast: return pulse(phi, 0.42, 0.78);
    case kCool: return pulse(phi, 0.40, 0.90);
    case kEject: return pulse(phi, 0.88, 0.985);
    case kScrew:
        if (phi < 0.15) return 1.0 - sstep(phi / 0.15);
        if (phi < 0.42) return 0.0;
        if (phi < 0.80) return sstep((phi - 0.42) / 0.38);
        return 1.0;
    case kRampEnd: return sstep((phi - 0.88) / 0.08);
    case kThermal: return pulse(phi, 0.15, 0.60);
    case kClamp: return pulse(phi, 0.005, 0.88);
    case kPower:
        return pulse(phi, 0.01, 0.14) + 0.33 * pulse(phi, 0.15, 0.40) + 0.25 * pulse(phi, 0.42, 0.78);
    case kCushion: return 1.0 - sstep(phi / 0.15);
    default: return 0.0;
    }
}

struct ParamTemplate {
    double base;
    double amp;
    int shape;
    double noise;       // AR(1) noise sigma (per-cycle jitter for constants)
    double slow_gain;   // coupling to the slow ambient drift
    bool per_cycle_const;
    bool dynamic;       // spike / drift / stuck_sensor eligible
    bool corr_break_ok; // has strong template correlations to destroy
};

// Indexed in demo-catalog order.
constexpr int kFlagIdx = 22;
constexpr int kRegisterIdx = 29;
constexpr int kPowerIdx = 30;
constexpr int kCurrentIdx = 31;
constexpr int kMassIdx = 37;

const ParamTemplate kTemplates[40] = {
    /* melt_temp      */ {232.0, 2.2, kThermal, 0.12, 0.3, false, true, true},
    /* nozzle_temp    */ {238.0, 2.0, kThermal, 0.12, 0.3, false, true, true},
    /* barrel_temp_z1 */ {225.0, 1.8, kThermal, 0.10, 0.3, false, true, true},
    /* barrel_temp_z2 */ {218.0, 1.6, kThermal, 0.10, 0.3, false, true, true},
    /* barrel_temp_z3 */ {209.0, 1.5, kThermal, 0.10, 0.3, false, true, true},
    /* feed_temp      */ {46.0, 1.0, kCool, 0.08, 0.5, false, true, true},
    /* mold_temp_a    */ {41.0, 2.4, kThermal, 0.10, 0.4, false, true, true},
    /* mold_temp_b    */ {42.5, 2.2, kThermal, 0.10, 0.4, false, true, true},
    /* oil_temp       */ {48.0, 1.4, kPower, 0.08, 0.5, false, true, true},
    /* inj_pressure   */ {40.0, 1150.0, kInject, 5.0, 0.0, false, true, true},
    /* hold_pressure  */ {18.0, 640.0, kHold, 3.5, 0.0, false, true, true},
    /* back_pressure  */ {12.0, 88.0, kPlast, 1.2, 0.0, false, true, true},
    /* peak_pressure  */ {55.0, 1270.0, kInject, 6.0, 0.0, false, true, true},
    /* screw_pos      */ {20.0, 170.0, kScrew, 0.8, 0.0, false, true, true},
    /* screw_rpm      */ {4.0, 215.0, kPlast, 2.2, 0.0, false, true, true},
    /* inj_speed      */ {2.0, 118.0, kInject, 1.4, 0.0, false, true, true},
    /* clamp_force    */ {120.0, 2150.0, kClamp, 12.0, 0.0, false, true, true},
    /* inj_time       */ {2.6, 0.0, kFlat, 0.06, 0.0, true, false, false},
    /* cool_time      */ {17.8, 0.0, kFlat, 0.30, 0.0, true, false, false},
    /* plast_time     */ {10.6, 0.0, kFlat, 0.25, 0.0, true, false, false},
    /* cushion        */ {7.8, 3.1, kCushion, 0.05, 0.0, false, true, true},
    /* shot_volume    */ {28.0, 57.0, kPlast, 0.50, 0.0, false, true, true},
    /* cycle_flag     */ {0.0, 1.0, kFlag, 0.0, 0.0, false, false, false},
    /* rob ax1        */ {4.0, 112.0, kEject, 1.5, 0.0, false, true, true},
    /* rob ax2        */ {-6.0, -96.0, kEject, 1.5, 0.0, false, true, true},
    /* rob ax3        */ {3.0, 78.0, kEject, 1.4, 0.0, false, true, true},
    /* rob ax4        */ {-2.0, -62.0, kEject, 1.2, 0.0, false, true, true},
    /* rob ax5        */ {2.0, 48.0, kEject, 1.2, 0.0, false, true, true},
    /* rob ax6        */ {-1.0, -36.0, kEject, 1.0, 0.0, false, true, true},
    /* cum_kwh        */ {0.0, 0.0, kFlat, 0.0, 0.0, false, false, false},
    /* power_kw       */ {11.5, 55.0, kPower, 0.35, 0.0, false, true, true},
    /* current_a      */ {17.5, 83.6, kPower, 0.40, 0.0, false, true, true},
    /* voltage_v      */ {402.0, -3.0, kPower, 0.40, 0.4, false, true, true},
    /* flow_lpm       */ {76.0, 2.2, kClamp, 0.25, 0.3, false, true, false},
    /* temp_in        */ {16.5, 0.3, kCool, 0.06, 0.3, false, true, false},
    /* temp_out       */ {25.5, 3.1, kThermal, 0.12, 0.8, false, true, true},
    /* pressure_bar   */ {4.15, 0.22, kCool, 0.02, 0.1, false, true, false},
    /* part_mass_g    */ {0.0, 356.2, kRampEnd, 0.05, 0.0, false, true, true},
    /* humidity_pct   */ {46.0, 1.3, kEject, 0.12, 3.5, false, true, true},
    /* amb_temp       */ {24.0, 0.5, kCool, 0.06, 1.5, false, true, false},
};

// ---- deterministic streams ----------------------------------------------

uint64_t cell_base(const CellConfig& cfg, uint64_t cycle) {
    return mix64(mix64(cfg.seed, fnv1a64(cfg.cell_id)), cycle);
}

Rng cycle_stream(const CellConfig& cfg, uint64_t cycle) { return Rng(mix64(cell_base(cfg, cycle), 0)); }
Rng anomaly_stream(const CellConfig& cfg, uint64_t cycle) { return Rng(mix64(cell_base(cfg, cycle), 1)); }
Rng param_stream(const CellConfig& cfg, uint64_t cycle, int param) {
    return Rng(mix64(cell_base(cfg, cycle), 1000 + static_cast<uint64_t>(param)));
}

int cycle_ticks(const CellConfig& cfg, uint64_t cycle) {
    Rng rng = cycle_stream(cfg, cycle);
    double g = std::clamp(rng.next_normal(), -2.0, 2.0);
    auto t = static_cast<int>(std::llround(cfg.cycle_len_s_mean + cfg.cycle_len_s_jitter * g));
    return std::max(t, 2);
}

double slow_drift(const CellConfig& cfg, int param, int64_t second) {
    uint64_t h = mix64(fnv1a64(cfg.cell_id), 7777 + static_cast<uint64_t>(param));
    double p1 = 6.283185307179586 * static_cast<double>(h & 0xffff) / 65536.0;
    double p2 = 6.283185307179586 * static_cast<double>((h >> 16) & 0xffff) / 65536.0;
    double t = static_cast<double>(second);
    return std::sin(6.283185307179586 * t / 7200.0 + p1) +
           0.4 * std::sin(6.283185307179586 * t / 1231.0 + p2);
}

// Raw (unquantized) trace of one templated parameter.
std::vector<double> raw_param_row(const CellConfig& cfg, uint64_t cycle, int param, int T,
                                  int64_t start_second) {
    const ParamTemplate& tp = kTemplates[param];
    Rng rng = param_stream(cfg, cycle, param);
    std::vector<double> row(static_cast<size_t>(T));

    if (param == kFlagIdx) {
        row.assign(static_cast<size_t>(T), 0.0);
        row[0] = 1.0;
        return row;
    }
    if (tp.per_cycle_const) {
        // slow-drift dominated so consecutive cycles stay close
        double v = tp.base + tp.noise * (0.65 * slow_drift(cfg, param, start_second) +
                                         0.25 * rng.next_normal());
        row.assign(static_cast<size_t>(T), v);
        return row;
    }

    double amp = tp.amp;
    if (param == kMassIdx) {
        // part mass wanders slowly across cycles
        uint64_t h = fnv1a64(cfg.cell_id);
        double ph = 6.283185307179586 * static_cast<double>(h & 0xffff) / 65536.0;
        amp = tp.amp + 1.4 * std::sin(6.283185307179586 * static_cast<double>(cycle) / 400.0 + ph) +
              0.5 * rng.next_normal();
    } else {
        amp *= 1.0 + 0.012 * rng.next_normal();
    }
    double base = tp.base + 0.5 * tp.noise * rng.next_normal();

    double n = tp.noise * rng.next_normal();
    for (int t = 0; t < T; ++t) {
        double phi = static_cast<double>(t) / static_cast<double>(T);
        double v = base + amp * shape_value(tp.shape, phi);
        if (tp.slow_gain != 0.0) v += tp.slow_gain * slow_drift(cfg, param, start_second + t);
        v += n;
        row[static_cast<size_t>(t)] = v;
        n = 0.35 * n + 0.93674970242 * tp.noise * rng.next_normal();
    }
    return row;
}

struct CyclePlan {
    int T = 0;
    int64_t start_second = 0;
    double register_base = 0.0;
};

// O(cycle) prefix walk: start time and energy-register value.
CyclePlan plan_cycle(const CellConfig& cfg, uint64_t cycle) {
    CyclePlan plan;
    int64_t start = 0;
    double reg = 0.0;
    for (uint64_t i = 0; i < cycle; ++i) {
        int T = cycle_ticks(cfg, i);
        auto power = raw_param_row(cfg, i, kPowerIdx, T, start);
        for (double p : power) reg += p / 3600.0;
        start += T;
    }
    plan.T = cycle_ticks(cfg, cycle);
    plan.start_second = start;
    plan.register_base = reg;
    return plan;
}

CycleFrame build_frame(const CellConfig& cfg, uint64_t cycle, const CyclePlan& plan,
                       double* register_end_out) {
    const size_t P = cfg.catalog->size();
    if (P != 40) raise(Errc::config, "simulator templates expect the 40-parameter demo catalog");

    CycleFrame f;
    f.cell_id = cfg.cell_id;
    f.cycle_index = cycle;
    f.start_ts_ms = cfg.epoch_ms + plan.start_second * 1000;
    f.end_ts_ms = f.start_ts_ms + static_cast<int64_t>(plan.T) * 1000;
    f.params = param_names(*cfg.catalog);
    f.ticks.resize(P);

    for (size_t p = 0; p < P; ++p) {
        if (static_cast<int>(p) == kRegisterIdx) continue;
        f.ticks[p] = raw_param_row(cfg, cycle, static_cast<int>(p), plan.T, plan.start_second);
    }
    // register integrates the power trace
    auto& reg = f.ticks[kRegisterIdx];
    reg.resize(static_cast<size_t>(plan.T));
    double running = plan.register_base;
    for (int t = 0; t < plan.T; ++t) {
        running += f.ticks[kPowerIdx][static_cast<size_t>(t)] / 3600.0;
        reg[static_cast<size_t>(t)] = running;
    }
    if (register_end_out) *register_end_out = running;
    return f;
}

void quantize_frame(CycleFrame& f) {
    for (auto& row : f.ticks)
        for (auto& v : row) v = quantize6(v);
}

void finalize_scalars(CycleFrame& f) {
    const auto& reg = f.ticks[kRegisterIdx];
    f.energy_kwh = reg.back() - reg.front();
    f.part_mass_g = f.ticks[kMassIdx].back();
}

} // namespace

CycleFrame generate_cycle(const CellConfig& cfg, uint64_t cycle_index) {
    cfg.validate();
    CyclePlan plan = plan_cycle(cfg, cycle_index);
    CycleFrame f = build_frame(cfg, cycle_index, plan, nullptr);
    quantize_frame(f);
    finalize_scalars(f);
    return f;
}

AnomalyLabel inject_anomaly(CycleFrame& f, AnomalyKind kind, Rng& rng, const ParameterCatalog& catalog) {
    const int T = static_cast<int>(f.tick_count());
    AnomalyLabel label;
    label.cell_id = f.cell_id;
    label.cycle_index = f.cycle_index;
    label.kind = kind;

    auto bounds = [&](int p) {
        const auto& spec = catalog.at(static_cast<size_t>(p));
        double range = spec.nominal_max - spec.nominal_min;
        return std::make_pair(spec.nominal_min - 2.0 * range, spec.nominal_max + 2.0 * range);
    };
    auto row_sigma = [&](const std::vector<double>& row) {
        double mean = 0.0;
        for (double v : row) mean += v;
        mean /= static_cast<double>(row.size());
        double ss = 0.0;
        for (double v : row) ss += (v - mean) * (v - mean);
        return std::sqrt(ss / static_cast<double>(row.size()));
    };
    auto requantize = [&](int p) {
        for (auto& v : f.ticks[static_cast<size_t>(p)]) v = quantize6(v);
    };

    std::vector<int> eligible;
    for (int p = 0; p < 40; ++p) {
        bool ok = kind == AnomalyKind::correlation_break ? kTemplates[p].corr_break_ok
                                                         : kTemplates[p].dynamic;
        if (ok && p != kRegisterIdx) eligible.push_back(p);
    }

    switch (kind) {
    case AnomalyKind::spike: {
        if (eligible.empty()) raise(Errc::not_found, "no parameter available for spike");
        int p = eligible[rng.next_below(eligible.size())];
        auto& row = f.ticks[static_cast<size_t>(p)];
        double sigma = std::max(row_sigma(row), 1e-6);
        int start = T > 3 ? static_cast<int>(rng.next_below(static_cast<uint64_t>(T - 2))) : 0;
        auto [lo, hi] = bounds(p);
        // shift toward the side with more headroom
        double peak = *std::max_element(row.begin(), row.end());
        double trough = *std::min_element(row.begin(), row.end());
        double sign = (hi - peak >= trough - lo) ? 1.0 : -1.0;
        for (int t = start; t < std::min(start + 3, T); ++t) {
            auto& v = row[static_cast<size_t>(t)];
            v = std::clamp(v + sign * 8.0 * sigma, lo, hi);
        }
        requantize(p);
        label.affected_params = {catalog.at(static_cast<size_t>(p)).canonical_id};
        break;
    }
    case AnomalyKind::drift: {
        if (eligible.empty()) raise(Errc::not_found, "no parameter available for drift");
        int p = eligible[rng.next_below(eligible.size())];
        auto& row = f.ticks[static_cast<size_t>(p)];
        double sigma = std::max(row_sigma(row), 1e-6);
        auto [lo, hi] = bounds(p);
        double peak = *std::max_element(row.begin(), row.end());
        double trough = *std::min_element(row.begin(), row.end());
        double sign = (hi - peak >= trough - lo) ? 1.0 : -1.0;
        for (int t = 0; t < T; ++t) {
            auto& v = row[static_cast<size_t>(t)];
            v = std::clamp(v + sign * 4.0 * sigma * static_cast<double>(t) / static_cast<double>(T - 1),
                           lo, hi);
        }
        requantize(p);
        label.affected_params = {catalog.at(static_cast<size_t>(p)).canonical_id};
        break;
    }
    case AnomalyKind::stuck_sensor: {
        if (eligible.empty()) raise(Errc::not_found, "no parameter available for stuck_sensor");
        int p = eligible[rng.next_below(eligible.size())];
        auto& row = f.ticks[static_cast<size_t>(p)];
        std::fill(row.begin(), row.end(), row[0]);
        label.affected_params = {catalog.at(static_cast<size_t>(p)).canonical_id};
        break;
    }
    case AnomalyKind::correlation_break: {
        if (eligible.empty()) raise(Errc::not_found, "no parameter available for correlation_break");
        int p = eligible[rng.next_below(eligible.size())];
        auto& row = f.ticks[static_cast<size_t>(p)];
        double lo_v = *std::min_element(row.begin(), row.end());
        double hi_v = *std::max_element(row.begin(), row.end());
        double mid = (lo_v + hi_v) / 2.0, amp = (hi_v - lo_v) / 2.0;
        double waves = 2.0 + static_cast<double>(rng.next_below(2));
        double phase = rng.next_double() * 6.283185307179586;
        for (int t = 0; t < T; ++t)
            row[static_cast<size_t>(t)] =
                mid + amp * std::sin(6.283185307179586 * waves * t / static_cast<double>(T) + phase);
        requantize(p);
        label.affected_params = {catalog.at(static_cast<size_t>(p)).canonical_id};
        break;
    }
    case AnomalyKind::energy_surge: {
        if (catalog.size() <= kCurrentIdx) raise(Errc::not_found, "catalog lacks energy parameters");
        auto& reg = f.ticks[kRegisterIdx];
        double base = reg[0];
        for (auto& v : reg) v = base + 1.5 * (v - base);
        for (auto& v : f.ticks[kPowerIdx]) v *= 1.5;
        for (auto& v : f.ticks[kCurrentIdx]) v *= 1.5;
        requantize(kRegisterIdx);
        requantize(kPowerIdx);
        requantize(kCurrentIdx);
        label.affected_params = {catalog.at(kRegisterIdx).canonical_id, catalog.at(kPowerIdx).canonical_id,
                                 catalog.at(kCurrentIdx).canonical_id};
        break;
    }
    }
    finalize_scalars(f);
    return label;
}

CellGenerator::CellGenerator(CellConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

void CellGenerator::advance() {
    uint64_t k = primed_ ? index_ + 1 : 0;
    CyclePlan plan;
    if (!primed_) {
        plan = plan_cycle(cfg_, 0);
    } else {
        plan.T = cycle_ticks(cfg_, k);
        plan.start_second = end_s_;
        plan.register_base = register_base_;
    }
    double reg_end = 0.0;
    frame_ = build_frame(cfg_, k, plan, &reg_end);
    register_base_ = reg_end;
    quantize_frame(frame_);

    label_.reset();
    Rng astream = anomaly_stream(cfg_, k);
    if (astream.next_double() < cfg_.anomaly_rate) {
        auto kind = static_cast<AnomalyKind>(astream.next_below(5));
        label_ = inject_anomaly(frame_, kind, astream, *cfg_.catalog);
    } else {
        finalize_scalars(frame_);
    }

    index_ = k;
    start_s_ = plan.start_second;
    end_s_ = plan.start_second + plan.T;
    primed_ = true;
}

const CycleFrame& CellGenerator::frame_covering(int64_t second) {
    if (!primed_) advance();
    while (second >= end_s_) advance();
    if (second < start_s_) raise(Errc::state, "simulator seconds must be monotone");
    return frame_;
}

std::string sim_cell_id(int i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "cell%02d", i + 1);
    return buf;
}

SimCounters run_simulation(
    const SimConfig& cfg,
    const std::function<void(const std::string& topic, const std::string& payload)>& publish,
    const std::function<void(const AnomalyLabel&)>& label_sink, const std::function<bool()>& stop) {
    if (!cfg.catalog) raise(Errc::config, "simulation needs a catalog");
    if (cfg.cells < 1) raise(Errc::config, "need at least one cell");

    std::vector<CellGenerator> gens;
    std::vector<uint64_t> labeled_through; // next cycle index to report labels for
    gens.reserve(static_cast<size_t>(cfg.cells));
    for (int i = 0; i < cfg.cells; ++i) {
        CellConfig cc;
        cc.cell_id = sim_cell_id(i);
        cc.catalog = cfg.catalog;
        cc.cycle_len_s_mean = cfg.cycle_len_s_mean;
        cc.cycle_len_s_jitter = cfg.cycle_len_s_jitter;
        cc.seed = cfg.seed;
        cc.anomaly_rate = cfg.anomaly_rate;
        cc.epoch_ms = cfg.epoch_ms;
        gens.emplace_back(std::move(cc));
    }

    std::vector<std::vector<int>> by_device(kDeviceClassCount);
    for (int d = 0; d < kDeviceClassCount; ++d)
        by_device[d] = cfg.catalog->indices_for_device(static_cast<DeviceClass>(d));

    SimCounters counters;
    std::vector<uint64_t> seen_cycle(static_cast<size_t>(cfg.cells), UINT64_MAX);
    DeviceMessage msg;
    for (int64_t s = 0; s < cfg.duration_s; ++s) {
        if (stop && stop()) break;
        for (int c = 0; c < cfg.cells; ++c) {
            auto& gen = gens[static_cast<size_t>(c)];
            const CycleFrame& frame = gen.frame_covering(s);
            if (seen_cycle[static_cast<size_t>(c)] != gen.current_index()) {
                seen_cycle[static_cast<size_t>(c)] = gen.current_index();
                if (gen.current_end_s() <= cfg.duration_s) {
                    ++counters.full_cycles;
                    if (gen.current_label()) {
                        ++counters.labels;
                        if (label_sink) label_sink(*gen.current_label());
                    }
                }
            }
            auto tick = static_cast<size_t>(s - (frame.start_ts_ms - cfg.epoch_ms) / 1000);
            msg.cell_id = frame.cell_id;
            msg.ts_ms = cfg.epoch_ms + s * 1000;
            for (int d = 0; d < kDeviceClassCount; ++d) {
                if (by_device[d].empty()) continue;
                msg.device = static_cast<DeviceClass>(d);
                msg.values.clear();
                for (int idx : by_device[d])
                    msg.values.emplace_back(cfg.catalog->at(static_cast<size_t>(idx)).source_name,
                                            frame.ticks[static_cast<size_t>(idx)][tick]);
                publish(topic_for(msg.cell_id, msg.device), payload_json(msg));
                ++counters.messages;
                counters.values += msg.values.size();
            }
        }
    }
    return counters;
}

} // namespace cw
