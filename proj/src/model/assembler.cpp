#include "model/assembler.hpp"

#include <cmath>

#include "util/error.hpp"

namespace cw {

CycleAssembler::CycleAssembler(const ParameterCatalog& catalog, Options opt, FrameSink sink)
    : catalog_(catalog), opt_(std::move(opt)), sink_(std::move(sink)), params_(param_names(catalog)) {
    boundary_idx_ = catalog_.index_of(opt_.boundary_param);
    if (boundary_idx_ < 0)
        raise(Errc::config, "boundary parameter not in catalog: " + opt_.boundary_param);
    if (catalog_.at(boundary_idx_).dtype != Dtype::boolean)
        raise(Errc::config, "boundary parameter must be bool-typed: " + opt_.boundary_param);
    energy_idx_ = catalog_.index_of(opt_.energy_param);
    mass_idx_ = catalog_.index_of(opt_.mass_param);
}

CycleAssembler::CellState& CycleAssembler::cell(const std::string& id) {
    auto [it, inserted] = cells_.try_emplace(id);
    if (inserted) {
        it->second.obs.resize(catalog_.size());
        it->second.last_known.assign(catalog_.size(), 0.0);
        it->second.has_last_known.assign(catalog_.size(), false);
    }
    return it->second;
}

void CycleAssembler::open_cycle(CellState& st, int64_t ts) {
    st.open = true;
    st.start_ts = ts;
    st.last_obs_ts = ts;
}

void CycleAssembler::close_cycle(const std::string& cell_id, CellState& st, int64_t end_ts, bool stale) {
    st.open = false;
    bool any_obs = false;
    for (const auto& o : st.obs)
        if (!o.empty()) {
            any_obs = true;
            break;
        }
    const int64_t span = end_ts - st.start_ts;
    const int T = static_cast<int>(std::llround(static_cast<double>(span) / 1000.0));
    if (!any_obs || T < 1) {
        ++counters_.empty_cycles;
        for (auto& o : st.obs) o.clear();
        return;
    }

    CycleFrame f;
    f.cell_id = cell_id;
    f.cycle_index = st.next_cycle_index++;
    f.start_ts_ms = st.start_ts;
    f.end_ts_ms = end_ts;
    f.params = params_;
    f.stale = stale;
    f.ticks.resize(catalog_.size());
    for (size_t p = 0; p < catalog_.size(); ++p) {
        auto& row = f.ticks[p];
        row.resize(static_cast<size_t>(T));
        const auto& obs = st.obs[p];
        if (obs.empty()) {
            double v = st.has_last_known[p] ? st.last_known[p] : 0.0;
            for (auto& x : row) x = v;
            continue;
        }
        double cur = obs[0].second; // leading gap: first observed value
        size_t oi = 0;
        for (int k = 0; k < T; ++k) {
            int64_t tick = st.start_ts + 1000LL * k;
            while (oi < obs.size() && obs[oi].first <= tick) cur = obs[oi++].second;
            row[static_cast<size_t>(k)] = cur;
        }
    }
    if (energy_idx_ >= 0 && !st.obs[energy_idx_].empty()) {
        const auto& eo = st.obs[energy_idx_];
        f.energy_kwh = eo.back().second - eo.front().second;
    }
    if (mass_idx_ >= 0 && !st.obs[mass_idx_].empty()) f.part_mass_g = st.obs[mass_idx_].back().second;

    for (auto& o : st.obs) o.clear();
    ++counters_.frames;
    if (stale) ++counters_.stale_frames;
    sink_(std::move(f));
}

void CycleAssembler::on_message(const std::string& cell_id, DeviceClass device, int64_t ts_ms,
                                std::span<const std::pair<int, double>> values) {
    CellState& st = cell(cell_id);

    auto hw = st.high_water.find(device);
    if (hw != st.high_water.end() && ts_ms <= hw->second) {
        ++counters_.deduped_messages;
        return;
    }
    st.high_water[device] = ts_ms;

    // Stale close happens before edge handling so a very late edge still
    // starts a fresh cycle.
    if (st.open && ts_ms - st.start_ts > opt_.stale_timeout_ms)
        close_cycle(cell_id, st, st.last_obs_ts + 1000, /*stale=*/true);

    // The boundary flag is inspected first: samples in the edge message
    // belong to the cycle that starts at this second.
    for (const auto& [idx, value] : values) {
        if (idx != boundary_idx_) continue;
        bool rising = st.boundary_seen && st.prev_boundary < 0.5 && value >= 0.5;
        if (!st.boundary_seen && value >= 0.5) rising = true; // first ever sample already high
        st.prev_boundary = value;
        st.boundary_seen = true;
        if (rising) {
            if (st.open) close_cycle(cell_id, st, ts_ms, /*stale=*/false);
            open_cycle(st, ts_ms);
        }
    }

    if (!st.open) {
        counters_.unassigned_samples += values.size();
        for (const auto& [idx, value] : values) {
            if (idx < 0 || static_cast<size_t>(idx) >= catalog_.size()) continue;
            st.last_known[idx] = value;
            st.has_last_known[idx] = true;
        }
        return;
    }

    for (const auto& [idx, value] : values) {
        if (idx < 0 || static_cast<size_t>(idx) >= catalog_.size()) continue;
        st.obs[idx].emplace_back(ts_ms, value);
        st.last_known[idx] = value;
        st.has_last_known[idx] = true;
    }
    if (ts_ms > st.last_obs_ts) st.last_obs_ts = ts_ms;
}

void CycleAssembler::flush() {
    for (auto& [cell_id, st] : cells_) {
        if (st.open) close_cycle(cell_id, st, st.last_obs_ts + 1000, /*stale=*/true);
    }
}

} // namespace cw
