#include "analytics/engine.hpp"

#include <algorithm>
#include <cmath>

#include "util/error.hpp"
#include "util/numfmt.hpp"

namespace cw {

std::string AnomalyReport::to_ndjson() const {
    std::string s = "{\"cell\":\"" + cell_id + "\",\"cycle\":" + std::to_string(cycle_index) +
                    ",\"detector\":\"" + detector_name(detector) + "\",\"score\":";
    append_double(s, score);
    s += ",\"threshold\":";
    append_double(s, threshold); // NaN serializes as null
    s += ",\"flagged\":";
    s += flagged ? "true" : "false";
    s += ",\"contributors\":[";
    for (size_t i = 0; i < contributors.size(); ++i) {
        if (i) s += ',';
        s += "[\"" + contributors[i].first + "\",";
        append_double(s, contributors[i].second);
        s += ']';
    }
    s += ']';
    if (detector == Detector::energy) {
        s += ",\"observed\":";
        append_double(s, observed);
        s += ",\"forecast\":";
        append_double(s, forecast);
        s += ",\"lo\":";
        append_double(s, lo);
        s += ",\"hi\":";
        append_double(s, hi);
    }
    s += '}';
    return s;
}

AnalyticsEngine::AnalyticsEngine(AnalyticsConfig cfg) : cfg_(cfg) { cfg_.validate(); }

AnomalyReport AnalyticsEngine::make_report(const CycleFrame& f, Detector det, double score,
                                           std::vector<std::pair<std::string, double>> contributors,
                                           CellState& st) {
    AnomalyReport rep;
    rep.cell_id = f.cell_id;
    rep.cycle_index = f.cycle_index;
    rep.detector = det;
    rep.score = score;
    rep.contributors = std::move(contributors);

    auto& win = st.scores[static_cast<int>(det)];
    if (win.size() >= static_cast<size_t>(cfg_.warmup)) {
        std::vector<double> trail(win.begin(), win.end());
        rep.threshold = robust_threshold(trail, cfg_.k_mad, cfg_.sigma_floor);
        rep.flagged = score > rep.threshold;
    }
    win.push_back(score);
    while (win.size() > kScoreWindow) win.pop_front();
    return rep;
}

std::vector<AnomalyReport> AnalyticsEngine::on_frame(const CycleFrame& frame) {
    std::vector<AnomalyReport> out;
    if (frame.stale || frame.tick_count() < 2) {
        ++frames_skipped_;
        return out;
    }
    ++frames_seen_;
    CellState& st = cells_[frame.cell_id];
    const auto& params = *frame.params;
    const size_t W = static_cast<size_t>(cfg_.window);

    ResampledFrame rf = resample_frame(frame, cfg_.resample_len);

    // correlation-matrix deviation
    CorrMatrix cur = pearson_matrix(rf);
    if (st.corrs.size() >= 2) {
        std::vector<const CorrMatrix*> hist;
        for (const auto& m : st.corrs) hist.push_back(&m);
        CorrMatrix ref = corr_reference(hist);
        try {
            Deviation dev = corr_deviation(cur, ref, params, cfg_.top_k);
            out.push_back(make_report(frame, Detector::corr, dev.score, std::move(dev.contributors), st));
        } catch (const Error& e) {
            if (e.code() != Errc::degenerate) throw; // no jointly defined entries: skip this cycle
        }
    }
    st.corrs.push_back(std::move(cur));
    while (st.corrs.size() > W) st.corrs.pop_front();

    if (st.frames.size() == W) {
        std::vector<const ResampledFrame*> hist;
        for (const auto& h : st.frames) hist.push_back(&h);
        Standardizer stats = make_standardizer(hist, cfg_.sigma_floor);

        // trailing-window cycle-vector similarity
        std::vector<double> vec = cycle_vector(rf, stats);
        if (st.vectors.size() == W) {
            std::vector<const std::vector<double>*> vhist;
            for (const auto& v : st.vectors) vhist.push_back(&v);
            TrailingSimilarity ts = trailing_similarity(vec, vhist, cfg_.sigma_floor);

            // contributors: per-param distance from the history mean block
            const size_t L = static_cast<size_t>(cfg_.resample_len);
            std::vector<std::pair<double, size_t>> norms;
            for (size_t p = 0; p < params.size(); ++p) {
                double ss = 0.0;
                for (size_t t = 0; t < L; ++t) {
                    double mean_h = 0.0;
                    for (const auto* h : vhist) mean_h += (*h)[p * L + t];
                    mean_h /= static_cast<double>(vhist.size());
                    double d = vec[p * L + t] - mean_h;
                    ss += d * d;
                }
                norms.push_back({std::sqrt(ss), p});
            }
            size_t keep = std::min<size_t>(static_cast<size_t>(cfg_.top_k), norms.size());
            std::partial_sort(norms.begin(), norms.begin() + static_cast<long>(keep), norms.end(),
                              [](const auto& a, const auto& b) {
                                  if (a.first != b.first) return a.first > b.first;
                                  return a.second < b.second;
                              });
            std::vector<std::pair<std::string, double>> contributors;
            for (size_t k = 0; k < keep; ++k)
                contributors.emplace_back(params[norms[k].second], norms[k].first);
            out.push_back(
                make_report(frame, Detector::cosine_window, ts.score, std::move(contributors), st));
        }
        st.vectors.push_back(std::move(vec));
        while (st.vectors.size() > W) st.vectors.pop_front();

        // per-cycle cosine matrix deviation
        std::vector<double> mat = cosine_matrix(rf, stats, cfg_.sigma_floor);
        if (st.cosmats.size() >= 2) {
            std::vector<double> ref(mat.size(), 0.0);
            for (const auto& m : st.cosmats)
                for (size_t i = 0; i < ref.size(); ++i) ref[i] += m[i];
            for (auto& v : ref) v /= static_cast<double>(st.cosmats.size());
            double score = cosmat_deviation(mat, ref, cfg_.resample_len);
            out.push_back(make_report(frame, Detector::cosine_matrix, score, {}, st));
        }
        st.cosmats.push_back(std::move(mat));
        while (st.cosmats.size() > W) st.cosmats.pop_front();
    }

    st.frames.push_back(std::move(rf));
    while (st.frames.size() > W) st.frames.pop_front();

    // energy forecast
    {
        ForecastStep fs = forecast_step(st.energy, frame.energy_kwh, cfg_);
        AnomalyReport rep;
        rep.cell_id = frame.cell_id;
        rep.cycle_index = frame.cycle_index;
        rep.detector = Detector::energy;
        rep.observed = frame.energy_kwh;
        rep.forecast = fs.forecast;
        rep.lo = fs.lo;
        rep.hi = fs.hi;
        rep.score = std::fabs(frame.energy_kwh - fs.forecast);
        // threshold is the interval half-width once flagging is live
        if (st.energy.n_seen > static_cast<uint64_t>(cfg_.warmup) + 1) rep.threshold = fs.hi - fs.forecast;
        rep.flagged = fs.flagged;
        rep.contributors.emplace_back("energy_kwh", frame.energy_kwh - fs.forecast);
        out.push_back(std::move(rep));
    }
    return out;
}

} // namespace cw
