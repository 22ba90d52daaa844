#pragma once

#include <deque>
#include <map>

#include "analytics/detectors.hpp"

namespace cw {

// Streaming detector fold. Feed completed frames in per-cell cycle order;
// each frame yields up to four reports (corr, cosine_window, cosine_matrix,
// energy), fewer while references are still warming up. State is per cell,
// so interleaving cells is fine; a batch replay of the same per-cell
// sequences produces identical reports.
//
// Warm-up schedule with window W: corr scores from the 3rd cycle,
// cosine_matrix from cycle W+2, cosine_window from cycle 2W (its vectors
// need W prior frames for the standardizer, then W vectors of history).
// Flags are withheld until a detector has `warmup` trailing scores
// (threshold reported as null).
class AnalyticsEngine {
public:
    explicit AnalyticsEngine(AnalyticsConfig cfg);

    std::vector<AnomalyReport> on_frame(const CycleFrame& frame);

    uint64_t frames_seen() const { return frames_seen_; }
    uint64_t frames_skipped() const { return frames_skipped_; } // stale or degenerate

    const AnalyticsConfig& config() const { return cfg_; }

private:
    struct CellState {
        std::deque<ResampledFrame> frames;       // last W resampled frames
        std::deque<CorrMatrix> corrs;            // last W correlation matrices
        std::deque<std::vector<double>> vectors; // last W cycle vectors
        std::deque<std::vector<double>> cosmats; // last W cosine matrices
        std::deque<double> scores[3];            // trailing scores per quality detector
        ForecastState energy;
    };

    AnomalyReport make_report(const CycleFrame& f, Detector det, double score,
                              std::vector<std::pair<std::string, double>> contributors, CellState& st);

    AnalyticsConfig cfg_;
    std::map<std::string, CellState> cells_;
    uint64_t frames_seen_ = 0;
    uint64_t frames_skipped_ = 0;
};

constexpr size_t kScoreWindow = 100; // trailing scores kept for thresholding

} // namespace cw
