#pragma once

#include <deque>
#include <span>

#include "analytics/types.hpp"
#include "model/frame.hpp"

namespace cw {

// Per-parameter standardization stats over a trailing window of resampled
// frames: population mean/std over all W*L samples of each param, std
// floored at sigma_floor.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> std_dev;
};

Standardizer make_standardizer(std::span<const ResampledFrame* const> history, double sigma_floor);

// Pearson correlation with population (1/L) normalization. Zero-variance
// columns are masked, not errors; the diagonal of unmasked columns is
// exactly 1.
CorrMatrix pearson_matrix(const ResampledFrame& f);

// Element-wise mean over the trailing matrices; an entry stays defined only
// where it was defined in at least half of the history.
CorrMatrix corr_reference(std::span<const CorrMatrix* const> history);

// RMS of (current - reference) over defined upper-triangle entries, plus the
// top-k contributing pairs. A pair that the reference defines but the
// current cycle masks (a parameter went flat) contributes |ref| there.
struct Deviation {
    double score = 0.0;
    std::vector<std::pair<std::string, double>> contributors;
};
Deviation corr_deviation(const CorrMatrix& current, const CorrMatrix& reference,
                         const std::vector<std::string>& params, int top_k);

double cosine_similarity(std::span<const double> a, std::span<const double> b, double sigma_floor);

// Z-scores every tick by its parameter's trailing stats, then flattens
// param-major: [p0t0, p0t1, ..., p1t0, ...].
std::vector<double> cycle_vector(const ResampledFrame& f, const Standardizer& st);

// score = 1 - mean cosine similarity against the trailing window; higher is
// more anomalous.
struct TrailingSimilarity {
    double score = 0.0;
    std::vector<double> neighbor_sims;
};
TrailingSimilarity trailing_similarity(std::span<const double> current,
                                       std::span<const std::vector<double>* const> history,
                                       double sigma_floor);

// L x L cosine matrix between per-second standardized parameter vectors
// (columns of the P x L grid). Degenerate columns yield 0 rows, including
// their diagonal entry.
std::vector<double> cosine_matrix(const ResampledFrame& f, const Standardizer& st, double sigma_floor);

// Mean |M - ref| over the strict upper triangle.
double cosmat_deviation(std::span<const double> m, std::span<const double> ref, int L);

// median + k_mad * max(MAD, sigma_floor) over the trailing scores.
double robust_threshold(std::span<const double> trailing_scores, double k_mad, double sigma_floor);

// Simple exponential smoothing with EWMA residual variance; the first
// observation initializes level = observed, resid_var = 0. Flagging is
// suppressed until the state has seen cfg.warmup observations.
ForecastStep forecast_step(ForecastState& st, double observed, const AnalyticsConfig& cfg);

} // namespace cw
