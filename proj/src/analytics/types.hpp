#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace cw {

struct AnalyticsConfig {
    int window = 10;          // W: trailing cycles for references and history
    int resample_len = 64;    // L: fixed grid length
    double k_mad = 5.0;       // threshold = median + k_mad * MAD
    int warmup = 20;          // scores required before flagging
    double z = 3.0;           // forecast interval half-width in sigmas
    double alpha = 0.2;       // forecast level smoothing
    double lambda = 0.1;      // forecast residual-variance smoothing
    double sigma_floor = 1e-9;
    int top_k = 5;

    void validate() const;
};

enum class Detector : uint8_t { corr = 0, cosine_window = 1, cosine_matrix = 2, energy = 3 };
const char* detector_name(Detector d);

// P x P Pearson matrix; mask is false exactly where either column had zero
// variance (r stored as 0 there).
struct CorrMatrix {
    int P = 0;
    std::vector<double> r;       // row-major
    std::vector<uint8_t> mask;   // 1 = defined

    double& at(int i, int j) { return r[static_cast<size_t>(i) * P + j]; }
    double at(int i, int j) const { return r[static_cast<size_t>(i) * P + j]; }
    bool defined(int i, int j) const { return mask[static_cast<size_t>(i) * P + j] != 0; }
};

struct AnomalyReport {
    std::string cell_id;
    uint64_t cycle_index = 0;
    Detector detector = Detector::corr;
    double score = 0.0;
    double threshold = std::numeric_limits<double>::quiet_NaN(); // NaN until warmed up
    bool flagged = false;
    std::vector<std::pair<std::string, double>> contributors; // descending, <= top_k

    // energy detector extras (NaN elsewhere)
    double observed = std::numeric_limits<double>::quiet_NaN();
    double forecast = std::numeric_limits<double>::quiet_NaN();
    double lo = std::numeric_limits<double>::quiet_NaN();
    double hi = std::numeric_limits<double>::quiet_NaN();

    std::string to_ndjson() const;
};

struct ForecastState {
    double level = 0.0;
    double resid_var = 0.0;
    uint64_t n_seen = 0;
};

struct ForecastStep {
    double forecast = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    bool flagged = false;
};

} // namespace cw
