#include "analytics/detectors.hpp"

#include <algorithm>

#include "util/error.hpp"
#include "util/numfmt.hpp"

namespace cw {

void AnalyticsConfig::validate() const {
    if (window < 2) raise(Errc::config, "analytics window must be >= 2");
    if (resample_len < 2) raise(Errc::config, "resample length must be >= 2");
    if (warmup < window) raise(Errc::config, "warmup must be >= window");
    if (!(alpha > 0.0 && alpha < 1.0)) raise(Errc::config, "alpha must be in (0,1)");
    if (!(lambda > 0.0 && lambda < 1.0)) raise(Errc::config, "lambda must be in (0,1)");
    if (!(sigma_floor > 0.0)) raise(Errc::config, "sigma_floor must be positive");
    if (top_k < 0) raise(Errc::config, "top_k must be >= 0");
}

const char* detector_name(Detector d) {
    switch (d) {
    case Detector::corr: return "corr";
    case Detector::cosine_window: return "cosine_window";
    case Detector::cosine_matrix: return "cosine_matrix";
    case Detector::energy: return "energy";
    }
    return "?";
}

Standardizer make_standardizer(std::span<const ResampledFrame* const> history, double sigma_floor) {
    if (history.empty()) raise(Errc::not_warmed_up, "no history for standardizer");
    const size_t P = history[0]->grid.size();
    const size_t L = history[0]->grid[0].size();
    Standardizer st;
    st.mean.assign(P, 0.0);
    st.std_dev.assign(P, 0.0);
    const double n = static_cast<double>(history.size() * L);
    for (size_t p = 0; p < P; ++p) {
        double sum = 0.0;
        for (const auto* f : history)
            for (double v : f->grid[p]) sum += v;
        const double mean = sum / n;
        double ss = 0.0;
        for (const auto* f : history)
            for (double v : f->grid[p]) ss += (v - mean) * (v - mean);
        st.mean[p] = mean;
        st.std_dev[p] = std::max(std::sqrt(ss / n), sigma_floor);
    }
    return st;
}

CorrMatrix pearson_matrix(const ResampledFrame& f) {
    const int P = static_cast<int>(f.grid.size());
    const int L = P > 0 ? static_cast<int>(f.grid[0].size()) : 0;
    if (L < 2) raise(Errc::degenerate, "pearson_matrix needs L >= 2");

    std::vector<double> mean(P), sd(P);
    std::vector<bool> flat(P);
    for (int p = 0; p < P; ++p) {
        double s = 0.0, lo = f.grid[p][0], hi = f.grid[p][0];
        for (double v : f.grid[p]) {
            s += v;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        mean[p] = s / L;
        double ss = 0.0;
        for (double v : f.grid[p]) ss += (v - mean[p]) * (v - mean[p]);
        flat[p] = lo == hi; // zero variance, robustly detected
        sd[p] = std::sqrt(ss / L);
    }

    CorrMatrix m;
    m.P = P;
    m.r.assign(static_cast<size_t>(P) * P, 0.0);
    m.mask.assign(static_cast<size_t>(P) * P, 0);
    for (int i = 0; i < P; ++i) {
        if (flat[i]) continue;
        m.at(i, i) = 1.0;
        m.mask[static_cast<size_t>(i) * P + i] = 1;
        for (int j = i + 1; j < P; ++j) {
            if (flat[j]) continue;
            double cov = 0.0;
            for (int t = 0; t < L; ++t) cov += (f.grid[i][t] - mean[i]) * (f.grid[j][t] - mean[j]);
            cov /= L;
            double r = cov / (sd[i] * sd[j]);
            r = std::clamp(r, -1.0, 1.0);
            m.at(i, j) = m.at(j, i) = r;
            m.mask[static_cast<size_t>(i) * P + j] = m.mask[static_cast<size_t>(j) * P + i] = 1;
        }
    }
    return m;
}

CorrMatrix corr_reference(std::span<const CorrMatrix* const> history) {
    if (history.size() < 2) raise(Errc::not_warmed_up, "corr_reference needs at least 2 matrices");
    const int P = history[0]->P;
    CorrMatrix out;
    out.P = P;
    out.r.assign(static_cast<size_t>(P) * P, 0.0);
    out.mask.assign(static_cast<size_t>(P) * P, 0);
    const size_t need = (history.size() + 1) / 2; // defined in at least half
    for (size_t idx = 0; idx < out.r.size(); ++idx) {
        size_t count = 0;
        double sum = 0.0;
        for (const auto* m : history) {
            if (m->mask[idx]) {
                ++count;
                sum += m->r[idx];
            }
        }
        if (count >= need) {
            out.r[idx] = sum / static_cast<double>(count);
            out.mask[idx] = 1;
        }
    }
    return out;
}

Deviation corr_deviation(const CorrMatrix& current, const CorrMatrix& reference,
                         const std::vector<std::string>& params, int top_k) {
    if (current.P != reference.P) raise(Errc::invalid_argument, "matrix size mismatch");
    const int P = current.P;
    double sum_sq = 0.0;
    size_t count = 0;
    std::vector<std::pair<double, std::pair<int, int>>> diffs;
    for (int i = 0; i < P; ++i) {
        for (int j = i + 1; j < P; ++j) {
            if (!reference.defined(i, j)) continue;
            double d;
            if (current.defined(i, j)) {
                d = current.at(i, j) - reference.at(i, j);
            } else {
                // parameter went flat: treat the lost correlation itself as
                // the deviation
                d = std::fabs(reference.at(i, j));
            }
            sum_sq += d * d;
            ++count;
            diffs.push_back({std::fabs(d), {i, j}});
        }
    }
    if (count == 0) raise(Errc::degenerate, "no jointly defined correlation entries");

    Deviation dev;
    dev.score = std::sqrt(sum_sq / static_cast<double>(count));
    size_t keep = std::min<size_t>(static_cast<size_t>(top_k), diffs.size());
    std::partial_sort(diffs.begin(), diffs.begin() + static_cast<long>(keep), diffs.end(),
                      [](const auto& a, const auto& b) {
                          if (a.first != b.first) return a.first > b.first;
                          return a.second < b.second;
                      });
    for (size_t k = 0; k < keep; ++k) {
        const auto& [d, pair] = diffs[k];
        dev.contributors.emplace_back(params[pair.first] + "|" + params[pair.second], d);
    }
    return dev;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b, double sigma_floor) {
    if (a.size() != b.size()) raise(Errc::invalid_argument, "cosine_similarity length mismatch");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    na = std::sqrt(na);
    nb = std::sqrt(nb);
    if (na < sigma_floor || nb < sigma_floor) return 0.0; // degenerate
    return dot / (na * nb);
}

std::vector<double> cycle_vector(const ResampledFrame& f, const Standardizer& st) {
    const size_t P = f.grid.size();
    if (st.mean.size() != P) raise(Errc::invalid_argument, "standardizer size mismatch");
    const size_t L = f.grid.empty() ? 0 : f.grid[0].size();
    std::vector<double> v;
    v.reserve(P * L);
    for (size_t p = 0; p < P; ++p)
        for (double x : f.grid[p]) v.push_back((x - st.mean[p]) / st.std_dev[p]);
    return v;
}

TrailingSimilarity trailing_similarity(std::span<const double> current,
                                       std::span<const std::vector<double>* const> history,
                                       double sigma_floor) {
    if (history.empty()) raise(Errc::not_warmed_up, "no history vectors");
    TrailingSimilarity out;
    double sum = 0.0;
    for (const auto* h : history) {
        double s = cosine_similarity(current, *h, sigma_floor);
        out.neighbor_sims.push_back(s);
        sum += s;
    }
    out.score = 1.0 - sum / static_cast<double>(history.size());
    return out;
}

std::vector<double> cosine_matrix(const ResampledFrame& f, const Standardizer& st, double sigma_floor) {
    const int P = static_cast<int>(f.grid.size());
    if (P < 2) raise(Errc::degenerate, "cosine_matrix needs P >= 2");
    const int L = static_cast<int>(f.grid[0].size());

    // Column t is the standardized P-vector of second t.
    std::vector<double> cols(static_cast<size_t>(L) * P);
    for (int p = 0; p < P; ++p)
        for (int t = 0; t < L; ++t)
            cols[static_cast<size_t>(t) * P + p] = (f.grid[p][t] - st.mean[p]) / st.std_dev[p];

    std::vector<double> norms(L);
    for (int t = 0; t < L; ++t) {
        double n = 0.0;
        for (int p = 0; p < P; ++p) {
            double v = cols[static_cast<size_t>(t) * P + p];
            n += v * v;
        }
        norms[t] = std::sqrt(n);
    }

    std::vector<double> m(static_cast<size_t>(L) * L, 0.0);
    for (int s = 0; s < L; ++s) {
        if (norms[s] < sigma_floor) continue; // degenerate column: row stays 0
        m[static_cast<size_t>(s) * L + s] = 1.0;
        for (int t = s + 1; t < L; ++t) {
            if (norms[t] < sigma_floor) continue;
            double dot = 0.0;
            for (int p = 0; p < P; ++p)
                dot += cols[static_cast<size_t>(s) * P + p] * cols[static_cast<size_t>(t) * P + p];
            double v = dot / (norms[s] * norms[t]);
            m[static_cast<size_t>(s) * L + t] = m[static_cast<size_t>(t) * L + s] = v;
        }
    }
    return m;
}

double cosmat_deviation(std::span<const double> m, std::span<const double> ref, int L) {
    if (m.size() != ref.size() || m.size() != static_cast<size_t>(L) * L)
        raise(Errc::invalid_argument, "cosine matrix size mismatch");
    double sum = 0.0;
    size_t count = 0;
    for (int s = 0; s < L; ++s) {
        for (int t = s + 1; t < L; ++t) {
            sum += std::fabs(m[static_cast<size_t>(s) * L + t] - ref[static_cast<size_t>(s) * L + t]);
            ++count;
        }
    }
    return count ? sum / static_cast<double>(count) : 0.0;
}

namespace {

double median_of(std::vector<double> v) {
    size_t n = v.size();
    auto mid = v.begin() + static_cast<long>(n / 2);
    std::nth_element(v.begin(), mid, v.end());
    double hi = *mid;
    if (n % 2 == 1) return hi;
    std::nth_element(v.begin(), mid - 1, mid);
    return (*(mid - 1) + hi) / 2.0;
}

} // namespace

double robust_threshold(std::span<const double> trailing_scores, double k_mad, double sigma_floor) {
    if (trailing_scores.empty()) raise(Errc::not_warmed_up, "no trailing scores");
    std::vector<double> v(trailing_scores.begin(), trailing_scores.end());
    double med = median_of(v);
    for (auto& x : v) x = std::fabs(x - med);
    double mad = median_of(std::move(v));
    return med + k_mad * std::max(mad, sigma_floor);
}

ForecastStep forecast_step(ForecastState& st, double observed, const AnalyticsConfig& cfg) {
    if (!std::isfinite(observed)) raise(Errc::invalid_argument, "non-finite energy observation");
    ForecastStep out;
    if (st.n_seen == 0) {
        st.level = observed;
        st.resid_var = 0.0;
        st.n_seen = 1;
        out.forecast = observed;
        out.lo = out.hi = observed;
        out.flagged = false;
        return out;
    }
    out.forecast = st.level;
    const double resid = observed - out.forecast;
    const double band = cfg.z * std::max(std::sqrt(st.resid_var), cfg.sigma_floor);
    out.lo = out.forecast - band;
    out.hi = out.forecast + band;
    out.flagged = (observed < out.lo || observed > out.hi) && st.n_seen > static_cast<uint64_t>(cfg.warmup);
    st.level += cfg.alpha * resid;
    st.resid_var = (1.0 - cfg.lambda) * st.resid_var + cfg.lambda * resid * resid;
    ++st.n_seen;
    return out;
}

} // namespace cw
