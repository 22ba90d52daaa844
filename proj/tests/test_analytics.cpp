#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "analytics/detectors.hpp"
#include "analytics/engine.hpp"
#include "util/error.hpp"
#include "test_util.hpp"

using namespace cw;

namespace {

ResampledFrame make_rf(std::vector<std::vector<double>> grid) {
    ResampledFrame rf;
    rf.cell_id = "c1";
    rf.cycle_index = 0;
    std::vector<std::string> names;
    for (size_t i = 0; i < grid.size(); ++i) names.push_back("p" + std::to_string(i));
    rf.params = test::make_params(names);
    rf.grid = std::move(grid);
    return rf;
}

ResampledFrame random_rf(std::mt19937_64& rng, int P, int L) {
    std::uniform_real_distribution<double> dist(-10.0, 10.0);
    std::vector<std::vector<double>> grid(static_cast<size_t>(P));
    for (auto& row : grid) {
        row.resize(static_cast<size_t>(L));
        for (auto& v : row) v = dist(rng);
    }
    return make_rf(std::move(grid));
}

// Naive two-pass Pearson oracle, independent of the implementation path.
double naive_pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const size_t n = x.size();
    double mx = 0, my = 0;
    for (size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0, sxx = 0, syy = 0;
    for (size_t i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return (sxy / static_cast<double>(n)) /
           (std::sqrt(sxx / static_cast<double>(n)) * std::sqrt(syy / static_cast<double>(n)));
}

double naive_cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0, na = 0, nb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

} // namespace

TEST_CASE("pearson: perfect linear relation gives +1, reversal gives -1") {
    ResampledFrame rf = make_rf({{1, 2, 3, 4}, {2, 4, 6, 8}});
    CorrMatrix m = pearson_matrix(rf);
    CHECK(m.at(0, 1) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(m.at(0, 0) == 1.0);

    ResampledFrame neg = make_rf({{1, 2, 3}, {3, 2, 1}});
    CorrMatrix mn = pearson_matrix(neg);
    CHECK(mn.at(0, 1) == doctest::Approx(-1.0).epsilon(1e-15));
}

TEST_CASE("pearson matches the naive two-pass oracle within 1e-12") {
    std::mt19937_64 rng(101);
    for (int trial = 0; trial < 30; ++trial) {
        ResampledFrame rf = random_rf(rng, 6, 32);
        CorrMatrix m = pearson_matrix(rf);
        for (int i = 0; i < 6; ++i)
            for (int j = 0; j < 6; ++j) {
                REQUIRE(m.defined(i, j));
                double expect = i == j ? 1.0 : naive_pearson(rf.grid[i], rf.grid[j]);
                CHECK(m.at(i, j) == doctest::Approx(expect).epsilon(1e-12));
                CHECK(std::fabs(m.at(i, j)) <= 1.0 + 1e-12);
                CHECK(m.at(i, j) == m.at(j, i));
            }
    }
}

TEST_CASE("pearson masks zero-variance columns instead of failing") {
    ResampledFrame rf = make_rf({{5, 5, 5, 5}, {1, 2, 3, 4}});
    CorrMatrix m = pearson_matrix(rf);
    CHECK_FALSE(m.defined(0, 0));
    CHECK_FALSE(m.defined(0, 1));
    CHECK(m.defined(1, 1));
    CHECK(m.at(0, 1) == 0.0);
}

TEST_CASE("corr_reference: mean of equals, all-masked stays masked, +1/-1 averages to 0") {
    ResampledFrame a = make_rf({{1, 2, 3, 4}, {2, 4, 6, 8}});
    CorrMatrix ma = pearson_matrix(a);
    std::vector<const CorrMatrix*> hist{&ma, &ma, &ma};
    CorrMatrix ref = corr_reference(hist);
    for (size_t i = 0; i < ma.r.size(); ++i) {
        CHECK(ref.mask[i] == ma.mask[i]);
        CHECK(ref.r[i] == doctest::Approx(ma.r[i]).epsilon(1e-15));
    }

    // an entry masked everywhere stays masked
    ResampledFrame flat = make_rf({{7, 7, 7, 7}, {1, 2, 3, 4}});
    CorrMatrix mf = pearson_matrix(flat);
    std::vector<const CorrMatrix*> hist2{&mf, &mf};
    CorrMatrix ref2 = corr_reference(hist2);
    CHECK_FALSE(ref2.defined(0, 1));

    // +1 in half the history, -1 in the other half -> 0
    CorrMatrix plus = ma;
    CorrMatrix minus = ma;
    minus.at(0, 1) = minus.at(1, 0) = -1.0;
    std::vector<const CorrMatrix*> hist3{&plus, &minus, &plus, &minus};
    CorrMatrix ref3 = corr_reference(hist3);
    CHECK(ref3.at(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("corr_deviation: identity scores 0; a single 0.8 gap among 10 entries scores sqrt(0.064)") {
    // P = 5 -> 10 upper-triangle pairs
    std::mt19937_64 rng(7);
    ResampledFrame rf = random_rf(rng, 5, 16);
    CorrMatrix m = pearson_matrix(rf);
    std::vector<std::string> params = *rf.params;

    Deviation same = corr_deviation(m, m, params, 5);
    CHECK(same.score == 0.0);
    for (const auto& [name, v] : same.contributors) CHECK(v == 0.0);

    CorrMatrix ref = m;
    ref.at(1, 3) = ref.at(3, 1) = m.at(1, 3) - 0.8;
    Deviation dev = corr_deviation(m, ref, params, 5);
    CHECK(dev.score == doctest::Approx(std::sqrt(0.64 / 10.0)).epsilon(1e-12));
    REQUIRE(!dev.contributors.empty());
    CHECK(dev.contributors[0].first == "p1|p3");
    CHECK(dev.contributors[0].second == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("corr_deviation: a newly masked pair contributes |ref| at that entry") {
    ResampledFrame live = make_rf({{1, 2, 3, 4}, {2, 4, 6, 8}});
    CorrMatrix ref = pearson_matrix(live); // r = 1 everywhere defined
    ResampledFrame stuck = make_rf({{5, 5, 5, 5}, {2, 4, 6, 8}});
    CorrMatrix cur = pearson_matrix(stuck);
    Deviation dev = corr_deviation(cur, ref, *live.params, 5);
    CHECK(dev.score == doctest::Approx(1.0).epsilon(1e-12)); // sqrt(1^2 / 1)
}

TEST_CASE("corr_deviation with no jointly defined entries raises NoOverlap") {
    ResampledFrame flat = make_rf({{1, 1, 1, 1}, {2, 2, 2, 2}});
    CorrMatrix m = pearson_matrix(flat);
    CHECK_THROWS_AS((void)corr_deviation(m, m, *flat.params, 5), Error);
}

TEST_CASE("cosine_similarity basics and the odd-vector value") {
    std::vector<double> a{1, 2, 3}, b{4, 5, 6};
    CHECK(cosine_similarity(a, a, 1e-9) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(cosine_similarity({1, 0}, {0, 1}, 1e-9) == 0.0);
    CHECK(cosine_similarity(a, b, 1e-9) == doctest::Approx(0.974631846).epsilon(1e-9));
    CHECK(cosine_similarity(a, b, 1e-9) == doctest::Approx(naive_cosine(a, b)).epsilon(1e-15));
    CHECK(cosine_similarity({0, 0}, {1, 1}, 1e-9) == 0.0); // degenerate norm
    CHECK_THROWS_AS((void)cosine_similarity({1.0}, {1.0, 2.0}, 1e-9), Error);
}

TEST_CASE("cycle_vector: zero at the trailing mean, param-major layout, scale absorption") {
    ResampledFrame rf = make_rf({{1, 2, 3}, {10, 20, 30}});
    Standardizer st;
    st.mean = {2.0, 20.0};
    st.std_dev = {1.0, 10.0};

    ResampledFrame at_mean = make_rf({{2, 2, 2}, {20, 20, 20}});
    auto zero = cycle_vector(at_mean, st);
    for (double v : zero) CHECK(v == 0.0);

    auto v = cycle_vector(rf, st);
    REQUIRE(v.size() == 6);
    // layout [p0t0, p0t1, p0t2, p1t0, p1t1, p1t2]
    CHECK(v[0] == -1.0);
    CHECK(v[2] == 1.0);
    CHECK(v[3] == -1.0);
    CHECK(v[5] == 1.0);

    // doubling one parameter's std halves its block
    Standardizer st2 = st;
    st2.std_dev[1] = 20.0;
    auto v2 = cycle_vector(rf, st2);
    for (int t = 3; t < 6; ++t) CHECK(v2[t] == doctest::Approx(v[t] / 2.0));
}

TEST_CASE("trailing_similarity: identical history scores 0, orthogonal scores 1") {
    std::vector<double> cur{1, 0, 2, 0};
    std::vector<double> same = cur;
    std::vector<const std::vector<double>*> hist{&same, &same, &same};
    auto r = trailing_similarity(cur, hist, 1e-9);
    CHECK(r.score == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(r.neighbor_sims.size() == 3);

    std::vector<double> orth{0, 5, 0, -3};
    std::vector<const std::vector<double>*> hist2{&orth, &orth};
    auto r2 = trailing_similarity(cur, hist2, 1e-9);
    CHECK(r2.score == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("cosine_matrix matches a naive double loop within 1e-12 and is symmetric") {
    std::mt19937_64 rng(33);
    for (int trial = 0; trial < 20; ++trial) {
        ResampledFrame rf = random_rf(rng, 5, 8);
        Standardizer st;
        st.mean.assign(5, 0.0);
        st.std_dev.assign(5, 1.0);
        auto m = cosine_matrix(rf, st, 1e-9);
        // columns of the grid are per-second parameter vectors
        for (int s = 0; s < 8; ++s) {
            for (int t = 0; t < 8; ++t) {
                std::vector<double> cs, ct;
                for (int p = 0; p < 5; ++p) {
                    cs.push_back(rf.grid[p][s]);
                    ct.push_back(rf.grid[p][t]);
                }
                double expect = s == t ? 1.0 : naive_cosine(cs, ct);
                CHECK(m[static_cast<size_t>(s) * 8 + t] == doctest::Approx(expect).epsilon(1e-12));
                CHECK(m[static_cast<size_t>(s) * 8 + t] == m[static_cast<size_t>(t) * 8 + s]);
            }
        }
    }
}

TEST_CASE("cosine_matrix: identical ticks give all-ones") {
    ResampledFrame rf = make_rf({{3, 3, 3, 3}, {-1, -1, -1, -1}});
    Standardizer st;
    st.mean = {1.0, 1.0};
    st.std_dev = {1.0, 1.0};
    auto m = cosine_matrix(rf, st, 1e-9);
    for (double v : m) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("cosmat_deviation: identity 0; one 0.6 gap among 28 entries") {
    const int L = 8;
    std::vector<double> m(L * L, 0.5);
    for (int i = 0; i < L; ++i) m[static_cast<size_t>(i) * L + i] = 1.0;
    CHECK(cosmat_deviation(m, m, L) == 0.0);
    std::vector<double> ref = m;
    ref[0 * L + 3] -= 0.6;
    ref[3 * L + 0] -= 0.6;
    CHECK(cosmat_deviation(m, ref, L) == doctest::Approx(0.6 / 28.0).epsilon(1e-12));
}

TEST_CASE("robust_threshold: hand-computed values and permutation invariance") {
    std::vector<double> scores{1, 2, 3, 4, 5};
    CHECK(robust_threshold(scores, 5.0, 1e-9) == doctest::Approx(8.0).epsilon(1e-12));

    std::vector<double> same(10, 1.0);
    double thr = robust_threshold(same, 5.0, 1e-9);
    CHECK(thr == doctest::Approx(1.0 + 5.0 * 1e-9));
    CHECK(10.0 > thr); // a later 10.0 is flagged

    std::mt19937_64 rng(5);
    std::vector<double> v{0.5, 1.5, 0.25, 9.0, 2.0, 2.0, 0.75};
    double base = robust_threshold(v, 5.0, 1e-9);
    for (int i = 0; i < 10; ++i) {
        std::shuffle(v.begin(), v.end(), rng);
        CHECK(robust_threshold(v, 5.0, 1e-9) == base);
    }
}

TEST_CASE("forecast_step: constant series never flags, alpha=1 is last-value forecast") {
    AnalyticsConfig cfg;
    ForecastState st;
    for (int i = 0; i < 200; ++i) {
        auto out = forecast_step(st, 5.0, cfg);
        CHECK(out.forecast == 5.0);
        CHECK_FALSE(out.flagged);
    }

    AnalyticsConfig naive = cfg;
    naive.alpha = 0.999999999; // validate() requires alpha < 1
    ForecastState st2;
    std::mt19937_64 rng(9);
    double prev = 0;
    for (int i = 0; i < 50; ++i) {
        double obs = static_cast<double>(rng() % 1000) / 10.0;
        auto out = forecast_step(st2, obs, naive);
        if (i > 0) CHECK(out.forecast == doctest::Approx(prev).epsilon(1e-6));
        prev = obs;
    }
}

TEST_CASE("forecast_step: Monte-Carlo coverage near 0.3% for z=3") {
    AnalyticsConfig cfg; // z = 3
    ForecastState st;
    std::mt19937_64 rng(12345);
    std::normal_distribution<double> noise(10.0, 0.2);
    int flagged = 0;
    const int n = 10'000;
    for (int i = 0; i < n; ++i)
        if (forecast_step(st, noise(rng), cfg).flagged) ++flagged;
    double rate = 100.0 * flagged / n;
    MESSAGE("coverage flag rate: ", rate, "%");
    CHECK(rate <= 1.3);
    CHECK(rate >= 0.0);
}

TEST_CASE("forecast_step rejects non-finite observations") {
    AnalyticsConfig cfg;
    ForecastState st;
    CHECK_THROWS_AS((void)forecast_step(st, std::nan(""), cfg), Error);
}

// ---------------------------------------------------------------------------

namespace {

CycleFrame synth_frame(uint64_t index, int T, double scale1 = 1.0) {
    std::mt19937_64 rng(9000 + index);
    std::normal_distribution<double> n01(0.0, 1.0);
    std::vector<std::vector<double>> rows(4);
    for (int t = 0; t < T; ++t) {
        double phi = static_cast<double>(t) / T;
        double a = 10 + 5 * std::sin(6.28 * phi) + 0.05 * n01(rng);
        double b = -3 + 2 * std::cos(6.28 * phi) + 0.05 * n01(rng);
        double c = 100 + 30 * phi + 0.1 * n01(rng);
        double d = 7 + 0.02 * n01(rng);
        rows[0].push_back(a * scale1);
        rows[1].push_back(b);
        rows[2].push_back(c);
        rows[3].push_back(d);
    }
    CycleFrame f = test::make_frame("c1", index, std::move(rows), {"a", "b", "c", "d"});
    f.energy_kwh = 0.2 + 0.001 * std::sin(0.1 * static_cast<double>(index));
    return f;
}

} // namespace

TEST_CASE("engine: scaling a raw parameter by a positive constant leaves flags unchanged") {
    AnalyticsConfig cfg;
    cfg.resample_len = 16;
    cfg.window = 4;
    cfg.warmup = 4;

    auto run = [&](double scale) {
        AnalyticsEngine engine(cfg);
        std::vector<std::pair<uint64_t, bool>> flags;
        for (uint64_t i = 0; i < 60; ++i) {
            CycleFrame f = synth_frame(i, 24, scale);
            for (auto& r : engine.on_frame(f))
                if (r.detector != Detector::energy) flags.emplace_back(r.cycle_index, r.flagged);
        }
        return flags;
    };
    CHECK(run(1.0) == run(1000.0));
}

TEST_CASE("engine: streaming and batch replay produce identical reports") {
    AnalyticsConfig cfg;
    cfg.resample_len = 16;
    cfg.window = 4;
    cfg.warmup = 4;

    std::vector<CycleFrame> frames;
    for (uint64_t i = 0; i < 50; ++i) frames.push_back(synth_frame(i, 20 + i % 5));

    AnalyticsEngine streaming(cfg);
    std::vector<std::string> a;
    for (const auto& f : frames)
        for (auto& r : streaming.on_frame(f)) a.push_back(r.to_ndjson());

    AnalyticsEngine batch(cfg);
    std::vector<std::string> b;
    for (const auto& f : frames)
        for (auto& r : batch.on_frame(f)) b.push_back(r.to_ndjson());

    CHECK(a == b);
}

TEST_CASE("engine skips stale frames") {
    AnalyticsConfig cfg;
    cfg.resample_len = 16;
    AnalyticsEngine engine(cfg);
    CycleFrame f = synth_frame(0, 20);
    f.stale = true;
    CHECK(engine.on_frame(f).empty());
    CHECK(engine.frames_skipped() == 1);
}

TEST_CASE("report NDJSON shape: null threshold during warmup, energy extras present") {
    AnalyticsConfig cfg;
    cfg.resample_len = 16;
    AnalyticsEngine engine(cfg);
    auto reports = engine.on_frame(synth_frame(0, 20));
    REQUIRE(!reports.empty());
    std::string line = reports[0].to_ndjson();
    CHECK(line.find("\"threshold\":null") != std::string::npos);
    CHECK(line.find("\"detector\":\"energy\"") != std::string::npos);
    CHECK(line.find("\"forecast\":") != std::string::npos);
    CHECK(line.find("\"lo\":") != std::string::npos);
    CHECK(line.find("\"hi\":") != std::string::npos);
    CHECK(line.find("\"observed\":") != std::string::npos);
}
