#include "model/frame.hpp"

#include "util/error.hpp"

namespace cw {

std::shared_ptr<const std::vector<std::string>> param_names(const ParameterCatalog& cat) {
    auto v = std::make_shared<std::vector<std::string>>();
    v->reserve(cat.size());
    for (const auto& p : cat.params()) v->push_back(p.canonical_id);
    return v;
}

std::vector<double> resample_row(const std::vector<double>& row, int L) {
    const int T = static_cast<int>(row.size());
    if (T < 2) raise(Errc::degenerate, "cycle too short to resample (T < 2)");
    if (L < 2) raise(Errc::degenerate, "resample length must be >= 2");
    if (L == T) return row;
    std::vector<double> out(static_cast<size_t>(L));
    const double step = static_cast<double>(T - 1) / static_cast<double>(L - 1);
    for (int j = 0; j < L; ++j) {
        double pos = step * j;
        int i = static_cast<int>(pos);
        if (i >= T - 1) {
            out[j] = row[T - 1];
            continue;
        }
        double frac = pos - i;
        out[j] = row[i] + (row[i + 1] - row[i]) * frac;
    }
    out[0] = row[0];
    out[L - 1] = row[T - 1];
    return out;
}

ResampledFrame resample_frame(const CycleFrame& f, int L) {
    ResampledFrame out;
    out.cell_id = f.cell_id;
    out.cycle_index = f.cycle_index;
    out.params = f.params;
    out.grid.reserve(f.ticks.size());
    for (const auto& row : f.ticks) out.grid.push_back(resample_row(row, L));
    return out;
}

} // namespace cw
