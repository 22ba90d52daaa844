#include "pipeline/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include "util/error.hpp"
#include "util/numfmt.hpp"

namespace cw {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

int64_t parse_int(const std::string& key, const std::string& v) {
    try {
        size_t idx = 0;
        int64_t n = std::stoll(v, &idx);
        if (idx != v.size()) throw std::invalid_argument(v);
        return n;
    } catch (const std::exception&) {
        raise(Errc::config, "bad integer for " + key + ": '" + v + "'");
    }
}

uint64_t parse_uint(const std::string& key, const std::string& v) {
    try {
        size_t idx = 0;
        uint64_t n = std::stoull(v, &idx);
        if (idx != v.size()) throw std::invalid_argument(v);
        return n;
    } catch (const std::exception&) {
        raise(Errc::config, "bad unsigned integer for " + key + ": '" + v + "'");
    }
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        size_t idx = 0;
        double d = std::stod(v, &idx);
        if (idx != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        raise(Errc::config, "bad number for " + key + ": '" + v + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    raise(Errc::config, "bad boolean for " + key + ": '" + v + "'");
}

} // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
    if (key == "broker.host") broker_host = value;
    else if (key == "broker.port") broker_port = static_cast<int>(parse_int(key, value));
    else if (key == "data.root") data_root = value;
    else if (key == "log.root") log_root = value;
    else if (key == "store.path") store_path = value;
    else if (key == "reports.path") reports_path = value;
    else if (key == "labels.path") labels_path = value;
    else if (key == "manifest.path") manifest_path = value;
    else if (key == "quarantine.path") quarantine_path = value;
    else if (key == "catalog.path") catalog_path = value;
    else if (key == "sim.cells") cells = static_cast<int>(parse_int(key, value));
    else if (key == "sim.seed") seed = parse_uint(key, value);
    else if (key == "sim.anomaly_rate") anomaly_rate = parse_double(key, value);
    else if (key == "sim.duration_s") duration_s = parse_int(key, value);
    else if (key == "sim.cycle_len_mean_s") cycle_len_mean_s = parse_double(key, value);
    else if (key == "sim.cycle_len_jitter_s") cycle_len_jitter_s = parse_double(key, value);
    else if (key == "sim.realtime") realtime = parse_bool(key, value);
    else if (key == "sim.epoch_ms") epoch_ms = parse_int(key, value);
    else if (key == "analytics.window") analytics.window = static_cast<int>(parse_int(key, value));
    else if (key == "analytics.resample_len") analytics.resample_len = static_cast<int>(parse_int(key, value));
    else if (key == "analytics.k_mad") analytics.k_mad = parse_double(key, value);
    else if (key == "analytics.warmup") analytics.warmup = static_cast<int>(parse_int(key, value));
    else if (key == "analytics.z") analytics.z = parse_double(key, value);
    else if (key == "analytics.alpha") analytics.alpha = parse_double(key, value);
    else if (key == "analytics.lambda") analytics.lambda = parse_double(key, value);
    else if (key == "analytics.sigma_floor") analytics.sigma_floor = parse_double(key, value);
    else if (key == "analytics.top_k") analytics.top_k = static_cast<int>(parse_int(key, value));
    else if (key == "store.batch") store_batch = static_cast<int>(parse_int(key, value));
    else raise(Errc::config, "unknown config key: " + key);
}

void RunConfig::load_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) raise(Errc::config, "cannot open config file: " + path);
    std::string line;
    int line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        size_t eq = t.find('=');
        if (eq == std::string::npos)
            raise(Errc::config, path + ":" + std::to_string(line_no) + ": expected key = value");
        set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
}

void RunConfig::finalize() {
    if (data_root.empty()) {
        const char* env = std::getenv("CYCLEWATCH_ROOT");
        data_root = env && *env ? env : "./cyclewatch-data";
    }
    if (log_root.empty()) log_root = data_root + "/log";
    if (store_path.empty()) store_path = data_root + "/store.ccf";
    if (reports_path.empty()) reports_path = data_root + "/reports.ndjson";
    if (labels_path.empty()) labels_path = data_root + "/labels.ndjson";
    if (manifest_path.empty()) manifest_path = data_root + "/manifest.json";
    if (quarantine_path.empty()) quarantine_path = data_root + "/quarantine.ndjson";

    if (cells < 1) raise(Errc::config, "sim.cells must be >= 1");
    if (duration_s < 1) raise(Errc::config, "sim.duration_s must be >= 1");
    if (broker_port < 0 || broker_port > 65535) raise(Errc::config, "broker.port out of range");
    if (store_batch < 1 || store_batch > 256) raise(Errc::config, "store.batch must be in [1, 256]");
    analytics.validate();

    std::set<std::string> paths{log_root, store_path, reports_path, labels_path, manifest_path,
                                quarantine_path};
    if (paths.size() != 6) raise(Errc::config, "data paths must be distinct");
}

std::vector<std::pair<std::string, std::string>> RunConfig::items() const {
    auto d = [](double v) { return format_double(v); };
    return {
        {"broker.host", broker_host},
        {"broker.port", std::to_string(broker_port)},
        {"data.root", data_root},
        {"log.root", log_root},
        {"store.path", store_path},
        {"reports.path", reports_path},
        {"labels.path", labels_path},
        {"manifest.path", manifest_path},
        {"quarantine.path", quarantine_path},
        {"catalog.path", catalog_path},
        {"sim.cells", std::to_string(cells)},
        {"sim.seed", std::to_string(seed)},
        {"sim.anomaly_rate", d(anomaly_rate)},
        {"sim.duration_s", std::to_string(duration_s)},
        {"sim.cycle_len_mean_s", d(cycle_len_mean_s)},
        {"sim.cycle_len_jitter_s", d(cycle_len_jitter_s)},
        {"sim.realtime", realtime ? "true" : "false"},
        {"sim.epoch_ms", std::to_string(epoch_ms)},
        {"analytics.window", std::to_string(analytics.window)},
        {"analytics.resample_len", std::to_string(analytics.resample_len)},
        {"analytics.k_mad", d(analytics.k_mad)},
        {"analytics.warmup", std::to_string(analytics.warmup)},
        {"analytics.z", d(analytics.z)},
        {"analytics.alpha", d(analytics.alpha)},
        {"analytics.lambda", d(analytics.lambda)},
        {"analytics.sigma_floor", d(analytics.sigma_floor)},
        {"analytics.top_k", std::to_string(analytics.top_k)},
        {"store.batch", std::to_string(store_batch)},
    };
}

} // namespace cw
