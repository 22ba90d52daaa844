#include "cyclewatch.h"

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <string>

#include "pipeline/config.hpp"
#include "pipeline/runner.hpp"
#include "store/cycle_store.hpp"
#include "util/error.hpp"

namespace {

thread_local std::string t_last_error;
std::atomic<bool> g_shutdown{false};

cw_status status_from(const cw::Error& e) {
    t_last_error = e.what();
    switch (e.exit_group()) {
    case 0: return CW_OK;
    case 2: return CW_ERR_CONFIG;
    case 3: return CW_ERR_NETWORK;
    case 4: return CW_ERR_STORAGE;
    case 5: return CW_ERR_CORRUPTION;
    default: return CW_ERR;
    }
}

template <typename F>
cw_status guarded(F&& fn) {
    try {
        return fn();
    } catch (const cw::Error& e) {
        return status_from(e);
    } catch (const std::exception& e) {
        t_last_error = e.what();
        return CW_ERR;
    } catch (...) {
        t_last_error = "unknown error";
        return CW_ERR;
    }
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(::malloc(s.size() + 1));
    if (out) std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

cw::RunConfig finalized(const cw_config* cfg);

} // namespace

struct cw_config {
    cw::RunConfig impl;
};

struct cw_store {
    cw::CycleStore impl;
};

namespace {

cw::RunConfig finalized(const cw_config* cfg) {
    if (!cfg) cw::raise(cw::Errc::config, "null config");
    cw::RunConfig c = cfg->impl;
    c.finalize();
    return c;
}

} // namespace

extern "C" {

const char* cw_version(void) { return "0.1.0"; }

const char* cw_last_error(void) { return t_last_error.c_str(); }

cw_config* cw_config_new(void) { return new cw_config(); }

void cw_config_free(cw_config* cfg) { delete cfg; }

cw_status cw_config_load_file(cw_config* cfg, const char* path) {
    return guarded([&]() -> cw_status {
        if (!cfg || !path) cw::raise(cw::Errc::config, "null argument");
        cfg->impl.load_file(path);
        return CW_OK;
    });
}

cw_status cw_config_set(cw_config* cfg, const char* key, const char* value) {
    return guarded([&]() -> cw_status {
        if (!cfg || !key || !value) cw::raise(cw::Errc::config, "null argument");
        cfg->impl.set(key, value);
        return CW_OK;
    });
}

cw_status cw_cmd_run(const cw_config* cfg) {
    return guarded([&]() -> cw_status {
        int rc = cw::cmd_run(finalized(cfg), g_shutdown);
        return rc == 0 ? CW_OK : static_cast<cw_status>(rc);
    });
}

cw_status cw_cmd_simulate(const cw_config* cfg) {
    return guarded([&]() -> cw_status {
        int rc = cw::cmd_simulate(finalized(cfg), g_shutdown);
        return rc == 0 ? CW_OK : static_cast<cw_status>(rc);
    });
}

cw_status cw_cmd_broker(const cw_config* cfg) {
    return guarded([&]() -> cw_status {
        int rc = cw::cmd_broker(finalized(cfg), g_shutdown);
        return rc == 0 ? CW_OK : static_cast<cw_status>(rc);
    });
}

cw_status cw_cmd_analyze(const cw_config* cfg, const char* out_path) {
    return guarded([&]() -> cw_status {
        int rc = cw::cmd_analyze(finalized(cfg), out_path ? out_path : "");
        return rc == 0 ? CW_OK : static_cast<cw_status>(rc);
    });
}

cw_status cw_cmd_stats(const cw_config* cfg, int fleet_cells, char** json_out) {
    return guarded([&]() -> cw_status {
        if (!json_out) cw::raise(cw::Errc::config, "null output argument");
        std::string json = cw::cmd_stats(finalized(cfg), fleet_cells > 0 ? fleet_cells : 80);
        *json_out = dup_string(json);
        return CW_OK;
    });
}

cw_status cw_cmd_export(const cw_config* cfg, const char* format, const char* out_path, const char* cell,
                        int64_t cycle_lo, int64_t cycle_hi, const char* params) {
    return guarded([&]() -> cw_status {
        if (!format || !out_path) cw::raise(cw::Errc::config, "format and output path are required");
        cw::CycleStore::ScanSelection sel;
        if (cell && *cell) sel.cell = cell;
        if (cycle_lo >= 0 || cycle_hi >= 0) {
            uint64_t lo = cycle_lo >= 0 ? static_cast<uint64_t>(cycle_lo) : 0;
            uint64_t hi = cycle_hi >= 0 ? static_cast<uint64_t>(cycle_hi) : UINT64_MAX;
            sel.cycle_range = {lo, hi};
        }
        if (params && *params) {
            std::vector<std::string> list;
            std::string cur;
            for (const char* p = params;; ++p) {
                if (*p == ',' || *p == '\0') {
                    if (!cur.empty()) list.push_back(cur);
                    cur.clear();
                    if (*p == '\0') break;
                } else {
                    cur += *p;
                }
            }
            sel.params = std::move(list);
        }
        int rc = cw::cmd_export(finalized(cfg), format, sel, out_path);
        return rc == 0 ? CW_OK : static_cast<cw_status>(rc);
    });
}

void cw_request_shutdown(void) { g_shutdown = true; }

void cw_reset_shutdown(void) { g_shutdown = false; }

cw_status cw_store_open(const char* path, cw_store** out) {
    return guarded([&]() -> cw_status {
        if (!path || !out) cw::raise(cw::Errc::config, "null argument");
        *out = new cw_store{cw::CycleStore::open(path)};
        return CW_OK;
    });
}

void cw_store_close(cw_store* store) { delete store; }

cw_status cw_store_cycle_count(const cw_store* store, uint64_t* out) {
    return guarded([&]() -> cw_status {
        if (!store || !out) cw::raise(cw::Errc::config, "null argument");
        *out = store->impl.cycle_count();
        return CW_OK;
    });
}

cw_status cw_store_group_count(const cw_store* store, uint64_t* out) {
    return guarded([&]() -> cw_status {
        if (!store || !out) cw::raise(cw::Errc::config, "null argument");
        *out = store->impl.group_count();
        return CW_OK;
    });
}

cw_status cw_store_stats_json(const cw_store* store, int fleet_cells, char** json_out) {
    return guarded([&]() -> cw_status {
        if (!store || !json_out) cw::raise(cw::Errc::config, "null argument");
        *json_out = dup_string(store->impl.compression_stats(fleet_cells > 0 ? fleet_cells : 80).to_json());
        return CW_OK;
    });
}

void cw_string_free(char* s) { ::free(s); }

} // extern "C"
