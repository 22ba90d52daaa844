/*
 * cyclewatch C API.
 *
 * The core pipeline (simulator, MQTT broker, event log, column store,
 * detectors) lives in libcyclewatch; this header is the stable surface the
 * CLI and external embedders link against. All handles are opaque; every
 * function returns a cw_status, and cw_last_error() describes the most
 * recent failure on the calling thread.
 */
#ifndef CYCLEWATCH_H
#define CYCLEWATCH_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define CW_API __declspec(dllexport)
#else
#define CW_API __attribute__((visibility("default")))
#endif

typedef enum cw_status {
    CW_OK = 0,
    CW_ERR = 1,             /* unclassified failure */
    CW_ERR_CONFIG = 2,      /* bad configuration or arguments */
    CW_ERR_NETWORK = 3,     /* socket / broker failure */
    CW_ERR_STORAGE = 4,     /* filesystem failure */
    CW_ERR_CORRUPTION = 5,  /* CRC or format damage detected */
} cw_status;

CW_API const char* cw_version(void);

/* Thread-local message for the last failing call on this thread. */
CW_API const char* cw_last_error(void);

/* ---- configuration ----------------------------------------------------- */

typedef struct cw_config cw_config;

CW_API cw_config* cw_config_new(void);
CW_API void cw_config_free(cw_config* cfg);

/* `key = value` file; CLI flags override file values via cw_config_set. */
CW_API cw_status cw_config_load_file(cw_config* cfg, const char* path);
CW_API cw_status cw_config_set(cw_config* cfg, const char* key, const char* value);

/* ---- commands ----------------------------------------------------------- */

/* Full pipeline: broker + bridge + store writer + analytics + simulator.
 * Runs until the simulation finishes or cw_request_shutdown() is called. */
CW_API cw_status cw_cmd_run(const cw_config* cfg);

/* Simulator publishing to an external broker. */
CW_API cw_status cw_cmd_simulate(const cw_config* cfg);

/* Broker + event-log bridge until cw_request_shutdown(). */
CW_API cw_status cw_cmd_broker(const cw_config* cfg);

/* Offline detector pass over the store; writes the reports NDJSON
 * (out_path NULL = reports.path from the config). */
CW_API cw_status cw_cmd_analyze(const cw_config* cfg, const char* out_path);

/* Compression report as a JSON document; free with cw_string_free. */
CW_API cw_status cw_cmd_stats(const cw_config* cfg, int fleet_cells, char** json_out);

/* format: "ndjson" | "csv"; cell/params/cycle bounds may be NULL/-1 for
 * no restriction; params is a comma-separated canonical id list. */
CW_API cw_status cw_cmd_export(const cw_config* cfg, const char* format, const char* out_path,
                               const char* cell, int64_t cycle_lo, int64_t cycle_hi, const char* params);

/* Signal-safe: makes cw_cmd_run / cw_cmd_broker / cw_cmd_simulate drain and
 * return. */
CW_API void cw_request_shutdown(void);
CW_API void cw_reset_shutdown(void);

/* ---- store inspection ---------------------------------------------------- */

typedef struct cw_store cw_store;

CW_API cw_status cw_store_open(const char* path, cw_store** out);
CW_API void cw_store_close(cw_store* store);
CW_API cw_status cw_store_cycle_count(const cw_store* store, uint64_t* out);
CW_API cw_status cw_store_group_count(const cw_store* store, uint64_t* out);
CW_API cw_status cw_store_stats_json(const cw_store* store, int fleet_cells, char** json_out);

CW_API void cw_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* CYCLEWATCH_H */
