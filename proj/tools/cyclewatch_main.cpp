// cyclewatch CLI: thin front-end over the libcyclewatch C API.

#include <csignal>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cyclewatch.h"

namespace {

void on_signal(int) { cw_request_shutdown(); }

struct ConfigHolder {
    cw_config* cfg = cw_config_new();
    ~ConfigHolder() { cw_config_free(cfg); }
};

int fail(cw_status st) {
    std::fprintf(stderr, "cyclewatch: %s\n", cw_last_error());
    return static_cast<int>(st);
}

int apply(cw_config* cfg, const std::string& key, const std::string& value) {
    cw_status st = cw_config_set(cfg, key.c_str(), value.c_str());
    return st == CW_OK ? 0 : fail(st);
}

} // namespace

int main(int argc, char** argv) {
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::signal(SIGPIPE, SIG_IGN);

    CLI::App app{"cyclewatch: injection-molding telemetry pipeline"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(cw_version()));

    ConfigHolder holder;
    cw_config* cfg = holder.cfg;

    std::string config_file;
    app.add_option("--config", config_file, "key = value configuration file");

    // shared overrides
    std::vector<std::pair<std::string, std::string>> overrides;
    auto add_str = [&](CLI::App* cmd, const char* flag, const char* key, const char* help) {
        auto value = std::make_shared<std::string>();
        cmd->add_option_function<std::string>(
               flag, [&overrides, key](const std::string& v) { overrides.emplace_back(key, v); }, help)
            ->type_name("TEXT");
        (void)value;
    };

    auto add_common = [&](CLI::App* cmd) {
        add_str(cmd, "--data-root", "data.root", "data directory (default $CYCLEWATCH_ROOT)");
        add_str(cmd, "--catalog", "catalog.path", "parameter catalog CSV");
    };
    auto add_sim_flags = [&](CLI::App* cmd) {
        add_str(cmd, "--cells", "sim.cells", "number of simulated cells");
        add_str(cmd, "--seed", "sim.seed", "simulation seed");
        add_str(cmd, "--anomaly-rate", "sim.anomaly_rate", "per-cycle anomaly probability");
        add_str(cmd, "--duration-s", "sim.duration_s", "simulated seconds");
        add_str(cmd, "--labels", "labels.path", "anomaly labels output (NDJSON)");
        cmd->add_flag_callback("--realtime",
                               [&overrides] { overrides.emplace_back("sim.realtime", "true"); },
                               "pace publishing at one simulated second per wall second");
    };
    auto add_broker_flags = [&](CLI::App* cmd) {
        add_str(cmd, "--host", "broker.host", "broker address");
        add_str(cmd, "--port", "broker.port", "broker TCP port");
        add_str(cmd, "--log-root", "log.root", "event log directory");
    };

    auto* c_sim = app.add_subcommand("simulate", "publish simulated telemetry to a broker");
    add_common(c_sim);
    add_sim_flags(c_sim);
    add_broker_flags(c_sim);

    auto* c_broker = app.add_subcommand("broker", "run the MQTT broker with the event-log bridge");
    add_common(c_broker);
    add_broker_flags(c_broker);

    auto* c_run = app.add_subcommand("run", "full pipeline: broker, simulator, store, analytics");
    add_common(c_run);
    add_sim_flags(c_run);
    add_broker_flags(c_run);
    add_str(c_run, "--store", "store.path", "column store file");
    add_str(c_run, "--reports", "reports.path", "reports NDJSON output");

    auto* c_analyze = app.add_subcommand("analyze", "offline detectors over a stored dataset");
    add_common(c_analyze);
    add_str(c_analyze, "--store", "store.path", "column store file");
    std::string analyze_out;
    c_analyze->add_option("--out", analyze_out, "reports output path (default reports.path)");

    auto* c_stats = app.add_subcommand("stats", "compression and annualization report");
    add_common(c_stats);
    add_str(c_stats, "--store", "store.path", "column store file");
    int fleet_cells = 80;
    c_stats->add_option("--fleet-cells", fleet_cells, "fleet size for the annualized projection");

    auto* c_export = app.add_subcommand("export", "dump cycles as NDJSON or CSV");
    add_common(c_export);
    add_str(c_export, "--store", "store.path", "column store file");
    std::string format = "ndjson", out_path, cell, params;
    long long cycle_lo = -1, cycle_hi = -1;
    c_export->add_option("--format", format, "ndjson | csv");
    c_export->add_option("--out", out_path, "output file")->required();
    c_export->add_option("--cell", cell, "restrict to one cell");
    c_export->add_option("--from", cycle_lo, "first cycle index");
    c_export->add_option("--to", cycle_hi, "last cycle index");
    c_export->add_option("--params", params, "comma-separated canonical parameter ids");

    CLI11_PARSE(app, argc, argv);

    if (!config_file.empty()) {
        cw_status st = cw_config_load_file(cfg, config_file.c_str());
        if (st != CW_OK) return fail(st);
    }
    for (const auto& [key, value] : overrides) {
        if (int rc = apply(cfg, key, value)) return rc;
    }

    cw_status st = CW_OK;
    if (app.got_subcommand(c_sim)) {
        st = cw_cmd_simulate(cfg);
    } else if (app.got_subcommand(c_broker)) {
        st = cw_cmd_broker(cfg);
    } else if (app.got_subcommand(c_run)) {
        st = cw_cmd_run(cfg);
    } else if (app.got_subcommand(c_analyze)) {
        st = cw_cmd_analyze(cfg, analyze_out.empty() ? nullptr : analyze_out.c_str());
    } else if (app.got_subcommand(c_stats)) {
        char* json = nullptr;
        st = cw_cmd_stats(cfg, fleet_cells, &json);
        if (st == CW_OK && json) {
            std::printf("%s\n", json);
            cw_string_free(json);
        }
    } else if (app.got_subcommand(c_export)) {
        st = cw_cmd_export(cfg, format.c_str(), out_path.c_str(), cell.empty() ? nullptr : cell.c_str(),
                           cycle_lo, cycle_hi, params.empty() ? nullptr : params.c_str());
    }

    return st == CW_OK ? 0 : fail(st);
}
