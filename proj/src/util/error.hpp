#pragma once

#include <stdexcept>
#include <string>

namespace cw {

// Error classes shared across the library. The top-level groups (config,
// network, storage, corruption) map 1:1 onto CLI exit codes; the rest are
// finer-grained conditions surfaced through the C API.
enum class Errc {
    ok = 0,
    config = 2,
    network = 3,
    storage = 4,
    corruption = 5,

    invalid_argument = 10,
    unknown_parameter = 11,
    not_found = 12,
    state = 13,
    oversize = 14,
    degenerate = 15,
    not_warmed_up = 16,
    schema_mismatch = 17,
    internal = 18,
};

const char* errc_name(Errc c);

class Error : public std::runtime_error {
public:
    Error(Errc code, std::string msg) : std::runtime_error(std::move(msg)), code_(code) {}
    Errc code() const { return code_; }

    // Exit-code group for the CLI (0/2/3/4/5).
    int exit_group() const {
        switch (code_) {
        case Errc::ok: return 0;
        case Errc::config:
        case Errc::invalid_argument:
        case Errc::unknown_parameter:
        case Errc::schema_mismatch: return 2;
        case Errc::network: return 3;
        case Errc::storage:
        case Errc::oversize: return 4;
        case Errc::corruption: return 5;
        default: return 1;
        }
    }

private:
    Errc code_;
};

[[noreturn]] inline void raise(Errc code, std::string msg) { throw Error(code, std::move(msg)); }

} // namespace cw
