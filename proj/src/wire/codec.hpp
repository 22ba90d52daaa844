#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "wire/packet.hpp"

namespace cw::wire {

constexpr uint32_t kMaxRemainingLength = 268'435'455;

// Serialize one packet per MQTT 3.1.1 framing. Throws Errc::oversize when
// the remaining length would not fit in four length bytes.
std::vector<uint8_t> encode_packet(const Packet& p);

enum class DecodeStatus : uint8_t {
    ok,
    need_more, // buffer holds a prefix of a valid packet; not an error
    malformed, // protocol violation; the connection must be closed
};

struct DecodeResult {
    DecodeStatus status = DecodeStatus::need_more;
    Packet packet;
    size_t consumed = 0; // bytes to drop from the front of the buffer (ok only)
    std::string error;   // set when malformed
};

// Total over arbitrary bytes; never reads past the returned `consumed`.
DecodeResult decode_packet(std::span<const uint8_t> buf);

} // namespace cw::wire
