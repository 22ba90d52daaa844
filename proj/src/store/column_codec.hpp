#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace cw {

enum class Encoding : uint8_t { raw = 0, delta_varint = 1, rle = 2, dict = 3 };
enum class Codec : uint8_t { none = 0, deflate = 1 };

const char* encoding_name(Encoding e);

// One encoded column of f64 values.
struct ColumnChunk {
    std::string param_id;
    Encoding encoding = Encoding::raw;
    Codec codec = Codec::none;
    uint32_t value_count = 0;
    double min = 0.0;
    double max = 0.0;
    std::vector<uint8_t> bytes; // encoded (and possibly deflated) payload
};

// Picks an encoding unless `hint` forces one: rle when >= 90% of consecutive
// pairs are equal, dict when there are <= 255 distinct values, otherwise
// delta-of-varint over 1e-6 fixed-point integers - falling back to raw for
// any column that does not round-trip that quantization exactly. The result
// is deflated when that shrinks it. Throws Errc::invalid_argument on empty
// or non-finite input.
ColumnChunk encode_column(const std::string& param_id, const std::vector<double>& values,
                          std::optional<Encoding> hint = std::nullopt);

// Exact inverse of encode_column (delta_varint columns were gated to be
// lossless). Throws Errc::corruption on any inconsistency.
std::vector<double> decode_column(const ColumnChunk& chunk);

// True when every value survives round-tripping through the 1e-6 grid.
bool fixed_point_lossless(const std::vector<double>& values);

std::vector<uint8_t> deflate_bytes(const std::vector<uint8_t>& in);
std::vector<uint8_t> inflate_bytes(const std::vector<uint8_t>& in, size_t expected_max);

} // namespace cw
