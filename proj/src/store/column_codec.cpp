#include "store/column_codec.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <unordered_map>

#include "util/bytes.hpp"
#include "util/error.hpp"

namespace cw {

const char* encoding_name(Encoding e) {
    switch (e) {
    case Encoding::raw: return "raw";
    case Encoding::delta_varint: return "delta_varint";
    case Encoding::rle: return "rle";
    case Encoding::dict: return "dict";
    }
    return "?";
}

namespace {

constexpr double kScale = 1e6;
// llround saturates outside this band; treat such values as unquantizable.
constexpr double kFixedPointLimit = 9.0e12;

bool quantizable(double v, int64_t& q) {
    if (!(std::fabs(v) < kFixedPointLimit)) return false;
    q = std::llround(v * kScale);
    return static_cast<double>(q) / kScale == v;
}

[[noreturn]] void corrupt(const std::string& why) { raise(Errc::corruption, "corrupt chunk: " + why); }

Bytes encode_raw(const std::vector<double>& values) {
    Bytes out;
    out.reserve(values.size() * 8);
    for (double v : values) put_f64(out, v);
    return out;
}

Bytes encode_rle(const std::vector<double>& values) {
    Bytes out;
    size_t i = 0;
    while (i < values.size()) {
        uint64_t bits_i;
        std::memcpy(&bits_i, &values[i], 8);
        size_t run = 1;
        while (i + run < values.size()) {
            uint64_t bits_n;
            std::memcpy(&bits_n, &values[i + run], 8);
            if (bits_n != bits_i) break;
            ++run;
        }
        put_varint(out, run);
        put_f64(out, values[i]);
        i += run;
    }
    return out;
}

Bytes encode_dict(const std::vector<double>& values, const std::vector<double>& dict,
                  const std::unordered_map<uint64_t, uint8_t>& index) {
    Bytes out;
    out.push_back(static_cast<uint8_t>(dict.size() - 1)); // 1..256 entries, stored as n-1
    for (double v : dict) put_f64(out, v);
    for (double v : values) {
        uint64_t bits;
        std::memcpy(&bits, &v, 8);
        out.push_back(index.at(bits));
    }
    return out;
}

Bytes encode_delta(const std::vector<double>& values) {
    Bytes out;
    int64_t prev = 0;
    for (size_t i = 0; i < values.size(); ++i) {
        int64_t q = 0;
        quantizable(values[i], q); // caller verified losslessness
        put_varint(out, zigzag(i == 0 ? q : q - prev));
        prev = q;
    }
    return out;
}

} // namespace

bool fixed_point_lossless(const std::vector<double>& values) {
    int64_t q;
    for (double v : values)
        if (!quantizable(v, q)) return false;
    return true;
}

std::vector<uint8_t> deflate_bytes(const std::vector<uint8_t>& in) {
    uLongf bound = compressBound(static_cast<uLong>(in.size()));
    std::vector<uint8_t> out(bound);
    if (compress2(out.data(), &bound, in.data(), static_cast<uLong>(in.size()), Z_DEFAULT_COMPRESSION) != Z_OK)
        raise(Errc::internal, "deflate failed");
    out.resize(bound);
    return out;
}

std::vector<uint8_t> inflate_bytes(const std::vector<uint8_t>& in, size_t expected_max) {
    std::vector<uint8_t> out(expected_max);
    uLongf len = static_cast<uLongf>(out.size());
    int rc = uncompress(out.data(), &len, in.data(), static_cast<uLong>(in.size()));
    if (rc != Z_OK) corrupt("inflate failed");
    out.resize(len);
    return out;
}

ColumnChunk encode_column(const std::string& param_id, const std::vector<double>& values,
                          std::optional<Encoding> hint) {
    if (values.empty()) raise(Errc::invalid_argument, "cannot encode empty column " + param_id);
    for (double v : values)
        if (!std::isfinite(v)) raise(Errc::invalid_argument, "non-finite value in column " + param_id);

    ColumnChunk chunk;
    chunk.param_id = param_id;
    chunk.value_count = static_cast<uint32_t>(values.size());
    chunk.min = values[0];
    chunk.max = values[0];
    for (double v : values) {
        chunk.min = std::min(chunk.min, v);
        chunk.max = std::max(chunk.max, v);
    }

    std::vector<double> dict;
    std::unordered_map<uint64_t, uint8_t> dict_index;
    auto build_dict = [&]() -> bool {
        dict.clear();
        dict_index.clear();
        for (double v : values) {
            uint64_t bits;
            std::memcpy(&bits, &v, 8);
            if (dict_index.count(bits)) continue;
            if (dict.size() >= 256) return false;
            dict_index[bits] = static_cast<uint8_t>(dict.size());
            dict.push_back(v);
        }
        return true;
    };

    Encoding enc;
    if (hint) {
        enc = *hint;
        if (enc == Encoding::dict && !build_dict())
            raise(Errc::invalid_argument, "dict hint but > 256 distinct values");
        if (enc == Encoding::delta_varint && !fixed_point_lossless(values)) enc = Encoding::raw;
    } else {
        size_t equal_pairs = 0;
        for (size_t i = 1; i < values.size(); ++i) {
            uint64_t a, b;
            std::memcpy(&a, &values[i - 1], 8);
            std::memcpy(&b, &values[i], 8);
            if (a == b) ++equal_pairs;
        }
        size_t pairs = values.size() - 1;
        if (pairs == 0 || equal_pairs * 10 >= pairs * 9) enc = Encoding::rle;
        else if (build_dict() && dict.size() <= 255) enc = Encoding::dict;
        else if (fixed_point_lossless(values)) enc = Encoding::delta_varint;
        else enc = Encoding::raw;
    }

    Bytes encoded;
    switch (enc) {
    case Encoding::raw: encoded = encode_raw(values); break;
    case Encoding::rle: encoded = encode_rle(values); break;
    case Encoding::dict:
        if (dict.empty()) build_dict();
        encoded = encode_dict(values, dict, dict_index);
        break;
    case Encoding::delta_varint: encoded = encode_delta(values); break;
    }
    chunk.encoding = enc;

    Bytes deflated = deflate_bytes(encoded);
    if (deflated.size() < encoded.size()) {
        chunk.codec = Codec::deflate;
        chunk.bytes = std::move(deflated);
    } else {
        chunk.codec = Codec::none;
        chunk.bytes = std::move(encoded);
    }
    return chunk;
}

std::vector<double> decode_column(const ColumnChunk& chunk) {
    const size_t n = chunk.value_count;
    std::vector<uint8_t> plain;
    if (chunk.codec == Codec::deflate) {
        // worst cases: rle 9n, delta varint 10n, dict n + table
        plain = inflate_bytes(chunk.bytes, 10 * n + 256 * 8 + 64);
    } else if (chunk.codec == Codec::none) {
        plain = chunk.bytes;
    } else {
        corrupt("unknown codec");
    }

    std::vector<double> out;
    out.reserve(n);
    ByteReader r(plain.data(), plain.size());

    switch (chunk.encoding) {
    case Encoding::raw: {
        if (plain.size() != n * 8) corrupt("raw size mismatch");
        for (size_t i = 0; i < n; ++i) {
            double v;
            r.get_f64(v);
            out.push_back(v);
        }
        break;
    }
    case Encoding::rle: {
        while (out.size() < n) {
            uint64_t run;
            double v;
            if (!get_varint(r, run) || !r.get_f64(v)) corrupt("truncated rle run");
            if (run == 0 || run > n - out.size()) corrupt("rle run overflow");
            out.insert(out.end(), static_cast<size_t>(run), v);
        }
        break;
    }
    case Encoding::dict: {
        uint8_t n_dict_m1;
        if (!r.get_u8(n_dict_m1)) corrupt("missing dict size");
        size_t n_dict = static_cast<size_t>(n_dict_m1) + 1;
        std::vector<double> dict(n_dict);
        for (auto& v : dict)
            if (!r.get_f64(v)) corrupt("truncated dict table");
        for (size_t i = 0; i < n; ++i) {
            uint8_t idx;
            if (!r.get_u8(idx)) corrupt("truncated dict indices");
            if (idx >= n_dict) corrupt("dict index out of range");
            out.push_back(dict[idx]);
        }
        break;
    }
    case Encoding::delta_varint: {
        int64_t acc = 0;
        for (size_t i = 0; i < n; ++i) {
            uint64_t zz;
            if (!get_varint(r, zz)) corrupt("truncated delta stream");
            acc = i == 0 ? unzigzag(zz) : acc + unzigzag(zz);
            out.push_back(static_cast<double>(acc) / 1e6);
        }
        break;
    }
    default: corrupt("unknown encoding");
    }

    if (r.remaining() != 0) corrupt("trailing bytes");
    if (out.size() != n) corrupt("value count mismatch");
    return out;
}

} // namespace cw
