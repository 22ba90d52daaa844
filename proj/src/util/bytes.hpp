#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

namespace cw {

using Bytes = std::vector<uint8_t>;

// Little-endian primitive writers/readers used by the event log and the
// column store. MQTT framing uses its own big-endian helpers in wire/.

inline void put_u32(Bytes& b, uint32_t v) {
    b.push_back(static_cast<uint8_t>(v));
    b.push_back(static_cast<uint8_t>(v >> 8));
    b.push_back(static_cast<uint8_t>(v >> 16));
    b.push_back(static_cast<uint8_t>(v >> 24));
}

inline void put_u64(Bytes& b, uint64_t v) {
    for (int i = 0; i < 8; ++i) b.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

inline void put_f64(Bytes& b, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(b, bits);
}

inline void put_str16(Bytes& b, const std::string& s) {
    b.push_back(static_cast<uint8_t>(s.size()));
    b.push_back(static_cast<uint8_t>(s.size() >> 8));
    b.insert(b.end(), s.begin(), s.end());
}

// Cursor over a byte range; every read checks bounds and reports underflow.
struct ByteReader {
    const uint8_t* p;
    size_t len;
    size_t pos = 0;

    ByteReader(const uint8_t* data, size_t n) : p(data), len(n) {}

    bool ok(size_t n) const { return pos + n <= len; }
    size_t remaining() const { return len - pos; }

    bool get_u8(uint8_t& v) {
        if (!ok(1)) return false;
        v = p[pos++];
        return true;
    }
    bool get_u16(uint16_t& v) {
        if (!ok(2)) return false;
        v = static_cast<uint16_t>(p[pos] | (p[pos + 1] << 8));
        pos += 2;
        return true;
    }
    bool get_u32(uint32_t& v) {
        if (!ok(4)) return false;
        v = static_cast<uint32_t>(p[pos]) | (static_cast<uint32_t>(p[pos + 1]) << 8) |
            (static_cast<uint32_t>(p[pos + 2]) << 16) | (static_cast<uint32_t>(p[pos + 3]) << 24);
        pos += 4;
        return true;
    }
    bool get_u64(uint64_t& v) {
        if (!ok(8)) return false;
        v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p[pos + i]) << (8 * i);
        pos += 8;
        return true;
    }
    bool get_f64(double& v) {
        uint64_t bits;
        if (!get_u64(bits)) return false;
        std::memcpy(&v, &bits, 8);
        return true;
    }
    bool get_str16(std::string& s) {
        uint16_t n;
        if (!get_u16(n) || !ok(n)) return false;
        s.assign(reinterpret_cast<const char*>(p + pos), n);
        pos += n;
        return true;
    }
    bool skip(size_t n) {
        if (!ok(n)) return false;
        pos += n;
        return true;
    }
};

// Unsigned LEB128.
inline void put_varint(Bytes& b, uint64_t v) {
    while (v >= 0x80) {
        b.push_back(static_cast<uint8_t>(v) | 0x80);
        v >>= 7;
    }
    b.push_back(static_cast<uint8_t>(v));
}

inline bool get_varint(ByteReader& r, uint64_t& v) {
    v = 0;
    for (int shift = 0; shift < 64; shift += 7) {
        uint8_t byte;
        if (!r.get_u8(byte)) return false;
        v |= static_cast<uint64_t>(byte & 0x7f) << shift;
        if (!(byte & 0x80)) return true;
    }
    return false;
}

inline uint64_t zigzag(int64_t v) { return (static_cast<uint64_t>(v) << 1) ^ static_cast<uint64_t>(v >> 63); }
inline int64_t unzigzag(uint64_t v) { return static_cast<int64_t>(v >> 1) ^ -static_cast<int64_t>(v & 1); }

} // namespace cw
