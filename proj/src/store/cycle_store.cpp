#include "store/cycle_store.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>
#include <zlib.h>

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <map>

#include "store/frame_json.hpp"
#include "util/bytes.hpp"
#include "util/error.hpp"
#include "util/numfmt.hpp"

namespace fs = std::filesystem;

namespace cw {

namespace {

constexpr char kMagic[4] = {'C', 'C', 'F', '1'};
constexpr uint8_t kBlockGroup = 1;
constexpr uint8_t kBlockFooter = 2;
constexpr size_t kMaxCyclesPerGroup = 256;
constexpr int kExtraColumns = 3; // _ts, _energy_kwh, _part_mass_g

uint32_t crc_of(const uint8_t* data, size_t n) {
    return static_cast<uint32_t>(::crc32(0L, data, static_cast<uInt>(n)));
}

void pread_exact(int fd, void* buf, size_t n, uint64_t off, const std::string& path) {
    uint8_t* p = static_cast<uint8_t*>(buf);
    while (n > 0) {
        ssize_t r = ::pread(fd, p, n, static_cast<off_t>(off));
        if (r <= 0) raise(Errc::storage, "short read from " + path);
        p += r;
        off += static_cast<uint64_t>(r);
        n -= static_cast<size_t>(r);
    }
}

void write_exact(int fd, const void* buf, size_t n, uint64_t off, const std::string& path) {
    const uint8_t* p = static_cast<const uint8_t*>(buf);
    while (n > 0) {
        ssize_t w = ::pwrite(fd, p, n, static_cast<off_t>(off));
        if (w < 0) {
            if (errno == EINTR) continue;
            raise(Errc::storage, "write failed for " + path + ": " + std::strerror(errno));
        }
        p += w;
        off += static_cast<uint64_t>(w);
        n -= static_cast<size_t>(w);
    }
}

struct CommitPointer {
    uint64_t footer_offset = 0;
    uint32_t footer_len = 0;
    uint32_t footer_crc = 0;
};

std::optional<CommitPointer> read_commit_file(const std::string& path) {
    int fd = ::open(path.c_str(), O_RDONLY);
    if (fd < 0) return std::nullopt;
    uint8_t buf[16];
    ssize_t r = ::read(fd, buf, sizeof(buf));
    ::close(fd);
    if (r != sizeof(buf)) return std::nullopt;
    ByteReader br(buf, sizeof(buf));
    CommitPointer cp;
    br.get_u64(cp.footer_offset);
    br.get_u32(cp.footer_len);
    br.get_u32(cp.footer_crc);
    return cp;
}

} // namespace

CycleStore::~CycleStore() {
    if (fd_ >= 0) ::close(fd_);
}

CycleStore::CycleStore(CycleStore&& other) noexcept
    : test_crash_hook(std::move(other.test_crash_hook)),
      path_(std::move(other.path_)),
      catalog_(other.catalog_),
      schema_(std::move(other.schema_)),
      dtypes_(std::move(other.dtypes_)),
      groups_(std::move(other.groups_)),
      total_raw_json_bytes_(other.total_raw_json_bytes_),
      data_end_(other.data_end_),
      fd_(other.fd_) {
    other.fd_ = -1;
}

CycleStore CycleStore::open(const std::string& path, const ParameterCatalog* catalog_for_write) {
    CycleStore st;
    st.path_ = path;
    st.catalog_ = catalog_for_write;

    bool exists = fs::exists(path);
    st.fd_ = ::open(path.c_str(), O_RDWR | O_CREAT, 0644);
    if (st.fd_ < 0) raise(Errc::storage, "cannot open store " + path + ": " + std::strerror(errno));

    if (!exists) {
        if (!catalog_for_write)
            raise(Errc::config, "store does not exist and no catalog given to create it: " + path);
        for (const auto& p : catalog_for_write->params()) {
            st.schema_.push_back(p.canonical_id);
            st.dtypes_.push_back(static_cast<uint8_t>(p.dtype));
        }
        write_exact(st.fd_, kMagic, 4, 0, path);
        st.data_end_ = 4;
        st.commit_footer(st.data_end_);
        return st;
    }

    struct stat sb{};
    ::fstat(st.fd_, &sb);
    auto file_size = static_cast<uint64_t>(sb.st_size);
    char magic[4];
    if (file_size < 4) raise(Errc::corruption, "store too small: " + path);
    pread_exact(st.fd_, magic, 4, 0, path);
    if (std::memcmp(magic, kMagic, 4) != 0) raise(Errc::corruption, "bad store magic: " + path);

    // The sidecar names the live footer; fall back to the EOF trailer for a
    // cleanly written file without one.
    std::vector<uint8_t> footer;
    auto cp = read_commit_file(path + ".commit");
    if (cp && cp->footer_offset + cp->footer_len <= file_size) {
        footer.resize(cp->footer_len);
        pread_exact(st.fd_, footer.data(), footer.size(), cp->footer_offset, path);
        if (cp->footer_crc != crc_of(footer.data(), footer.size()))
            raise(Errc::corruption, "footer does not match commit pointer: " + path);
        st.load_footer(footer, path);
        st.data_end_ = cp->footer_offset;
        return st;
    }
    if (file_size >= 16) {
        uint8_t trailer[8];
        pread_exact(st.fd_, trailer, 8, file_size - 8, path);
        if (std::memcmp(trailer + 4, kMagic, 4) == 0) {
            ByteReader br(trailer, 4);
            uint32_t flen = 0;
            br.get_u32(flen);
            if (flen >= 10 && flen + 12 <= file_size) {
                footer.resize(flen);
                pread_exact(st.fd_, footer.data(), flen, file_size - 8 - flen, path);
                st.load_footer(footer, path);
                st.data_end_ = file_size - 8 - flen;
                return st;
            }
        }
    }
    raise(Errc::corruption, "no valid footer in store " + path);
}

void CycleStore::load_footer(const std::vector<uint8_t>& footer, const std::string& why) {
    if (footer.size() < 10) raise(Errc::corruption, "footer too small: " + why);
    uint32_t stored_crc = static_cast<uint32_t>(footer[footer.size() - 4]) |
                          (static_cast<uint32_t>(footer[footer.size() - 3]) << 8) |
                          (static_cast<uint32_t>(footer[footer.size() - 2]) << 16) |
                          (static_cast<uint32_t>(footer[footer.size() - 1]) << 24);
    if (crc_of(footer.data(), footer.size() - 4) != stored_crc)
        raise(Errc::corruption, "footer CRC mismatch: " + why);

    ByteReader r(footer.data(), footer.size() - 4);
    uint8_t block_type = 0, version = 0;
    if (!r.get_u8(block_type) || block_type != kBlockFooter || !r.get_u8(version) || version != 1)
        raise(Errc::corruption, "bad footer header: " + why);
    uint32_t n_params = 0;
    if (!r.get_u32(n_params) || n_params == 0 || n_params > 100000)
        raise(Errc::corruption, "bad footer schema: " + why);
    schema_.clear();
    dtypes_.clear();
    for (uint32_t i = 0; i < n_params; ++i) {
        std::string name;
        uint8_t dt;
        if (!r.get_str16(name) || !r.get_u8(dt)) raise(Errc::corruption, "truncated schema: " + why);
        schema_.push_back(std::move(name));
        dtypes_.push_back(dt);
    }
    uint64_t raw_bytes = 0;
    uint32_t n_groups = 0;
    if (!r.get_u64(raw_bytes) || !r.get_u32(n_groups))
        raise(Errc::corruption, "truncated footer: " + why);
    total_raw_json_bytes_ = raw_bytes;
    groups_.clear();
    const size_t n_cols = schema_.size() + kExtraColumns;
    for (uint32_t g = 0; g < n_groups; ++g) {
        GroupMeta m;
        uint64_t start_u = 0, end_u = 0;
        if (!r.get_u64(m.offset) || !r.get_u32(m.byte_len) || !r.get_str16(m.cell) ||
            !r.get_u64(m.cyc_lo) || !r.get_u64(m.cyc_hi) || !r.get_u32(m.n_cycles) ||
            !r.get_u32(m.total_ticks) || !r.get_u64(m.raw_json_bytes) || !r.get_u64(start_u) ||
            !r.get_u64(end_u))
            raise(Errc::corruption, "truncated group index: " + why);
        m.min_start_ts = static_cast<int64_t>(start_u);
        m.max_end_ts = static_cast<int64_t>(end_u);
        m.column_minmax.resize(n_cols);
        for (auto& [lo, hi] : m.column_minmax)
            if (!r.get_f64(lo) || !r.get_f64(hi)) raise(Errc::corruption, "truncated minmax: " + why);
        groups_.push_back(std::move(m));
    }
}

std::vector<uint8_t> CycleStore::build_footer() const {
    Bytes f;
    f.push_back(kBlockFooter);
    f.push_back(1); // version
    put_u32(f, static_cast<uint32_t>(schema_.size()));
    for (size_t i = 0; i < schema_.size(); ++i) {
        put_str16(f, schema_[i]);
        f.push_back(dtypes_[i]);
    }
    put_u64(f, total_raw_json_bytes_);
    put_u32(f, static_cast<uint32_t>(groups_.size()));
    for (const auto& m : groups_) {
        put_u64(f, m.offset);
        put_u32(f, m.byte_len);
        put_str16(f, m.cell);
        put_u64(f, m.cyc_lo);
        put_u64(f, m.cyc_hi);
        put_u32(f, m.n_cycles);
        put_u32(f, m.total_ticks);
        put_u64(f, m.raw_json_bytes);
        put_u64(f, static_cast<uint64_t>(m.min_start_ts));
        put_u64(f, static_cast<uint64_t>(m.max_end_ts));
        for (const auto& [lo, hi] : m.column_minmax) {
            put_f64(f, lo);
            put_f64(f, hi);
        }
    }
    put_u32(f, crc_of(f.data(), f.size()));
    return f;
}

void CycleStore::commit_footer(uint64_t data_end) {
    std::vector<uint8_t> footer = build_footer();
    Bytes tail;
    tail.insert(tail.end(), footer.begin(), footer.end());
    put_u32(tail, static_cast<uint32_t>(footer.size()));
    tail.insert(tail.end(), kMagic, kMagic + 4);
    write_exact(fd_, tail.data(), tail.size(), data_end, path_);
    if (::ftruncate(fd_, static_cast<off_t>(data_end + tail.size())) != 0)
        raise(Errc::storage, "ftruncate failed for " + path_);
    ::fsync(fd_);

    if (test_crash_hook && test_crash_hook("before_commit_rename"))
        raise(Errc::storage, "injected crash before commit rename");

    Bytes cp;
    put_u64(cp, data_end);
    put_u32(cp, static_cast<uint32_t>(footer.size()));
    put_u32(cp, crc_of(footer.data(), footer.size()));
    std::string tmp = path_ + ".commit.tmp";
    int cfd = ::open(tmp.c_str(), O_CREAT | O_TRUNC | O_WRONLY, 0644);
    if (cfd < 0) raise(Errc::storage, "cannot create " + tmp);
    write_exact(cfd, cp.data(), cp.size(), 0, tmp);
    ::fsync(cfd);
    ::close(cfd);
    if (::rename(tmp.c_str(), (path_ + ".commit").c_str()) != 0)
        raise(Errc::storage, "rename failed for " + path_ + ".commit");
}

std::vector<uint8_t> CycleStore::encode_group(const CycleFrame* frames, size_t n, GroupMeta& meta) const {
    meta.cell = frames[0].cell_id;
    meta.cyc_lo = frames[0].cycle_index;
    meta.cyc_hi = frames[n - 1].cycle_index;
    meta.n_cycles = static_cast<uint32_t>(n);
    meta.min_start_ts = frames[0].start_ts_ms;
    meta.max_end_ts = frames[0].end_ts_ms;
    meta.total_ticks = 0;
    for (size_t i = 0; i < n; ++i) {
        meta.total_ticks += static_cast<uint32_t>(frames[i].tick_count());
        meta.min_start_ts = std::min(meta.min_start_ts, frames[i].start_ts_ms);
        meta.max_end_ts = std::max(meta.max_end_ts, frames[i].end_ts_ms);
    }

    Bytes g;
    g.push_back(kBlockGroup);
    put_str16(g, meta.cell);
    put_u64(g, meta.cyc_lo);
    put_u64(g, meta.cyc_hi);
    put_u32(g, meta.n_cycles);
    for (size_t i = 0; i < n; ++i) {
        put_u64(g, static_cast<uint64_t>(frames[i].start_ts_ms));
        put_u64(g, static_cast<uint64_t>(frames[i].end_ts_ms));
        put_u32(g, static_cast<uint32_t>(frames[i].tick_count()));
        g.push_back(frames[i].stale ? 1 : 0);
    }

    const size_t P = schema_.size();
    std::vector<double> column;
    column.reserve(meta.total_ticks);
    std::vector<ColumnChunk> chunks;
    chunks.reserve(P + kExtraColumns);

    for (size_t p = 0; p < P; ++p) {
        column.clear();
        for (size_t i = 0; i < n; ++i)
            column.insert(column.end(), frames[i].ticks[p].begin(), frames[i].ticks[p].end());
        chunks.push_back(encode_column(schema_[p], column));
    }
    column.clear();
    for (size_t i = 0; i < n; ++i)
        for (size_t k = 0; k < frames[i].tick_count(); ++k)
            column.push_back(static_cast<double>(frames[i].tick_ts(k)));
    chunks.push_back(encode_column("_ts", column));
    column.clear();
    for (size_t i = 0; i < n; ++i) column.push_back(frames[i].energy_kwh);
    chunks.push_back(encode_column("_energy_kwh", column));
    column.clear();
    for (size_t i = 0; i < n; ++i) column.push_back(frames[i].part_mass_g);
    chunks.push_back(encode_column("_part_mass_g", column));

    put_u32(g, static_cast<uint32_t>(chunks.size()));
    meta.column_minmax.clear();
    for (const auto& c : chunks) {
        put_str16(g, c.param_id);
        g.push_back(static_cast<uint8_t>(c.encoding));
        g.push_back(static_cast<uint8_t>(c.codec));
        put_u32(g, c.value_count);
        put_f64(g, c.min);
        put_f64(g, c.max);
        put_u32(g, static_cast<uint32_t>(c.bytes.size()));
        g.insert(g.end(), c.bytes.begin(), c.bytes.end());
        meta.column_minmax.emplace_back(c.min, c.max);
    }
    put_u32(g, crc_of(g.data(), g.size()));
    meta.byte_len = static_cast<uint32_t>(g.size());
    return g;
}

uint64_t CycleStore::write_rowgroup(const std::vector<CycleFrame>& frames) {
    if (frames.empty()) raise(Errc::invalid_argument, "write_rowgroup with no frames");
    if (!catalog_) raise(Errc::state, "store opened without a catalog; cannot write");
    for (size_t i = 0; i < frames.size(); ++i) {
        if (frames[i].cell_id != frames[0].cell_id)
            raise(Errc::invalid_argument, "frames span multiple cells");
        if (frames[i].cycle_index != frames[0].cycle_index + i)
            raise(Errc::invalid_argument, "cycle_index not contiguous");
        if (frames[i].params->size() != schema_.size())
            raise(Errc::schema_mismatch, "frame param count differs from store schema");
        for (size_t p = 0; p < schema_.size(); ++p)
            if ((*frames[i].params)[p] != schema_[p])
                raise(Errc::schema_mismatch, "frame params differ from store schema at " + schema_[p]);
    }

    uint64_t appended = 0;
    uint64_t pos = data_end_;
    std::vector<GroupMeta> new_groups;
    uint64_t new_json_bytes = 0;
    for (size_t i = 0; i < frames.size(); i += kMaxCyclesPerGroup) {
        size_t count = std::min(kMaxCyclesPerGroup, frames.size() - i);
        GroupMeta meta;
        for (size_t k = i; k < i + count; ++k)
            meta.raw_json_bytes += frame_ndjson_bytes(*catalog_, frames[k]);
        std::vector<uint8_t> block = encode_group(frames.data() + i, count, meta);
        meta.offset = pos;
        write_exact(fd_, block.data(), block.size(), pos, path_);
        pos += block.size();
        appended += block.size();
        new_json_bytes += meta.raw_json_bytes;
        new_groups.push_back(std::move(meta));
        if (test_crash_hook && test_crash_hook("after_group_data"))
            raise(Errc::storage, "injected crash after group data");
    }
    ::fsync(fd_);

    groups_.insert(groups_.end(), new_groups.begin(), new_groups.end());
    total_raw_json_bytes_ += new_json_bytes;
    try {
        commit_footer(pos);
    } catch (...) {
        // Commit did not land: forget the uncommitted groups again.
        groups_.resize(groups_.size() - new_groups.size());
        total_raw_json_bytes_ -= new_json_bytes;
        throw;
    }
    data_end_ = pos;
    return appended;
}

void CycleStore::read_group(const GroupMeta& meta, const ScanSelection& sel,
                            const std::function<void(CycleFrame&&)>& sink) const {
    std::vector<uint8_t> block(meta.byte_len);
    pread_exact(fd_, block.data(), block.size(), meta.offset, path_);
    if (block.size() < 5) raise(Errc::corruption, "group block too small");
    uint32_t stored_crc = static_cast<uint32_t>(block[block.size() - 4]) |
                          (static_cast<uint32_t>(block[block.size() - 3]) << 8) |
                          (static_cast<uint32_t>(block[block.size() - 2]) << 16) |
                          (static_cast<uint32_t>(block[block.size() - 1]) << 24);
    if (crc_of(block.data(), block.size() - 4) != stored_crc)
        raise(Errc::corruption, "row group CRC mismatch in " + path_);

    ByteReader r(block.data(), block.size() - 4);
    uint8_t bt;
    std::string cell;
    uint64_t lo, hi;
    uint32_t n_cycles;
    if (!r.get_u8(bt) || bt != kBlockGroup || !r.get_str16(cell) || !r.get_u64(lo) || !r.get_u64(hi) ||
        !r.get_u32(n_cycles) || n_cycles == 0)
        raise(Errc::corruption, "bad group header");

    struct CycleHdr {
        int64_t start;
        int64_t end;
        uint32_t ticks;
        bool stale;
    };
    std::vector<CycleHdr> cycles(n_cycles);
    for (auto& c : cycles) {
        uint64_t s, e;
        uint8_t stale;
        if (!r.get_u64(s) || !r.get_u64(e) || !r.get_u32(c.ticks) || !r.get_u8(stale))
            raise(Errc::corruption, "truncated cycle headers");
        c.start = static_cast<int64_t>(s);
        c.end = static_cast<int64_t>(e);
        c.stale = stale != 0;
    }

    uint32_t n_chunks;
    if (!r.get_u32(n_chunks)) raise(Errc::corruption, "missing chunk count");

    // Which schema params does the caller want?
    std::vector<int> want(schema_.size(), -1); // schema idx -> output row
    std::vector<std::string> out_params;
    if (sel.params) {
        for (const auto& name : *sel.params) {
            auto it = std::find(schema_.begin(), schema_.end(), name);
            if (it == schema_.end()) raise(Errc::not_found, "unknown param in selection: " + name);
            want[static_cast<size_t>(it - schema_.begin())] = static_cast<int>(out_params.size());
            out_params.push_back(name);
        }
    } else {
        for (size_t p = 0; p < schema_.size(); ++p) {
            want[p] = static_cast<int>(p);
            out_params.push_back(schema_[p]);
        }
    }
    auto params_ptr = std::make_shared<const std::vector<std::string>>(std::move(out_params));

    std::vector<std::vector<double>> rows(params_ptr->size());
    std::vector<double> energy, mass;
    for (uint32_t c = 0; c < n_chunks; ++c) {
        ColumnChunk chunk;
        uint8_t enc, codec;
        uint32_t len;
        if (!r.get_str16(chunk.param_id) || !r.get_u8(enc) || !r.get_u8(codec) ||
            !r.get_u32(chunk.value_count) || !r.get_f64(chunk.min) || !r.get_f64(chunk.max) ||
            !r.get_u32(len) || !r.ok(len))
            raise(Errc::corruption, "truncated chunk header");
        chunk.encoding = static_cast<Encoding>(enc);
        chunk.codec = static_cast<Codec>(codec);
        chunk.bytes.assign(r.p + r.pos, r.p + r.pos + len);
        r.skip(len);

        int out_row = -1;
        bool is_energy = chunk.param_id == "_energy_kwh";
        bool is_mass = chunk.param_id == "_part_mass_g";
        if (!is_energy && !is_mass && chunk.param_id != "_ts") {
            auto it = std::find(schema_.begin(), schema_.end(), chunk.param_id);
            if (it != schema_.end()) out_row = want[static_cast<size_t>(it - schema_.begin())];
            if (out_row < 0) continue; // projected out; skip decode entirely
        }
        std::vector<double> values = decode_column(chunk);
        if (is_energy) energy = std::move(values);
        else if (is_mass) mass = std::move(values);
        else if (chunk.param_id == "_ts") continue; // start/end come from cycle headers
        else rows[static_cast<size_t>(out_row)] = std::move(values);
    }
    if (energy.size() != n_cycles || mass.size() != n_cycles)
        raise(Errc::corruption, "scalar columns incomplete");

    size_t tick_base = 0;
    for (uint32_t c = 0; c < n_cycles; ++c) {
        uint64_t cycle_index = lo + c;
        bool emit = true;
        if (sel.cycle_range &&
            (cycle_index < sel.cycle_range->first || cycle_index > sel.cycle_range->second))
            emit = false;
        if (emit) {
            CycleFrame f;
            f.cell_id = cell;
            f.cycle_index = cycle_index;
            f.start_ts_ms = cycles[c].start;
            f.end_ts_ms = cycles[c].end;
            f.stale = cycles[c].stale;
            f.energy_kwh = energy[c];
            f.part_mass_g = mass[c];
            f.params = params_ptr;
            f.ticks.resize(params_ptr->size());
            for (size_t row = 0; row < rows.size(); ++row) {
                if (rows[row].size() < tick_base + cycles[c].ticks)
                    raise(Errc::corruption, "column shorter than cycle headers require");
                f.ticks[row].assign(rows[row].begin() + static_cast<long>(tick_base),
                                    rows[row].begin() + static_cast<long>(tick_base + cycles[c].ticks));
            }
            sink(std::move(f));
        }
        tick_base += cycles[c].ticks;
    }
}

CycleStore::ScanStats CycleStore::scan(const ScanSelection& sel,
                                       const std::function<void(CycleFrame&&)>& sink) const {
    ScanStats stats;
    std::vector<const GroupMeta*> ordered;
    for (const auto& g : groups_) ordered.push_back(&g);
    std::sort(ordered.begin(), ordered.end(), [](const GroupMeta* a, const GroupMeta* b) {
        if (a->cell != b->cell) return a->cell < b->cell;
        return a->cyc_lo < b->cyc_lo;
    });
    for (const auto* g : ordered) {
        if (sel.cell && g->cell != *sel.cell) {
            ++stats.groups_skipped;
            continue;
        }
        if (sel.cycle_range && (g->cyc_hi < sel.cycle_range->first || g->cyc_lo > sel.cycle_range->second)) {
            ++stats.groups_skipped;
            continue;
        }
        read_group(*g, sel, sink);
        ++stats.groups_read;
    }
    return stats;
}

std::vector<CycleFrame> CycleStore::scan_all() const {
    std::vector<CycleFrame> out;
    scan({}, [&](CycleFrame&& f) { out.push_back(std::move(f)); });
    return out;
}

uint64_t CycleStore::cycle_count() const {
    uint64_t n = 0;
    for (const auto& g : groups_) n += g.n_cycles;
    return n;
}

std::optional<uint64_t> CycleStore::max_cycle_index(const std::string& cell) const {
    std::optional<uint64_t> best;
    for (const auto& g : groups_)
        if (g.cell == cell && (!best || g.cyc_hi > *best)) best = g.cyc_hi;
    return best;
}

std::string CycleStore::StatsReport::to_json() const {
    std::string s = "{\"columnar_bytes\":" + std::to_string(columnar_bytes) +
                    ",\"json_bytes\":" + std::to_string(json_bytes) + ",\"ratio\":" + format_double(ratio) +
                    ",\"cycles\":" + std::to_string(cycles) +
                    ",\"cells_observed\":" + std::to_string(cells_observed) +
                    ",\"observed_cell_seconds\":" + format_double(observed_cell_seconds) +
                    ",\"fleet_cells\":" + std::to_string(fleet_cells) +
                    ",\"annualized_tb\":" + format_double(annualized_tb) + "}";
    return s;
}

CycleStore::StatsReport CycleStore::compression_stats(int fleet_cells) const {
    if (groups_.empty()) raise(Errc::state, "store is empty");
    StatsReport rep;
    rep.fleet_cells = fleet_cells;
    uint64_t group_bytes = 0;
    std::map<std::string, std::pair<int64_t, int64_t>> spans; // cell -> (min start, max end)
    for (const auto& g : groups_) {
        group_bytes += g.byte_len;
        rep.cycles += g.n_cycles;
        auto [it, inserted] = spans.try_emplace(g.cell, std::make_pair(g.min_start_ts, g.max_end_ts));
        if (!inserted) {
            it->second.first = std::min(it->second.first, g.min_start_ts);
            it->second.second = std::max(it->second.second, g.max_end_ts);
        }
    }
    // What a compacted file holds: magic + groups + live footer + trailer.
    rep.columnar_bytes = 4 + group_bytes + build_footer().size() + 8;
    rep.json_bytes = total_raw_json_bytes_;
    rep.ratio = rep.columnar_bytes ? static_cast<double>(rep.json_bytes) / static_cast<double>(rep.columnar_bytes)
                                   : 0.0;
    rep.cells_observed = spans.size();
    double cell_seconds = 0.0;
    for (const auto& [cell, span] : spans)
        cell_seconds += static_cast<double>(span.second - span.first) / 1000.0;
    rep.observed_cell_seconds = cell_seconds;
    if (cell_seconds > 0) {
        double bytes_per_cell_second = static_cast<double>(rep.json_bytes) / cell_seconds;
        rep.annualized_tb = bytes_per_cell_second * fleet_cells * 86400.0 * 365.0 / 1e12;
    }
    return rep;
}

} // namespace cw
