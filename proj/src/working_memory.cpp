#include <cstdio>
#include <filesystem>
#include <fstream>

#include "lmr/memory.hpp"

namespace lmr::memory {

WorkingMemory::WorkingMemory(std::string case_id, std::size_t capacity)
    : case_id_(std::move(case_id)), capacity_(capacity) {
    if (capacity_ == 0) throw Error(ErrorCode::ValidationError, "working memory capacity must be >= 1");
}

void WorkingMemory::put(const std::string& key, json value) {
    erase(key);
    if (entries_.size() == capacity_) {
        evictions_.push_back(entries_.front().first);
        entries_.erase(entries_.begin());
    }
    entries_.emplace_back(key, std::move(value));
}

const json* WorkingMemory::get(const std::string& key) const {
    for (const auto& [k, v] : entries_)
        if (k == key) return &v;
    return nullptr;
}

bool WorkingMemory::erase(const std::string& key) {
    for (auto it = entries_.begin(); it != entries_.end(); ++it) {
        if (it->first == key) {
            entries_.erase(it);
            return true;
        }
    }
    return false;
}

std::string WorkingMemory::digest() const {
    std::uint64_t h = fnv1a(case_id_);
    h = fnv1a(std::to_string(capacity_), h);
    for (const auto& [k, v] : entries_) {
        h = fnv1a(k, h);
        h = fnv1a(v.dump(), h);
    }
    return hex_digest(h);
}

namespace {

constexpr char kMagic[4] = {'L', 'M', 'R', 'W'};
constexpr std::uint16_t kVersion = 1;

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_str(std::vector<std::uint8_t>& out, std::string_view s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.insert(out.end(), s.begin(), s.end());
}

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}

    std::size_t pos() const { return pos_; }

    std::uint64_t uint(int width, const char* what) {
        need(static_cast<std::size_t>(width), what);
        std::uint64_t v = 0;
        for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(b_[pos_ + i]) << (8 * i);
        pos_ += static_cast<std::size_t>(width);
        return v;
    }

    std::string str(const char* what) {
        auto len = static_cast<std::size_t>(uint(4, what));
        need(len, what);
        std::string s(reinterpret_cast<const char*>(b_.data() + pos_), len);
        pos_ += len;
        return s;
    }

private:
    void need(std::size_t n, const char* what) {
        if (pos_ + n > b_.size())
            throw CorruptCheckpoint(pos_, std::string("truncated while reading ") + what);
    }

    std::span<const std::uint8_t> b_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const WorkingMemory& wm) {
    std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
    put_u16(out, kVersion);
    put_str(out, wm.case_id());
    put_u32(out, static_cast<std::uint32_t>(wm.capacity()));
    put_u32(out, static_cast<std::uint32_t>(wm.size()));
    for (const auto& [k, v] : wm.entries()) {
        put_str(out, k);
        put_str(out, v.dump());
    }
    auto sum = fnv1a(std::string_view(reinterpret_cast<const char*>(out.data()), out.size()));
    put_u64(out, sum);
    return out;
}

WorkingMemory decode_checkpoint(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4 || !std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin()))
        throw CorruptCheckpoint(0, "bad magic");
    Reader r(bytes.subspan(0));
    r.uint(4, "magic");
    auto version_at = r.pos();
    if (r.uint(2, "version") != kVersion) throw CorruptCheckpoint(version_at, "unsupported version");
    auto case_id = r.str("case_id");
    auto capacity_at = r.pos();
    auto capacity = static_cast<std::size_t>(r.uint(4, "capacity"));
    if (capacity == 0) throw CorruptCheckpoint(capacity_at, "zero capacity");
    auto count_at = r.pos();
    auto count = static_cast<std::size_t>(r.uint(4, "entry count"));
    if (count > capacity) throw CorruptCheckpoint(count_at, "entry count exceeds capacity");

    std::vector<std::pair<std::string, json>> entries;
    for (std::size_t i = 0; i < count; ++i) {
        auto key = r.str("entry key");
        auto value_at = r.pos();
        auto raw = r.str("entry value");
        auto value = json::parse(raw, nullptr, false);
        if (value.is_discarded()) throw CorruptCheckpoint(value_at, "entry value is not JSON");
        entries.emplace_back(std::move(key), std::move(value));
    }
    auto body_end = r.pos();
    auto stored = r.uint(8, "checksum");
    auto actual =
        fnv1a(std::string_view(reinterpret_cast<const char*>(bytes.data()), body_end));
    if (stored != actual) throw CorruptCheckpoint(body_end, "checksum mismatch");
    if (r.pos() != bytes.size()) throw CorruptCheckpoint(r.pos(), "trailing bytes");

    WorkingMemory wm(std::move(case_id), capacity);
    for (auto& [k, v] : entries) wm.put(k, std::move(v));
    return wm;
}

std::string checkpoint_save(const WorkingMemory& wm, const std::string& path) {
    auto bytes = encode_checkpoint(wm);
    auto tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::Io, "cannot write checkpoint " + tmp);
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        if (!out) throw Error(ErrorCode::Io, "short write on " + tmp);
    }
    std::filesystem::rename(tmp, path);
    return hex_digest(fnv1a(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size())));
}

WorkingMemory checkpoint_restore(const std::string& path) {
    auto raw = read_file(path);
    std::span<const std::uint8_t> bytes(reinterpret_cast<const std::uint8_t*>(raw.data()), raw.size());
    return decode_checkpoint(bytes);
}

}  // namespace lmr::memory
