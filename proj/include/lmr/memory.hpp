#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lmr/common.hpp"
#include "lmr/core.hpp"

namespace lmr::memory {

// ---------------------------------------------------------------------------
// Working memory (per case, bounded)

class WorkingMemory {
public:
    static constexpr std::size_t kDefaultCapacity = 256;

    explicit WorkingMemory(std::string case_id = {}, std::size_t capacity = kDefaultCapacity);

    // Insert or overwrite. A write always moves the key to the newest position;
    // when the store is full the oldest entry is evicted and the eviction logged.
    void put(const std::string& key, json value);
    const json* get(const std::string& key) const;
    bool contains(const std::string& key) const { return get(key) != nullptr; }
    bool erase(const std::string& key);

    std::size_t size() const { return entries_.size(); }
    std::size_t capacity() const { return capacity_; }
    const std::string& case_id() const { return case_id_; }
    const std::vector<std::pair<std::string, json>>& entries() const { return entries_; }
    const std::vector<std::string>& evictions() const { return evictions_; }

    std::string digest() const;

    friend bool operator==(const WorkingMemory& a, const WorkingMemory& b) {
        return a.case_id_ == b.case_id_ && a.capacity_ == b.capacity_ && a.entries_ == b.entries_;
    }

private:
    std::string case_id_;
    std::size_t capacity_;
    std::vector<std::pair<std::string, json>> entries_;
    std::vector<std::string> evictions_;
};

class CorruptCheckpoint : public Error {
public:
    CorruptCheckpoint(std::size_t offset, const std::string& what)
        : Error(ErrorCode::CorruptCheckpoint, "at byte " + std::to_string(offset) + ": " + what),
          offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

// Binary layout (little endian):
//   "LMRW" u16 version  u32 len + case_id  u32 capacity  u32 count
//   count x { u32 len + key, u32 len + value (compact JSON) }
//   u64 FNV-1a of every preceding byte
std::vector<std::uint8_t> encode_checkpoint(const WorkingMemory& wm);
WorkingMemory decode_checkpoint(std::span<const std::uint8_t> bytes);

// Writes the checkpoint atomically (temp file + rename); returns its digest id.
std::string checkpoint_save(const WorkingMemory& wm, const std::string& path);
WorkingMemory checkpoint_restore(const std::string& path);

// ---------------------------------------------------------------------------
// Episodic memory (shared, append-only)

struct Episode {
    std::string case_id;
    json event;
    std::string event_digest;
    std::uint64_t t = 0;
    std::string category;
    std::set<std::string> tags;
    json plan;
    json log;
    json trace;
    std::string trace_digest;
    json resolution;

    json to_json() const;
    static Episode from_json(const json& j);
    std::string digest() const { return digest_of(to_json()); }
};

using EpisodeRef = std::shared_ptr<const Episode>;

class EpisodicStore {
public:
    EpisodicStore() = default;
    // Backed by an append-only JSONL file; existing records are loaded first.
    explicit EpisodicStore(std::string path);

    EpisodicStore(const EpisodicStore& other);
    EpisodicStore& operator=(const EpisodicStore&) = delete;

    void append(Episode episode);
    std::vector<EpisodeRef> query(const std::set<std::string>& tags, std::size_t limit) const;
    std::vector<EpisodeRef> query(const core::FactSet& facts, std::size_t limit) const;
    std::vector<EpisodeRef> all() const;
    std::size_t size() const;
    bool contains(const std::string& case_id) const;

private:
    mutable std::shared_mutex mu_;
    std::vector<EpisodeRef> episodes_;
    std::set<std::string> case_ids_;
    std::optional<std::string> path_;
};

// Query tags for a fact set: its hints plus its fact keys.
std::set<std::string> tags_of(const core::FactSet& facts);

// ---------------------------------------------------------------------------
// Semantic memory (policy corpus + deterministic retrieval)

using Vector = std::vector<double>;

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual Vector embed(std::string_view text) const = 0;
    virtual std::size_t dim() const = 0;
};

// Hashed term frequency over lowercased word tokens in the first d-1
// coordinates; the last coordinate is a constant 1 so no embedding is zero.
class HashedEmbedder final : public Embedder {
public:
    static constexpr std::size_t kDefaultDim = 256;
    explicit HashedEmbedder(std::size_t dim = kDefaultDim);
    Vector embed(std::string_view text) const override;
    std::size_t dim() const override { return dim_; }
    std::size_t bucket(std::string_view token) const;

private:
    std::size_t dim_;
};

double cosine_sim(std::span<const double> q, std::span<const double> v);

struct SemanticDoc {
    std::string doc_id;
    std::string text;
    Vector vector;
};

struct Retrieved {
    const SemanticDoc* doc = nullptr;
    double score = 0.0;
};

// Similarity of q against every doc. The serial version is the reference;
// the parallel version must agree with it bit for bit.
std::vector<double> score_all_serial(std::span<const SemanticDoc> docs, std::span<const double> q);
std::vector<double> score_all(std::span<const SemanticDoc> docs, std::span<const double> q);

// k best docs ordered by (score desc, doc_id asc).
std::vector<Retrieved> top_k(std::span<const SemanticDoc> docs, std::span<const double> q,
                             std::size_t k);

class SemanticStore {
public:
    explicit SemanticStore(std::shared_ptr<const Embedder> embedder =
                               std::make_shared<HashedEmbedder>());

    void add(std::string doc_id, std::string text);
    // doc_id = file name; every regular file in the directory is loaded.
    void load_dir(const std::string& dir);

    std::vector<Retrieved> retrieve_top_k(std::string_view query_text, std::size_t k) const;
    const std::vector<SemanticDoc>& docs() const { return docs_; }
    const SemanticDoc* find(const std::string& doc_id) const;
    const Embedder& embedder() const { return *embedder_; }
    std::size_t size() const { return docs_.size(); }

private:
    std::shared_ptr<const Embedder> embedder_;
    std::vector<SemanticDoc> docs_;  // sorted by doc_id
};

// query, then one "--- doc:<id> ---" separator line and the body per document.
std::string augment(std::string_view query_text, std::span<const Retrieved> docs);

}  // namespace lmr::memory
