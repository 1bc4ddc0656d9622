#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "lmr/memory.hpp"

namespace lmr::memory {

HashedEmbedder::HashedEmbedder(std::size_t dim) : dim_(dim) {
    if (dim_ < 2) throw Error(ErrorCode::ValidationError, "embedding dimension must be >= 2");
}

std::size_t HashedEmbedder::bucket(std::string_view token) const {
    return static_cast<std::size_t>(fnv1a(token) % (dim_ - 1));
}

Vector HashedEmbedder::embed(std::string_view text) const {
    if (trim(text).empty()) throw Error(ErrorCode::EmptyText, "cannot embed empty text");
    Vector v(dim_, 0.0);
    for (const auto& tok : word_tokens(text)) v[bucket(tok)] += 1.0;
    v[dim_ - 1] = 1.0;
    return v;
}

double cosine_sim(std::span<const double> q, std::span<const double> v) {
    if (q.size() != v.size())
        throw Error(ErrorCode::DimensionMismatch,
                    std::to_string(q.size()) + " vs " + std::to_string(v.size()));
    double dot = 0.0, qq = 0.0, vv = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        dot += q[i] * v[i];
        qq += q[i] * q[i];
        vv += v[i] * v[i];
    }
    if (qq == 0.0 || vv == 0.0) throw Error(ErrorCode::ZeroVector, "cosine of a zero vector");
    return std::clamp(dot / (std::sqrt(qq) * std::sqrt(vv)), -1.0, 1.0);
}

std::vector<double> score_all_serial(std::span<const SemanticDoc> docs, std::span<const double> q) {
    std::vector<double> scores(docs.size());
    for (std::size_t i = 0; i < docs.size(); ++i) scores[i] = cosine_sim(q, docs[i].vector);
    return scores;
}

std::vector<double> score_all(std::span<const SemanticDoc> docs, std::span<const double> q) {
    const auto n = static_cast<std::ptrdiff_t>(docs.size());
    std::vector<double> scores(docs.size());
    // Validate once up front; exceptions must not escape the parallel region.
    for (const auto& d : docs)
        if (d.vector.size() != q.size())
            throw Error(ErrorCode::DimensionMismatch, "doc " + d.doc_id);
    if (std::all_of(q.begin(), q.end(), [](double x) { return x == 0.0; }))
        throw Error(ErrorCode::ZeroVector, "query vector is zero");
    for (const auto& d : docs)
        if (std::all_of(d.vector.begin(), d.vector.end(), [](double x) { return x == 0.0; }))
            throw Error(ErrorCode::ZeroVector, "doc " + d.doc_id);

#pragma omp parallel for schedule(static) if (n > 64)
    for (std::ptrdiff_t i = 0; i < n; ++i) scores[static_cast<std::size_t>(i)] =
        cosine_sim(q, docs[static_cast<std::size_t>(i)].vector);
    return scores;
}

std::vector<Retrieved> top_k(std::span<const SemanticDoc> docs, std::span<const double> q,
                             std::size_t k) {
    if (k == 0 || docs.empty()) return {};
    auto scores = score_all(docs, q);
    std::vector<std::size_t> idx(docs.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    auto better = [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return docs[a].doc_id < docs[b].doc_id;
    };
    auto take = std::min(k, idx.size());
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take), idx.end(), better);
    std::vector<Retrieved> out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) out.push_back({&docs[idx[i]], scores[idx[i]]});
    return out;
}

SemanticStore::SemanticStore(std::shared_ptr<const Embedder> embedder)
    : embedder_(std::move(embedder)) {}

void SemanticStore::add(std::string doc_id, std::string text) {
    auto pos = std::lower_bound(docs_.begin(), docs_.end(), doc_id,
                                [](const SemanticDoc& d, const std::string& id) { return d.doc_id < id; });
    if (pos != docs_.end() && pos->doc_id == doc_id)
        throw Error(ErrorCode::DuplicateDocId, doc_id);
    auto vec = embedder_->embed(text);
    docs_.insert(pos, SemanticDoc{std::move(doc_id), std::move(text), std::move(vec)});
}

void SemanticStore::load_dir(const std::string& dir) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file()) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) add(f.filename().string(), read_file(f.string()));
}

std::vector<Retrieved> SemanticStore::retrieve_top_k(std::string_view query_text,
                                                     std::size_t k) const {
    if (k == 0) return {};
    auto q = embedder_->embed(query_text);
    return top_k(docs_, q, k);
}

const SemanticDoc* SemanticStore::find(const std::string& doc_id) const {
    for (const auto& d : docs_)
        if (d.doc_id == doc_id) return &d;
    return nullptr;
}

std::string augment(std::string_view query_text, std::span<const Retrieved> docs) {
    std::string out(query_text);
    for (const auto& r : docs) {
        out += "\n--- doc:";
        out += r.doc->doc_id;
        out += " ---\n";
        out += r.doc->text;
    }
    return out;
}

}  // namespace lmr::memory
