#include <algorithm>
#include <fstream>
#include <mutex>

#include "lmr/memory.hpp"

namespace lmr::memory {

json Episode::to_json() const {
    return {{"case_id", case_id},       {"event", event},   {"event_digest", event_digest},
            {"t", t},                   {"category", category}, {"tags", tags},
            {"plan", plan},             {"log", log},       {"trace", trace},
            {"trace_digest", trace_digest}, {"resolution", resolution}};
}

Episode Episode::from_json(const json& j) {
    Episode e;
    e.case_id = j.at("case_id").get<std::string>();
    e.event = j.at("event");
    e.event_digest = j.at("event_digest").get<std::string>();
    e.t = j.at("t").get<std::uint64_t>();
    e.category = j.at("category").get<std::string>();
    for (const auto& t : j.at("tags")) e.tags.insert(t.get<std::string>());
    e.plan = j.at("plan");
    e.log = j.at("log");
    e.trace = j.at("trace");
    e.trace_digest = j.at("trace_digest").get<std::string>();
    e.resolution = j.at("resolution");
    return e;
}

std::set<std::string> tags_of(const core::FactSet& facts) {
    std::set<std::string> tags = facts.hints;
    for (const auto& [k, _] : facts.facts) tags.insert(k);
    return tags;
}

EpisodicStore::EpisodicStore(std::string path) : path_(std::move(path)) {
    std::ifstream in(*path_);
    if (!in) return;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto j = json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw Error(ErrorCode::ParseError,
                        *path_ + ":" + std::to_string(lineno) + ": malformed episode record");
        auto ep = std::make_shared<const Episode>(Episode::from_json(j));
        if (!case_ids_.insert(ep->case_id).second)
            throw Error(ErrorCode::DuplicateCaseId, ep->case_id + " in " + *path_);
        episodes_.push_back(std::move(ep));
    }
}

EpisodicStore::EpisodicStore(const EpisodicStore& other) {
    std::shared_lock lock(other.mu_);
    episodes_ = other.episodes_;
    case_ids_ = other.case_ids_;
}

void EpisodicStore::append(Episode episode) {
    std::unique_lock lock(mu_);
    if (case_ids_.count(episode.case_id))
        throw Error(ErrorCode::DuplicateCaseId, episode.case_id);
    if (!episodes_.empty() && episode.t < episodes_.back()->t)
        episode.t = episodes_.back()->t;
    if (path_) {
        std::ofstream out(*path_, std::ios::app);
        if (!out) throw Error(ErrorCode::Io, "cannot append to " + *path_);
        out << episode.to_json().dump() << '\n';
    }
    case_ids_.insert(episode.case_id);
    episodes_.push_back(std::make_shared<const Episode>(std::move(episode)));
}

std::vector<EpisodeRef> EpisodicStore::query(const std::set<std::string>& tags,
                                             std::size_t limit) const {
    std::shared_lock lock(mu_);
    struct Hit {
        std::size_t overlap;
        std::size_t index;
    };
    std::vector<Hit> hits;
    for (std::size_t i = 0; i < episodes_.size(); ++i) {
        std::size_t overlap = 0;
        for (const auto& t : episodes_[i]->tags) overlap += tags.count(t);
        if (overlap > 0) hits.push_back({overlap, i});
    }
    std::sort(hits.begin(), hits.end(), [&](const Hit& a, const Hit& b) {
        if (a.overlap != b.overlap) return a.overlap > b.overlap;
        const auto& ea = *episodes_[a.index];
        const auto& eb = *episodes_[b.index];
        if (ea.t != eb.t) return ea.t > eb.t;
        return ea.case_id < eb.case_id;
    });
    std::vector<EpisodeRef> out;
    for (std::size_t i = 0; i < hits.size() && i < limit; ++i) out.push_back(episodes_[hits[i].index]);
    return out;
}

std::vector<EpisodeRef> EpisodicStore::query(const core::FactSet& facts, std::size_t limit) const {
    return query(tags_of(facts), limit);
}

std::vector<EpisodeRef> EpisodicStore::all() const {
    std::shared_lock lock(mu_);
    return episodes_;
}

std::size_t EpisodicStore::size() const {
    std::shared_lock lock(mu_);
    return episodes_.size();
}

bool EpisodicStore::contains(const std::string& case_id) const {
    std::shared_lock lock(mu_);
    return case_ids_.count(case_id) != 0;
}

}  // namespace lmr::memory
