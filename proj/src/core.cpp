#include "lmr/core.hpp"

#include <algorithm>
#include <cstdlib>
#include <sstream>

namespace lmr::core {

std::string_view to_string(Reporter r) {
    switch (r) {
        case Reporter::Customer: return "Customer";
        case Reporter::Driver: return "Driver";
        case Reporter::Merchant: return "Merchant";
        case Reporter::System: return "System";
    }
    return "System";
}

Reporter reporter_from_string(std::string_view s) {
    for (auto r : {Reporter::Customer, Reporter::Driver, Reporter::Merchant, Reporter::System})
        if (iequals(s, to_string(r))) return r;
    throw Error(ErrorCode::ValidationError, "unknown reporter '" + std::string(s) + "'");
}

json DisruptionEvent::to_json() const {
    json j{{"id", id},
           {"reporter", std::string(to_string(reporter))},
           {"text", text},
           {"received_at", received_at},
           {"fields", fields}};
    j["scenario_ref"] = scenario_ref ? json(*scenario_ref) : json(nullptr);
    return j;
}

DisruptionEvent DisruptionEvent::from_json(const json& j) {
    DisruptionEvent e;
    e.id = j.at("id").get<std::string>();
    e.reporter = reporter_from_string(j.at("reporter").get<std::string>());
    e.text = j.at("text").get<std::string>();
    e.received_at = j.at("received_at").get<std::uint64_t>();
    e.fields = j.at("fields").get<std::map<std::string, std::string>>();
    if (!j.at("scenario_ref").is_null()) e.scenario_ref = j.at("scenario_ref").get<std::string>();
    return e;
}

std::string DisruptionEvent::digest() const { return digest_of(to_json()); }

DisruptionEvent EventIngestor::ingest(std::string id, Reporter reporter, std::string text,
                                      std::optional<std::string> scenario_ref,
                                      std::map<std::string, std::string> fields) {
    if (trim(text).empty()) throw Error(ErrorCode::EmptyText, "event " + id + " has empty text");
    if (!seen_.insert(id).second)
        throw Error(ErrorCode::ValidationError, "duplicate event id " + id);
    DisruptionEvent ev;
    ev.id = std::move(id);
    ev.reporter = reporter;
    ev.text = std::move(text);
    ev.received_at = clock_->tick();
    ev.scenario_ref = std::move(scenario_ref);
    ev.fields = std::move(fields);
    return ev;
}

json fact_value_to_json(const FactValue& v) {
    return std::visit([](const auto& x) { return json(x); }, v);
}

FactValue fact_value_from_json(const json& j) {
    if (j.is_boolean()) return j.get<bool>();
    if (j.is_number()) return j.get<double>();
    return j.get<std::string>();
}

std::string fact_value_text(const FactValue& v) {
    if (auto s = std::get_if<std::string>(&v)) return *s;
    if (auto b = std::get_if<bool>(&v)) return *b ? "true" : "false";
    std::ostringstream os;
    os << std::get<double>(v);
    return os.str();
}

FactValue parse_fact_value(std::string_view raw) {
    auto s = trim(raw);
    if (s == "true") return true;
    if (s == "false") return false;
    if (!s.empty()) {
        char* end = nullptr;
        double d = std::strtod(s.c_str(), &end);
        if (end == s.c_str() + s.size()) return d;
    }
    return s;
}

std::optional<std::string> FactSet::text(const std::string& key) const {
    auto it = facts.find(key);
    if (it == facts.end()) return std::nullopt;
    return fact_value_text(it->second.value);
}

json FactSet::to_json() const {
    json fj = json::object();
    for (const auto& [k, f] : facts) {
        fj[k] = {{"value", fact_value_to_json(f.value)},
                 {"kind", f.provenance.kind == Provenance::Kind::Pattern ? "pattern" : "field"},
                 {"source", f.provenance.source},
                 {"offset", f.provenance.offset},
                 {"length", f.provenance.length}};
    }
    return {{"facts", fj}, {"hints", hints}, {"source_event", source_event}};
}

FactSet FactSet::from_json(const json& j) {
    FactSet fs;
    fs.source_event = j.at("source_event").get<std::string>();
    for (const auto& h : j.at("hints")) fs.hints.insert(h.get<std::string>());
    for (const auto& [k, v] : j.at("facts").items()) {
        Fact f;
        f.value = fact_value_from_json(v.at("value"));
        f.provenance.kind = v.at("kind") == "pattern" ? Provenance::Kind::Pattern
                                                       : Provenance::Kind::Field;
        f.provenance.source = v.at("source").get<std::string>();
        f.provenance.offset = v.at("offset").get<std::size_t>();
        f.provenance.length = v.at("length").get<std::size_t>();
        fs.facts.emplace(k, std::move(f));
    }
    return fs;
}

std::string_view to_string(Category c) {
    switch (c) {
        case Category::SupportFailure: return "SupportFailure";
        case Category::DriverBehaviour: return "DriverBehaviour";
        case Category::Delay: return "Delay";
        case Category::Cancellation: return "Cancellation";
        case Category::Navigation: return "Navigation";
        case Category::ComplexAdjudication: return "ComplexAdjudication";
        case Category::Unknown: return "Unknown";
    }
    return "Unknown";
}

const std::vector<Category>& all_categories() {
    static const std::vector<Category> cats{
        Category::SupportFailure, Category::DriverBehaviour,     Category::Delay,
        Category::Cancellation,   Category::Navigation,          Category::ComplexAdjudication,
        Category::Unknown};
    return cats;
}

std::optional<Category> category_from_string(std::string_view s) {
    for (auto c : all_categories())
        if (iequals(s, to_string(c))) return c;
    return std::nullopt;
}

namespace {

ExtractionPattern make_pattern(std::string id, const char* re,
                               std::vector<std::pair<std::string, std::string>> facts,
                               std::vector<std::string> hints) {
    return {std::move(id), std::regex(re, std::regex::ECMAScript | std::regex::icase),
            std::move(facts), std::move(hints)};
}

std::string expand(const std::string& tmpl, const std::smatch& m) {
    if (tmpl.size() == 2 && tmpl[0] == '$' && std::isdigit(static_cast<unsigned char>(tmpl[1]))) {
        auto g = static_cast<std::size_t>(tmpl[1] - '0');
        return g < m.size() ? to_lower(m[g].str()) : std::string();
    }
    return tmpl;
}

// Whole-word, case-insensitive search for a (possibly multi-word) keyword.
bool contains_keyword(const std::string& lowered, const std::string& keyword) {
    std::size_t pos = 0;
    while ((pos = lowered.find(keyword, pos)) != std::string::npos) {
        bool left = pos == 0 || !std::isalnum(static_cast<unsigned char>(lowered[pos - 1]));
        auto end = pos + keyword.size();
        bool right = end >= lowered.size() ||
                     !std::isalnum(static_cast<unsigned char>(lowered[end]));
        if (left && right) return true;
        pos += 1;
    }
    return false;
}

}  // namespace

const std::vector<ExtractionPattern>& default_patterns() {
    static const std::vector<ExtractionPattern> patterns = [] {
        std::vector<ExtractionPattern> p;
        p.push_back(make_pattern("spill", R"(\b(spilled|spilt|spill|leaked|leaking)\b)",
                                 {{"damage", "$1"}}, {"damaged", "$1"}));
        p.push_back(make_pattern("damage", R"(\b(damaged|crushed|ruined|smashed)\b)",
                                 {{"damage", "$1"}}, {"damaged"}));
        p.push_back(make_pattern(
            "item", R"(\b(drink|coffee|soda|juice|tea|meal|dessert|pizza|medicine|groceries)\b)",
            {{"item", "$1"}}, {}));
        p.push_back(make_pattern("seal-intact",
                                 R"(\b(?:bag|package|seal) (?:was|is|were) (?:sealed|intact)\b)",
                                 {{"seal", "intact"}}, {"sealed bag"}));
        p.push_back(make_pattern("seal-broken",
                                 R"(\bseal (?:is|was) (?:torn|broken|open)\b|\b(?:torn|broken) seal\b)",
                                 {{"seal", "broken"}}, {}));
        p.push_back(make_pattern("dispute",
                                 R"(\b(?:says|claims|insists|believes)\b[^.?!]*\bbut\b)", {},
                                 {"dispute"}));
        p.push_back(make_pattern("handling", R"(\b(threw|thrown|dropped|kicked)\b)",
                                 {{"handling", "$1"}}, {}));
        p.push_back(make_pattern("obstruction",
                                 R"(\b(accident|road closed|obstruction|jam|roadworks)\b)",
                                 {{"obstruction", "$1"}}, {}));
        p.push_back(make_pattern("priority", R"(\b(urgent|medicine|medical)\b)",
                                 {{"priority", "urgent"}}, {}));
        p.push_back(make_pattern(
            "merchant-offline",
            R"(\b(?:merchant|restaurant|store|shop)\b[^.?!]*\b(?:offline|closed)\b)",
            {{"merchant_status", "offline"}}, {}));
        p.push_back(make_pattern(
            "address",
            R"(\b(?:wrong|incorrect) address\b|\baddress (?:is|was) (?:wrong|incorrect|inaccessible)\b)",
            {{"address_status", "incorrect"}}, {}));
        p.push_back(make_pattern("refund-wrong",
                                 R"(\brefund\b[^.?!]*\b(?:incorrect|wrong|short|missing)\b)",
                                 {{"refund_status", "incorrect"}}, {}));
        p.push_back(make_pattern("canceled", R"(\b(cancell?ed|cancel)\b)",
                                 {{"order_status", "canceled"}}, {}));
        return p;
    }();
    return patterns;
}

RoutingTable RoutingTable::defaults() {
    return RoutingTable({
        {Category::SupportFailure,
         {"refund", "incorrect", "support", "charged", "overcharged", "wrong amount"},
         "sup-support"},
        {Category::DriverBehaviour, {"rude", "threw", "careless", "mishandled", "rough", "torn"},
         "sup-adjudication"},
        {Category::Delay,
         {"late", "delay", "delayed", "traffic", "accident", "stuck", "obstruction", "urgent"},
         "sup-logistics"},
        {Category::Cancellation, {"cancelled", "offline", "merchant", "closed", "unavailable"},
         "sup-logistics"},
        {Category::Navigation,
         {"address", "inaccessible", "gate", "cannot find", "directions", "locate"},
         "sup-logistics"},
        {Category::ComplexAdjudication, {"damaged", "spilled", "dispute", "sealed bag", "leaked"},
         "sup-adjudication"},
        {Category::Unknown, {}, "sup-default"},
    });
}

RoutingTable RoutingTable::parse(std::string_view text) {
    std::vector<RoutingRule> rules;
    std::size_t lineno = 0;
    for (const auto& raw : split(text, '\n', true)) {
        ++lineno;
        if (raw.empty() || raw[0] == '#') continue;
        // split() trims each piece, so re-split the raw line on tabs by hand.
        std::vector<std::string> cols;
        std::string cur;
        for (char c : raw) {
            if (c == '\t') {
                cols.push_back(trim(cur));
                cur.clear();
            } else {
                cur.push_back(c);
            }
        }
        cols.push_back(trim(cur));
        if (cols.size() != 3)
            throw Error(ErrorCode::ConfigParse,
                        "routing line " + std::to_string(lineno) + ": expected 3 tab-separated columns");
        auto cat = category_from_string(cols[0]);
        if (!cat)
            throw Error(ErrorCode::ConfigParse,
                        "routing line " + std::to_string(lineno) + ": unknown category " + cols[0]);
        RoutingRule rule{*cat, {}, cols[2]};
        for (auto& kw : split(cols[1], ',')) rule.keywords.push_back(to_lower(kw));
        if (rule.supervisor_id.empty())
            throw Error(ErrorCode::ConfigParse,
                        "routing line " + std::to_string(lineno) + ": missing supervisor");
        rules.push_back(std::move(rule));
    }
    return RoutingTable(std::move(rules));
}

RoutingTable RoutingTable::load(const std::string& path) { return parse(read_file(path)); }

const RoutingRule* RoutingTable::find(Category c) const {
    for (const auto& r : rules_)
        if (r.category == c) return &r;
    return nullptr;
}

std::vector<std::string> RoutingTable::all_keywords() const {
    std::vector<std::string> out;
    for (const auto& r : rules_) out.insert(out.end(), r.keywords.begin(), r.keywords.end());
    return out;
}

FactSet extract_facts(const DisruptionEvent& event, const RoutingTable& table) {
    FactSet fs;
    fs.source_event = event.id;

    // Structured fields are copied 1:1 and take precedence over text matches.
    for (const auto& [name, raw] : event.fields) {
        Fact f{parse_fact_value(raw), {Provenance::Kind::Field, name, 0, raw.size()}};
        fs.facts.emplace(name, std::move(f));
    }

    for (const auto& pat : default_patterns()) {
        std::smatch m;
        if (!std::regex_search(event.text, m, pat.re)) continue;
        Provenance prov{Provenance::Kind::Pattern, pat.id,
                        static_cast<std::size_t>(m.position(0)),
                        static_cast<std::size_t>(m.length(0))};
        for (const auto& [key, tmpl] : pat.facts) {
            if (fs.facts.count(key)) continue;
            fs.facts.emplace(key, Fact{std::string(expand(tmpl, m)), prov});
        }
        for (const auto& h : pat.hints) {
            auto hint = expand(h, m);
            if (!hint.empty()) fs.hints.insert(hint);
        }
    }

    auto lowered = to_lower(event.text);
    std::string field_text;
    for (const auto& [name, raw] : event.fields) {
        auto n = name;
        std::replace(n.begin(), n.end(), '_', ' ');
        field_text += " " + to_lower(n) + " " + to_lower(raw);
    }
    for (const auto& kw : table.all_keywords()) {
        if (contains_keyword(lowered, kw) || contains_keyword(field_text, kw)) fs.hints.insert(kw);
    }

    if (fs.hints.empty()) fs.hints.insert("unclassified");
    return fs;
}

Route classify_and_route(const FactSet& facts, const RoutingTable& table) {
    Category best = Category::Unknown;
    std::size_t best_hits = 0;
    double best_conf = 0.0;
    for (const auto& rule : table.rules()) {
        if (rule.keywords.empty()) continue;
        std::size_t hits = 0;
        for (const auto& kw : rule.keywords) hits += facts.hints.count(kw);
        if (hits > best_hits) {
            best_hits = hits;
            best = rule.category;
            best_conf = static_cast<double>(hits) / static_cast<double>(rule.keywords.size());
        }
    }
    const auto* rule = table.find(best);
    if (!rule)
        throw Error(ErrorCode::NoSupervisorRegistered,
                    "no supervisor for category " + std::string(to_string(best)));
    return {{best, best == Category::Unknown ? 0.0 : best_conf}, rule->supervisor_id};
}

}  // namespace lmr::core
