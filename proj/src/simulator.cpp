#include "lmr/simulator.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>

namespace lmr::sim {

json WorldState::to_json() const {
    json j;
    j["merchants"] = json::object();
    for (const auto& [id, m] : merchants) j["merchants"][id] = {{"status", m.status}, {"location", m.location}};
    j["drivers"] = json::object();
    for (const auto& [id, d] : drivers)
        j["drivers"][id] = {{"location", d.location},       {"assignment", d.assignment},
                            {"route", d.route},             {"destination", d.destination},
                            {"exonerated", d.exonerated}};
    j["customers"] = json::object();
    for (const auto& [id, c] : customers)
        j["customers"][id] = {{"address", c.address}, {"phone", c.phone}, {"email", c.email}};
    j["orders"] = json::object();
    for (const auto& [id, o] : orders)
        j["orders"][id] = {{"merchant", o.merchant}, {"driver", o.driver},   {"customer", o.customer},
                           {"items", o.items},       {"seal", o.seal_state}, {"destination", o.destination},
                           {"status", o.status},     {"total", o.total},     {"refunded", o.refunded},
                           {"mediation", o.mediation}};
    j["traffic"] = json::object();
    for (const auto& [r, t] : traffic) j["traffic"][r] = {{"level", t.level}, {"closed", t.closed}};
    j["lockers"] = lockers;
    j["ledger"] = json::array();
    for (const auto& l : ledger)
        j["ledger"].push_back({{"order", l.order}, {"customer", l.customer}, {"amount", l.amount}});
    j["outbox"] = json::array();
    for (const auto& n : outbox)
        j["outbox"].push_back({{"recipient", n.recipient}, {"channel", n.channel}, {"message", n.message}});
    j["feedback"] = json::array();
    for (const auto& f : feedback)
        j["feedback"].push_back({{"merchant", f.merchant}, {"order", f.order}, {"note", f.note}});
    return j;
}

bool is_financial(const Effect& e) { return std::holds_alternative<effect::Refund>(e); }

namespace {

template <class Map>
auto& target(Map& m, const std::string& id, const char* what) {
    auto it = m.find(id);
    if (it == m.end()) throw Error(ErrorCode::TargetMissing, std::string(what) + " '" + id + "'");
    return it->second;
}

}  // namespace

WorldState apply_effect(WorldState w, const Effect& e) {
    std::visit(
        [&](const auto& ef) {
            using T = std::decay_t<decltype(ef)>;
            if constexpr (std::is_same_v<T, effect::Reroute>) {
                auto& d = target(w.drivers, ef.driver, "driver");
                d.route = ef.route;
                if (!ef.destination.empty()) d.destination = ef.destination;
            } else if constexpr (std::is_same_v<T, effect::Reassign>) {
                auto& o = target(w.orders, ef.order, "order");
                auto& d = target(w.drivers, ef.driver, "driver");
                if (!ef.merchant.empty()) {
                    target(w.merchants, ef.merchant, "merchant");
                    o.merchant = ef.merchant;
                }
                o.driver = ef.driver;
                d.assignment = ef.order;
            } else if constexpr (std::is_same_v<T, effect::Exonerate>) {
                target(w.orders, ef.order, "order");
                target(w.drivers, ef.driver, "driver").exonerated = true;
            } else if constexpr (std::is_same_v<T, effect::LogFeedback>) {
                target(w.merchants, ef.merchant, "merchant");
                target(w.orders, ef.order, "order");
                w.feedback.push_back({ef.merchant, ef.order, ef.note});
            } else if constexpr (std::is_same_v<T, effect::Refund>) {
                target(w.orders, ef.order, "order").refunded += ef.amount;
                target(w.customers, ef.customer, "customer");
                w.ledger.push_back({ef.order, ef.customer, ef.amount});
            } else if constexpr (std::is_same_v<T, effect::Notify>) {
                w.outbox.push_back({ef.recipient, ef.channel, ef.message});
            } else if constexpr (std::is_same_v<T, effect::StartMediation>) {
                target(w.orders, ef.order, "order").mediation = true;
            }
        },
        e);
    return w;
}

namespace {

// Whitespace-separated tokens; double quotes group a token (quotes removed).
std::vector<std::string> tokenize(std::string_view line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false, have = false;
    for (char c : line) {
        if (c == '"') {
            quoted = !quoted;
            have = true;
        } else if (!quoted && std::isspace(static_cast<unsigned char>(c))) {
            if (have) out.push_back(std::move(cur));
            cur.clear();
            have = false;
        } else {
            cur.push_back(c);
            have = true;
        }
    }
    if (have) out.push_back(std::move(cur));
    return out;
}

std::map<std::string, std::string> attrs(const std::vector<std::string>& toks, std::size_t from,
                                         const std::string& where) {
    std::map<std::string, std::string> out;
    for (std::size_t i = from; i < toks.size(); ++i) {
        auto eq = toks[i].find('=');
        if (eq == std::string::npos)
            throw Error(ErrorCode::ParseError, where + ": expected key=value, got '" + toks[i] + "'");
        out[toks[i].substr(0, eq)] = toks[i].substr(eq + 1);
    }
    return out;
}

double to_number(const std::string& s, const std::string& where) {
    char* end = nullptr;
    double d = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size())
        throw Error(ErrorCode::ParseError, where + ": '" + s + "' is not a number");
    return d;
}

std::string tool_of_response_key(const std::string& key) { return key.substr(0, key.find('@')); }

}  // namespace

FaultSpec parse_fault(std::string_view line) {
    auto toks = tokenize(line);
    if (toks.size() < 2) throw Error(ErrorCode::ParseError, "fault: expected <tool> <behavior> [when=...]");
    FaultSpec f;
    f.tool = toks[0];
    const auto& b = toks[1];
    if (b == "once") {
        f.behavior = FaultSpec::Behavior::FailOnce;
    } else if (b == "always") {
        f.behavior = FaultSpec::Behavior::FailAlways;
    } else if (b.rfind("fail=", 0) == 0) {
        f.behavior = FaultSpec::Behavior::FailN;
        auto n = to_number(b.substr(5), "fault");
        if (n < 1 || n != static_cast<double>(static_cast<std::uint32_t>(n)))
            throw Error(ErrorCode::ValidationError, "fault: n must be a positive integer");
        f.n = static_cast<std::uint32_t>(n);
    } else {
        throw Error(ErrorCode::ParseError, "fault: unknown behavior '" + b + "'");
    }
    for (std::size_t i = 2; i < toks.size(); ++i) {
        const auto& t = toks[i];
        if (t.rfind("when=", 0) != 0) throw Error(ErrorCode::ParseError, "fault: unexpected '" + t + "'");
        auto cond = t.substr(5);
        if (cond.rfind("step:", 0) == 0) {
            f.trigger.kind = FaultTrigger::Kind::Step;
            f.trigger.value = static_cast<std::uint64_t>(to_number(cond.substr(5), "fault"));
        } else if (cond.rfind("call:", 0) == 0) {
            f.trigger.kind = FaultTrigger::Kind::Call;
            f.trigger.value = static_cast<std::uint64_t>(to_number(cond.substr(5), "fault"));
        } else if (cond.rfind("arg:", 0) == 0) {
            auto kv = cond.substr(4);
            auto eq = kv.find('=');
            if (eq == std::string::npos) throw Error(ErrorCode::ParseError, "fault: arg trigger needs key=value");
            f.trigger.kind = FaultTrigger::Kind::Arg;
            f.trigger.arg_key = kv.substr(0, eq);
            f.trigger.arg_value = kv.substr(eq + 1);
        } else {
            throw Error(ErrorCode::ParseError, "fault: unknown trigger '" + cond + "'");
        }
    }
    return f;
}

Scenario parse_scenario(std::string_view text, const std::set<std::string>& registered_tools,
                        const std::string& origin) {
    Scenario s;
    std::string section;
    std::size_t lineno = 0;
    std::set<std::string> meta_seen;
    auto where = [&] { return origin + ":" + std::to_string(lineno); };
    auto invalid = [&](const std::string& field, const std::string& why) {
        return Error(ErrorCode::ValidationError, origin + ": " + field + ": " + why);
    };

    for (const auto& raw : split(text, '\n', true)) {
        ++lineno;
        if (raw.empty() || raw[0] == '#') continue;
        if (raw.front() == '[' && raw.back() == ']') {
            section = raw.substr(1, raw.size() - 2);
            static const std::set<std::string> known{"META", "FIELDS", "WORLD", "RESPONSES", "FAULTS", "EXPECTED"};
            if (!known.count(section))
                throw Error(ErrorCode::ParseError, where() + ": unknown section [" + section + "]");
            continue;
        }
        if (section.empty()) throw Error(ErrorCode::ParseError, where() + ": content before first section");

        if (section == "META" || section == "FIELDS" || section == "EXPECTED") {
            auto eq = raw.find('=');
            if (eq == std::string::npos) throw Error(ErrorCode::ParseError, where() + ": expected key = value");
            auto key = trim(raw.substr(0, eq));
            auto value = trim(raw.substr(eq + 1));
            if (section == "FIELDS") {
                s.fields[key] = value;
            } else if (section == "EXPECTED") {
                if (!s.expected) s.expected = Expected{};
                if (key == "tools") s.expected->tools = split(value, ',');
                else if (key == "status") s.expected->status = value;
                else throw Error(ErrorCode::ParseError, where() + ": unknown expected key " + key);
            } else {
                meta_seen.insert(key);
                if (key == "key") s.key = value;
                else if (key == "title") s.title = value;
                else if (key == "text") s.event_text = value;
                else if (key == "seed") s.seed = static_cast<std::uint64_t>(to_number(value, where()));
                else if (key == "reporter") s.reporter = core::reporter_from_string(value);
                else if (key == "category") {
                    auto c = core::category_from_string(value);
                    if (!c) throw invalid("category", "unknown category '" + value + "'");
                    s.category = *c;
                } else {
                    throw Error(ErrorCode::ParseError, where() + ": unknown META key " + key);
                }
            }
        } else if (section == "WORLD") {
            auto toks = tokenize(raw);
            if (toks.size() < 2) throw Error(ErrorCode::ParseError, where() + ": expected <kind> <id> attrs...");
            auto a = attrs(toks, 2, where());
            const auto& kind = toks[0];
            const auto& id = toks[1];
            auto get = [&](const char* k, std::string dflt = {}) {
                auto it = a.find(k);
                return it == a.end() ? dflt : it->second;
            };
            if (kind == "merchant") {
                s.world_init.merchants[id] = {get("status", "online"), get("location")};
            } else if (kind == "driver") {
                s.world_init.drivers[id] = {get("location"), get("assignment"), get("route", "primary"),
                                            get("destination"), false};
            } else if (kind == "customer") {
                s.world_init.customers[id] = {get("address"), get("phone"), get("email")};
            } else if (kind == "order") {
                Order o;
                o.merchant = get("merchant");
                o.driver = get("driver");
                o.customer = get("customer");
                o.items = split(get("items"), ',');
                o.seal_state = get("seal", "intact");
                o.destination = get("destination");
                o.status = get("status", "in_transit");
                o.total = to_number(get("total", "0"), where());
                o.refunded = to_number(get("refunded", "0"), where());
                s.world_init.orders[id] = std::move(o);
            } else if (kind == "route") {
                s.world_init.traffic[id] = {to_number(get("level", "0"), where()), get("closed") == "true"};
            } else if (kind == "locker") {
                s.world_init.lockers[id] = get("location");
            } else {
                throw Error(ErrorCode::ParseError, where() + ": unknown world entity '" + kind + "'");
            }
        } else if (section == "RESPONSES") {
            auto eq = raw.find('=');
            auto sp = raw.find_first_of(" \t");
            if (eq == std::string::npos || sp == std::string::npos || sp > eq)
                throw Error(ErrorCode::ParseError, where() + ": expected <tool> <field> = <value>");
            auto tool = raw.substr(0, sp);
            auto field = trim(raw.substr(sp, eq - sp));
            s.responses[tool][field] = trim(raw.substr(eq + 1));
        } else if (section == "FAULTS") {
            try {
                s.faults.push_back(parse_fault(raw));
            } catch (const Error& e) {
                throw Error(e.code(), where() + ": " + e.what());
            }
        }
    }

    for (const char* required : {"key", "title", "category", "text"})
        if (!meta_seen.count(required)) throw invalid(required, "missing from [META]");
    if (trim(s.event_text).empty()) throw invalid("text", "empty");

    const auto& w = s.world_init;
    for (const auto& [id, o] : w.orders) {
        if (!o.merchant.empty() && !w.merchants.count(o.merchant))
            throw invalid("order " + id, "unknown merchant " + o.merchant);
        if (!o.driver.empty() && !w.drivers.count(o.driver))
            throw invalid("order " + id, "unknown driver " + o.driver);
        if (!o.customer.empty() && !w.customers.count(o.customer))
            throw invalid("order " + id, "unknown customer " + o.customer);
    }
    for (const auto& f : s.faults)
        if (!registered_tools.count(f.tool)) throw invalid("faults", "unregistered tool " + f.tool);
    for (const auto& [k, _] : s.responses)
        if (!registered_tools.count(tool_of_response_key(k)))
            throw invalid("responses", "unregistered tool " + k);
    if (s.expected) {
        for (const auto& t : s.expected->tools)
            if (!registered_tools.count(t)) throw invalid("expected", "unregistered tool " + t);
        if (s.expected->status && *s.expected->status != "RESOLVED" &&
            *s.expected->status != "INCOMPLETE" && *s.expected->status != "ESCALATED")
            throw invalid("expected", "status must be RESOLVED, INCOMPLETE or ESCALATED");
    }
    return s;
}

Scenario load_scenario(const std::string& path, const std::set<std::string>& registered_tools) {
    return parse_scenario(read_file(path), registered_tools, path);
}

std::vector<std::string> list_corpus(const std::string& dir) {
    std::vector<std::string> out;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".scn") out.push_back(e.path().string());
    std::sort(out.begin(), out.end());
    return out;
}

World::World(WorldState init, std::uint64_t seed, Responses responses, std::vector<FaultSpec> faults)
    : state_(std::move(init)), seed_(seed), rng_(seed), responses_(std::move(responses)) {
    for (auto& f : faults) inject_fault(std::move(f));
}

World World::from_scenario(const Scenario& s, std::optional<std::uint64_t> seed) {
    return World(s.world_init, seed.value_or(s.seed), s.responses, s.faults);
}

void World::inject_fault(FaultSpec fault) {
    if (fault.n == 0) throw Error(ErrorCode::ValidationError, "fault n must be >= 1");
    faults_.push_back({std::move(fault), 0});
}

std::optional<std::string> World::register_call(const std::string& tool, std::uint64_t step,
                                                const json& args) {
    auto call = ++calls_[tool];
    for (auto& f : faults_) {
        if (f.spec.tool != tool) continue;
        const auto& trig = f.spec.trigger;
        bool eligible = true;
        switch (trig.kind) {
            case FaultTrigger::Kind::Any: break;
            case FaultTrigger::Kind::Step: eligible = step >= trig.value; break;
            case FaultTrigger::Kind::Call: eligible = call >= trig.value; break;
            case FaultTrigger::Kind::Arg: {
                auto it = args.find(trig.arg_key);
                eligible = it != args.end() &&
                           (it->is_string() ? it->get<std::string>() : it->dump()) == trig.arg_value;
                break;
            }
        }
        if (!eligible) continue;
        std::uint32_t budget = 0;
        switch (f.spec.behavior) {
            case FaultSpec::Behavior::FailOnce: budget = 1; break;
            case FaultSpec::Behavior::FailN: budget = f.spec.n; break;
            case FaultSpec::Behavior::FailAlways: budget = UINT32_MAX; break;
        }
        if (f.fired < budget) {
            ++f.fired;
            return "injected fault on " + tool + " (call " + std::to_string(call) + ")";
        }
    }
    return std::nullopt;
}

std::uint64_t World::call_count(const std::string& tool) const {
    auto it = calls_.find(tool);
    return it == calls_.end() ? 0 : it->second;
}

std::map<std::string, std::string> World::response(const std::string& tool) const {
    std::map<std::string, std::string> out;
    if (auto it = responses_.find(tool); it != responses_.end()) out = it->second;
    if (auto it = responses_.find(tool + "@" + std::to_string(call_count(tool))); it != responses_.end())
        for (const auto& [k, v] : it->second) out[k] = v;
    return out;
}

double World::uniform() {
    // 53 random mantissa bits; independent of the standard library's distributions.
    return static_cast<double>(rng_() >> 11) * 0x1.0p-53;
}

const json* World::journal_lookup(const std::string& case_id, std::uint64_t step) const {
    auto it = journal_.find({case_id, step});
    return it == journal_.end() ? nullptr : &it->second;
}

void World::journal_record(const std::string& case_id, std::uint64_t step, json result) {
    journal_[{case_id, step}] = std::move(result);
}

}  // namespace lmr::sim
