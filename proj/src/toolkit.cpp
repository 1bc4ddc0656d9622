#include "lmr/toolkit.hpp"

#include <cmath>
#include <sstream>

namespace lmr::tools {

std::string_view to_string(EffectClass e) {
    switch (e) {
        case EffectClass::Read: return "Read";
        case EffectClass::Notify: return "Notify";
        case EffectClass::Mutate: return "Mutate";
        case EffectClass::Financial: return "Financial";
    }
    return "Read";
}

std::string_view to_string(ParamType t) {
    switch (t) {
        case ParamType::String: return "string";
        case ParamType::Number: return "number";
        case ParamType::Boolean: return "boolean";
    }
    return "string";
}

std::string_view to_string(Status s) {
    switch (s) {
        case Status::Success: return "Success";
        case Status::Fail: return "Fail";
        case Status::Denied: return "Denied";
    }
    return "Fail";
}

Status status_from_string(std::string_view s) {
    if (s == "Success") return Status::Success;
    if (s == "Denied") return Status::Denied;
    if (s == "Fail") return Status::Fail;
    throw Error(ErrorCode::ParseError, "unknown status " + std::string(s));
}

json ToolResult::to_json() const {
    return {{"status", std::string(to_string(status))},
            {"reason", reason},
            {"payload", payload},
            {"redactions", redactions}};
}

ToolResult ToolResult::from_json(const json& j) {
    return {status_from_string(j.at("status").get<std::string>()), j.at("reason").get<std::string>(),
            j.at("payload"), j.at("redactions").get<std::size_t>()};
}

// ---------------------------------------------------------------------------

Redactor Redactor::defaults() {
    static const Redactor r = parse(
        "PHONE\t(?:\\+\\d{1,3}[-. ]?)?\\b\\d{3}[-. ]\\d{3,4}(?:[-. ]\\d{4})?\\b\n"
        "EMAIL\t[A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\\.[A-Za-z]{2,}\n"
        "ADDRESS\t\\b\\d{1,5}\\s+(?:[A-Z][a-z]+\\s+){1,3}(?:Street|St|Avenue|Ave|Road|Rd|Lane|Ln|Boulevard|Blvd|Drive|Dr)\\b\n");
    return r;
}

Redactor Redactor::parse(std::string_view text) {
    std::vector<PiiPattern> pats;
    std::size_t lineno = 0;
    for (const auto& line : split(text, '\n', true)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw Error(ErrorCode::ConfigParse, "pii pattern line " + std::to_string(lineno) + ": expected LABEL<TAB>regex");
        try {
            pats.push_back({trim(line.substr(0, tab)), std::regex(line.substr(tab + 1))});
        } catch (const std::regex_error& e) {
            throw Error(ErrorCode::ConfigParse, "pii pattern line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return Redactor(std::move(pats));
}

Redactor Redactor::load(const std::string& path) { return parse(read_file(path)); }

std::pair<std::string, std::size_t> Redactor::redact(std::string_view text) const {
    std::string cur(text);
    std::size_t count = 0;
    for (const auto& p : patterns_) {
        std::string out;
        auto begin = std::sregex_iterator(cur.begin(), cur.end(), p.re);
        std::size_t last = 0;
        for (auto it = begin; it != std::sregex_iterator(); ++it) {
            if (it->length(0) == 0) continue;
            out.append(cur, last, static_cast<std::size_t>(it->position(0)) - last);
            out += "[" + p.label + "]";
            last = static_cast<std::size_t>(it->position(0) + it->length(0));
            ++count;
        }
        out.append(cur, last, std::string::npos);
        cur = std::move(out);
    }
    return {cur, count};
}

std::pair<json, std::size_t> Redactor::redact_json(const json& value) const {
    if (value.is_string()) {
        auto [s, n] = redact(std::string_view(value.get_ref<const std::string&>()));
        return {json(s), n};
    }
    if (value.is_array() || value.is_object()) {
        json out = value;
        std::size_t total = 0;
        for (auto it = out.begin(); it != out.end(); ++it) {
            auto [v, n] = redact_json(*it);
            *it = std::move(v);
            total += n;
        }
        return {out, total};
    }
    return {value, 0};
}

bool Redactor::contains_pii(std::string_view text) const {
    std::string s(text);
    for (const auto& p : patterns_)
        if (std::regex_search(s, p.re)) return true;
    return false;
}

std::pair<std::string, std::size_t> redact_pii(std::string_view text) {
    return Redactor::defaults().redact(text);
}

// ---------------------------------------------------------------------------

SafetyPolicy SafetyPolicy::parse(std::string_view text) {
    SafetyPolicy p;
    for (const auto& line : split(text, '\n')) {
        if (line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw Error(ErrorCode::ConfigParse, "safety policy: expected key=value");
        auto key = trim(line.substr(0, eq));
        auto value = trim(line.substr(eq + 1));
        if (key == "financial_limit") {
            char* end = nullptr;
            p.financial_limit = std::strtod(value.c_str(), &end);
            if (value.empty() || end != value.c_str() + value.size() || p.financial_limit < 0)
                throw Error(ErrorCode::ConfigParse, "safety policy: bad financial_limit " + value);
        } else if (key == "pii_patterns") {
            p.pii_patterns_path = value;
        } else {
            throw Error(ErrorCode::ConfigParse, "safety policy: unknown key " + key);
        }
    }
    return p;
}

SafetyPolicy SafetyPolicy::load(const std::string& path) { return parse(read_file(path)); }

std::optional<std::string> check_safety(const ToolCall& call, const ToolSpec& spec,
                                        const SafetyPolicy& policy, bool case_escalated) {
    if (case_escalated && (spec.effect == EffectClass::Mutate || spec.effect == EffectClass::Financial))
        return std::string(policy::kEscalatedCase);
    if (spec.effect == EffectClass::Financial) {
        for (const auto& p : spec.params) {
            if (!p.financial_amount) continue;
            auto it = call.args.find(p.name);
            if (it != call.args.end() && it->is_number() && it->get<double>() > policy.financial_limit)
                return std::string(policy::kFinancialLimit);
        }
    }
    return std::nullopt;
}

void SafetyLayer::mark_escalated(const std::string& case_id) {
    std::lock_guard lock(mu_);
    escalated_.insert(case_id);
}

bool SafetyLayer::escalated(const std::string& case_id) const {
    std::lock_guard lock(mu_);
    return escalated_.count(case_id) != 0;
}

std::optional<std::string> SafetyLayer::check(const ToolCall& call, const ToolSpec& spec) const {
    return check_safety(call, spec, policy_, escalated(call.case_id));
}

// ---------------------------------------------------------------------------

void ToolRegistry::register_tool(ToolSpec spec) {
    if (spec.effect == EffectClass::Financial) {
        bool limited = false;
        for (const auto& p : spec.params) limited |= p.financial_amount && p.type == ParamType::Number;
        if (!limited)
            throw Error(ErrorCode::ValidationError, "financial tool " + spec.name + " needs a limited amount param");
    }
    auto name = spec.name;
    if (!tools_.emplace(name, std::move(spec)).second) throw Error(ErrorCode::DuplicateName, name);
}

const ToolSpec* ToolRegistry::find(const std::string& name) const {
    auto it = tools_.find(name);
    return it == tools_.end() ? nullptr : &it->second;
}

std::vector<std::string> ToolRegistry::list() const {
    std::vector<std::string> out;
    for (const auto& [n, _] : tools_) out.push_back(n);
    return out;
}

std::set<std::string> ToolRegistry::names() const {
    auto l = list();
    return {l.begin(), l.end()};
}

void ToolRegistry::validate(const ToolCall& call) const {
    const auto* spec = find(call.tool);
    if (!spec) throw Error(ErrorCode::UnknownTool, call.tool);
    if (!call.args.is_object()) throw Error(ErrorCode::SchemaViolation, call.tool + ": args must be an object");
    for (const auto& p : spec->params) {
        auto it = call.args.find(p.name);
        if (it == call.args.end()) {
            if (p.required) throw Error(ErrorCode::SchemaViolation, call.tool + ": missing " + p.name);
            continue;
        }
        bool ok = (p.type == ParamType::String && it->is_string()) ||
                  (p.type == ParamType::Number && it->is_number()) ||
                  (p.type == ParamType::Boolean && it->is_boolean());
        if (!ok)
            throw Error(ErrorCode::SchemaViolation,
                        call.tool + ": " + p.name + " must be " + std::string(to_string(p.type)));
    }
    for (const auto& [k, _] : call.args.items()) {
        bool known = false;
        for (const auto& p : spec->params) known |= p.name == k;
        if (!known) throw Error(ErrorCode::SchemaViolation, call.tool + ": unexpected argument " + k);
    }
}

// ---------------------------------------------------------------------------
// Catalog backends

namespace {

std::string arg(const json& args, const char* key, std::string dflt = {}) {
    auto it = args.find(key);
    return it == args.end() ? dflt : it->get<std::string>();
}

const sim::Order* order_of(const sim::World& w, const json& args) {
    auto it = w.state().orders.find(arg(args, "order_id"));
    return it == w.state().orders.end() ? nullptr : &it->second;
}

double round2(double x) { return std::round(x * 100.0) / 100.0; }

bool says_intact(const std::string& answer) {
    auto a = to_lower(answer);
    return a.find("intact") != std::string::npos && a.find("not intact") == std::string::npos &&
           a.rfind("no", 0) != 0;
}

bool says_broken(const std::string& answer) {
    auto a = to_lower(answer);
    return a.find("torn") != std::string::npos || a.find("broken") != std::string::npos ||
           a.find("not intact") != std::string::npos || a.rfind("no", 0) == 0;
}

ParamSpec str(const char* n, bool required = true) { return {n, ParamType::String, required, false}; }

}  // namespace

std::vector<std::string> catalog_tool_names() { return default_registry().list(); }

ToolRegistry default_registry() {
    ToolRegistry r;

    r.register_tool({"get_merchant_status", {str("merchant_id")}, EffectClass::Read,
                     [](sim::World& w, const json& a) {
                         auto id = arg(a, "merchant_id");
                         auto it = w.state().merchants.find(id);
                         if (it == w.state().merchants.end()) return ToolResult::fail("unknown merchant " + id);
                         return ToolResult::ok({{"merchant_id", id},
                                                {"merchant_status", it->second.status},
                                                {"location", it->second.location}});
                     }});

    r.register_tool({"get_nearby_merchants", {str("merchant_id")}, EffectClass::Read,
                     [](sim::World& w, const json& a) {
                         auto id = arg(a, "merchant_id");
                         json alts = json::array();
                         for (const auto& [mid, m] : w.state().merchants)
                             if (mid != id && m.status == "online") alts.push_back(mid);
                         if (alts.empty()) return ToolResult::fail("no alternative merchant online");
                         return ToolResult::ok({{"alternatives", alts}, {"alternative_merchant", alts[0]}});
                     }});

    r.register_tool({"check_traffic", {str("driver_id"), str("route", false)}, EffectClass::Read,
                     [](sim::World& w, const json& a) {
                         auto did = arg(a, "driver_id");
                         auto dit = w.state().drivers.find(did);
                         if (dit == w.state().drivers.end()) return ToolResult::fail("unknown driver " + did);
                         auto route = arg(a, "route", dit->second.route);
                         auto tit = w.state().traffic.find(route);
                         double base = tit == w.state().traffic.end() ? 0.0 : tit->second.level;
                         bool closed = tit != w.state().traffic.end() && tit->second.closed;
                         double level = round2(std::min(1.0, base + 0.1 * w.uniform()));
                         return ToolResult::ok({{"route", route}, {"congestion", level}, {"closed", closed}});
                     }});

    r.register_tool({"re-route_driver", {str("driver_id"), str("route"), str("destination", false)},
                     EffectClass::Mutate, [](sim::World& w, const json& a) {
                         auto route = arg(a, "route");
                         auto tit = w.state().traffic.find(route);
                         if (tit != w.state().traffic.end() && tit->second.closed)
                             return ToolResult::fail("road closed on route " + route);
                         double level = tit == w.state().traffic.end() ? 0.0 : tit->second.level;
                         w.apply(sim::effect::Reroute{arg(a, "driver_id"), route, arg(a, "destination")});
                         auto eta = static_cast<int>(std::lround(10.0 + 30.0 * level));
                         return ToolResult::ok({{"driver_id", arg(a, "driver_id")}, {"route", route}, {"eta_minutes", eta}});
                     }});

    r.register_tool({"find_nearby_locker", {str("order_id")}, EffectClass::Read,
                     [](sim::World& w, const json& a) {
                         const auto* o = order_of(w, a);
                         if (!o) return ToolResult::fail("unknown order " + arg(a, "order_id"));
                         if (w.state().lockers.empty()) return ToolResult::fail("no locker available");
                         // Prefer a locker in the destination zone, else the first by id.
                         auto best = w.state().lockers.begin();
                         for (auto it = w.state().lockers.begin(); it != w.state().lockers.end(); ++it)
                             if (it->second == o->destination) { best = it; break; }
                         return ToolResult::ok({{"locker_id", best->first}, {"locker_location", best->second}});
                     }});

    r.register_tool({"reassign_driver", {str("driver_id"), str("order_id"), str("merchant_id", false)},
                     EffectClass::Mutate, [](sim::World& w, const json& a) {
                         w.apply(sim::effect::Reassign{arg(a, "order_id"), arg(a, "driver_id"), arg(a, "merchant_id")});
                         return ToolResult::ok({{"order_id", arg(a, "order_id")},
                                                {"driver_id", arg(a, "driver_id")},
                                                {"merchant_id", arg(a, "merchant_id")}});
                     }});

    r.register_tool({"notify_customer", {str("customer_id"), str("message", false)}, EffectClass::Notify,
                     [](sim::World& w, const json& a) {
                         w.apply(sim::effect::Notify{arg(a, "customer_id"), "push", arg(a, "message")});
                         return ToolResult::ok({{"delivered", true}, {"recipient", arg(a, "customer_id")}});
                     }});

    r.register_tool({"contact_recipient_via_chat", {str("customer_id"), str("message", false)},
                     EffectClass::Notify, [](sim::World& w, const json& a) {
                         w.apply(sim::effect::Notify{arg(a, "customer_id"), "chat", arg(a, "message")});
                         json payload{{"delivered", true}};
                         for (const auto& [k, v] : w.response("contact_recipient_via_chat")) payload[k] = v;
                         return ToolResult::ok(payload);
                     }});

    r.register_tool({"initiate_mediation_flow", {str("order_id"), str("customer_id"), str("driver_id")},
                     EffectClass::Notify, [](sim::World& w, const json& a) {
                         w.apply(sim::effect::StartMediation{arg(a, "order_id")});
                         return ToolResult::ok({{"session", "med-" + arg(a, "order_id")},
                                                {"participants", {arg(a, "customer_id"), arg(a, "driver_id")}},
                                                {"timer_paused", true}});
                     }});

    r.register_tool({"notify_resolution",
                     {str("order_id"), str("customer_id"), str("driver_id", false), str("message", false)},
                     EffectClass::Notify, [](sim::World& w, const json& a) {
                         auto msg = arg(a, "message", "case resolved for order " + arg(a, "order_id"));
                         w.apply(sim::effect::Notify{arg(a, "customer_id"), "push", msg});
                         json recipients = json::array({arg(a, "customer_id")});
                         if (a.contains("driver_id")) {
                             w.apply(sim::effect::Notify{arg(a, "driver_id"), "push", msg});
                             recipients.push_back(arg(a, "driver_id"));
                         }
                         return ToolResult::ok({{"delivered", true}, {"recipients", recipients}});
                     }});

    r.register_tool({"collect_evidence", {str("order_id")}, EffectClass::Read,
                     [](sim::World& w, const json& a) {
                         if (!order_of(w, a)) return ToolResult::fail("unknown order " + arg(a, "order_id"));
                         auto resp = w.response("collect_evidence");
                         json payload{{"customer_answer", resp.count("customer_answer") ? resp["customer_answer"] : "no response"},
                                      {"driver_answer", resp.count("driver_answer") ? resp["driver_answer"] : "no response"},
                                      {"photos", split(resp.count("photos") ? resp["photos"] : "", ',')}};
                         return ToolResult::ok(payload);
                     }});

    r.register_tool({"analyze_evidence", {str("order_id"), str("customer_answer", false), str("driver_answer", false)},
                     EffectClass::Read, [](sim::World& w, const json& a) {
                         const auto* o = order_of(w, a);
                         if (!o) return ToolResult::fail("unknown order " + arg(a, "order_id"));
                         auto due = round2(o->total - o->refunded);
                         if (o->status == "canceled") {
                             if (due > 0) return ToolResult::ok({{"finding", "refund_shortfall"}, {"amount", due}});
                             return ToolResult::ok({{"finding", "refund_correct"}, {"amount", 0.0}});
                         }
                         auto ca = arg(a, "customer_answer");
                         auto da = arg(a, "driver_answer");
                         if (o->seal_state == "broken" || says_broken(ca) || says_broken(da))
                             return ToolResult::ok({{"finding", "driver_fault"}, {"amount", due}});
                         if (says_intact(ca) && says_intact(da))
                             return ToolResult::ok({{"finding", "merchant_fault"}, {"amount", due}});
                         return ToolResult::ok({{"finding", "inconclusive"}, {"amount", 0.0}});
                     }});

    r.register_tool({"exonerate_driver", {str("driver_id"), str("order_id")}, EffectClass::Mutate,
                     [](sim::World& w, const json& a) {
                         w.apply(sim::effect::Exonerate{arg(a, "driver_id"), arg(a, "order_id")});
                         return ToolResult::ok({{"driver_id", arg(a, "driver_id")}, {"at_fault", false}});
                     }});

    r.register_tool({"issue_instant_refund",
                     {str("order_id"), str("customer_id"), {"amount", ParamType::Number, true, true}},
                     EffectClass::Financial, [](sim::World& w, const json& a) {
                         auto amount = a.at("amount").get<double>();
                         if (!(amount > 0)) return ToolResult::fail("refund amount must be positive");
                         w.apply(sim::effect::Refund{arg(a, "order_id"), arg(a, "customer_id"), amount});
                         return ToolResult::ok({{"order_id", arg(a, "order_id")},
                                                {"refund_id", "rf-" + arg(a, "order_id") + "-" +
                                                                  std::to_string(w.state().ledger.size())},
                                                {"amount", amount}});
                     }});

    r.register_tool({"log_merchant_packaging_feedback", {str("merchant_id"), str("order_id"), str("evidence", false)},
                     EffectClass::Mutate, [](sim::World& w, const json& a) {
                         w.apply(sim::effect::LogFeedback{arg(a, "merchant_id"), arg(a, "order_id"),
                                                          arg(a, "evidence", "packaging failure")});
                         return ToolResult::ok({{"merchant_id", arg(a, "merchant_id")}, {"logged", true}});
                     }});

    return r;
}

ToolResult invoke_tool(const ToolRegistry& registry, sim::World& world, const ToolCall& call,
                       const SafetyLayer& safety, const Redactor& redactor) {
    const auto* spec = registry.find(call.tool);
    if (!spec) throw Error(ErrorCode::UnknownTool, call.tool);
    registry.validate(call);

    std::lock_guard lock(world.mutex());
    if (const auto* prior = world.journal_lookup(call.case_id, call.step))
        return ToolResult::from_json(*prior);

    ToolResult result;
    if (auto denied = safety.check(call, *spec)) {
        result = ToolResult::denied(*denied);
    } else if (auto fault = world.register_call(call.tool, call.step, call.args)) {
        result = ToolResult::fail(*fault);
    } else {
        auto before = world.effects_applied();
        try {
            result = spec->backend(world, call.args);
        } catch (const Error& e) {
            result = ToolResult::fail(e.what());
        }
        if (world.effects_applied() != before) world.count_mutation(call.case_id, call.step);
    }

    auto [payload, n] = redactor.redact_json(result.payload);
    auto [reason, m] = redactor.redact(std::string_view(result.reason));
    result.payload = std::move(payload);
    result.reason = std::move(reason);
    result.redactions = n + m;
    world.journal_record(call.case_id, call.step, result.to_json());
    return result;
}

}  // namespace lmr::tools
