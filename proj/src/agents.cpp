#include "lmr/agents.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <sstream>

namespace lmr::agents {

namespace fs = std::filesystem;

std::string_view to_string(Role r) {
    switch (r) {
        case Role::Supervisor: return "Supervisor";
        case Role::Logistics: return "Logistics";
        case Role::Communications: return "Communications";
        case Role::EvidencePolicy: return "EvidencePolicy";
        case Role::Adjudication: return "Adjudication";
    }
    return "Supervisor";
}

Role role_from_string(std::string_view s) {
    for (auto r : {Role::Supervisor, Role::Logistics, Role::Communications, Role::EvidencePolicy,
                   Role::Adjudication})
        if (s == to_string(r)) return r;
    throw Error(ErrorCode::ParseError, "unknown role " + std::string(s));
}

std::vector<AgentProfile> default_roster() {
    auto worker = [](std::string id, Role role, std::set<std::string> tools, std::set<std::string> extra) {
        std::set<std::string> caps = tools;
        caps.insert(extra.begin(), extra.end());
        return AgentProfile{std::move(id), role, std::move(caps), std::move(tools)};
    };
    std::vector<AgentProfile> roster{
        worker("logistics", Role::Logistics,
               {"get_merchant_status", "re-route_driver", "check_traffic", "find_nearby_locker",
                "get_nearby_merchants", "reassign_driver"},
               {"reroute", "reassign"}),
        worker("communications", Role::Communications,
               {"notify_customer", "contact_recipient_via_chat", "initiate_mediation_flow", "notify_resolution"},
               {"mediation", "notification"}),
        worker("evidence_policy", Role::EvidencePolicy, {"collect_evidence"}, {"evidence", "policy_lookup"}),
        worker("adjudication", Role::Adjudication,
               {"analyze_evidence", "exonerate_driver", "issue_instant_refund", "log_merchant_packaging_feedback"},
               {"execute_resolution"}),
    };
    for (const char* id : {"sup-adjudication", "sup-logistics", "sup-support", "sup-default"})
        roster.push_back({id, Role::Supervisor, {"plan", "delegate", "replan"}, {}});
    return roster;
}

void validate_roster(const std::vector<AgentProfile>& roster, const tools::ToolRegistry& registry,
                     const core::RoutingTable& routing) {
    std::map<std::string, int> supervisors;
    std::set<std::string> ids;
    for (const auto& a : roster) {
        if (!ids.insert(a.agent_id).second) throw Error(ErrorCode::ValidationError, "duplicate agent " + a.agent_id);
        for (const auto& t : a.tool_allowlist)
            if (!registry.find(t))
                throw Error(ErrorCode::ValidationError, a.agent_id + " allowlists unregistered tool " + t);
        if (a.role == Role::Supervisor) ++supervisors[a.agent_id];
        else if (a.capabilities.empty())
            throw Error(ErrorCode::ValidationError, "worker " + a.agent_id + " has no capabilities");
    }
    for (const auto& r : routing.rules())
        if (supervisors[r.supervisor_id] != 1)
            throw Error(ErrorCode::ValidationError, "routing target " + r.supervisor_id + " needs exactly one supervisor");
}

// ---------------------------------------------------------------------------

json Task::to_json() const {
    return {{"task_id", task_id}, {"tag", tag},           {"description", description},
            {"params", params},   {"depends_on", depends_on}, {"tools", tools},
            {"cursor", cursor},   {"attempt", attempt},   {"alt_tools", alt_tools},
            {"alt_params", alt_params}, {"retryable", retryable}, {"compensate", compensate}};
}

Task Task::from_json(const json& j) {
    Task t;
    t.task_id = j.at("task_id").get<std::string>();
    t.tag = j.at("tag").get<std::string>();
    t.description = j.at("description").get<std::string>();
    t.params = j.at("params").get<std::map<std::string, std::string>>();
    t.depends_on = j.at("depends_on").get<std::set<std::string>>();
    t.tools = j.at("tools").get<std::vector<std::string>>();
    t.cursor = j.at("cursor").get<std::size_t>();
    t.attempt = j.at("attempt").get<std::uint32_t>();
    t.alt_tools = j.at("alt_tools").get<std::vector<std::string>>();
    t.alt_params = j.at("alt_params").get<std::map<std::string, std::string>>();
    t.retryable = j.at("retryable").get<bool>();
    t.compensate = j.at("compensate").get<std::string>();
    return t;
}

const Task* Plan::find(const std::string& task_id) const {
    for (const auto& t : tasks)
        if (t.task_id == task_id) return &t;
    return nullptr;
}

json Plan::to_json() const {
    json ts = json::array();
    for (const auto& t : tasks) ts.push_back(t.to_json());
    return {{"tasks", ts}, {"origin", origin}, {"template", template_name}, {"reasoning", reasoning}};
}

Plan Plan::from_json(const json& j) {
    Plan p;
    for (const auto& t : j.at("tasks")) p.tasks.push_back(Task::from_json(t));
    p.origin = j.at("origin").get<std::uint32_t>();
    p.template_name = j.at("template").get<std::string>();
    p.reasoning = j.at("reasoning").get<std::string>();
    return p;
}

bool plan_is_acyclic(const Plan& plan) {
    std::map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < plan.tasks.size(); ++i)
        if (!pos.emplace(plan.tasks[i].task_id, i).second) return false;
    std::map<std::string, std::size_t> indegree;
    std::map<std::string, std::vector<std::string>> out;
    for (const auto& t : plan.tasks) {
        indegree[t.task_id];
        for (const auto& d : t.depends_on) {
            auto it = pos.find(d);
            if (it == pos.end() || it->second >= pos.at(t.task_id)) return false;
            ++indegree[t.task_id];
            out[d].push_back(t.task_id);
        }
    }
    std::deque<std::string> ready;
    for (const auto& [id, deg] : indegree)
        if (deg == 0) ready.push_back(id);
    std::size_t seen = 0;
    while (!ready.empty()) {
        auto id = ready.front();
        ready.pop_front();
        ++seen;
        for (const auto& n : out[id])
            if (--indegree[n] == 0) ready.push_back(n);
    }
    return seen == plan.tasks.size();
}

// ---------------------------------------------------------------------------
// Templates

namespace {

std::map<std::string, std::string> parse_bindings(const std::string& s, const std::string& where) {
    std::map<std::string, std::string> out;
    for (const auto& item : split(s, ';')) {
        auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0) throw Error(ErrorCode::ParseError, where + ": bad binding " + item);
        out[item.substr(0, eq)] = item.substr(eq + 1);
    }
    return out;
}

std::string humanize(std::string s) {
    std::replace(s.begin(), s.end(), '_', ' ');
    std::replace(s.begin(), s.end(), '-', ' ');
    return s;
}

}  // namespace

TemplateLibrary TemplateLibrary::parse(std::string_view text, const std::string& origin) {
    TemplateLibrary lib;
    std::optional<PlanTemplate> cur;
    std::size_t lineno = 0;
    for (const auto& raw : split(text, '\n', true)) {
        ++lineno;
        auto where = origin + ":" + std::to_string(lineno);
        if (raw.empty() || raw[0] == '#') continue;
        std::istringstream is(raw);
        std::string head;
        is >> head;
        if (head == "template") {
            if (cur) throw Error(ErrorCode::ParseError, where + ": nested template");
            cur.emplace();
            is >> cur->name;
            if (cur->name.empty()) throw Error(ErrorCode::ParseError, where + ": template needs a name");
            continue;
        }
        if (!cur) throw Error(ErrorCode::ParseError, where + ": content outside a template");
        if (head == "end") {
            if (cur->categories.empty() || cur->tasks.empty())
                throw Error(ErrorCode::ValidationError, where + ": template " + cur->name + " needs categories and tasks");
            lib.add(std::move(*cur));
            cur.reset();
        } else if (head == "category") {
            std::string c;
            is >> c;
            auto cat = core::category_from_string(c);
            if (!cat) throw Error(ErrorCode::ValidationError, where + ": unknown category " + c);
            cur->categories.push_back(*cat);
        } else if (head == "task") {
            Task t;
            is >> t.task_id >> t.tag;
            if (t.tag.empty()) throw Error(ErrorCode::ParseError, where + ": task needs <id> <tag>");
            std::string opt;
            while (is >> opt) {
                auto eq = opt.find('=');
                auto key = opt.substr(0, eq);
                auto val = eq == std::string::npos ? std::string{} : opt.substr(eq + 1);
                if (key == "tools") t.tools = split(val, ',');
                else if (key == "params") t.params = parse_bindings(val, where);
                else if (key == "alt") t.alt_tools = split(val, ',');
                else if (key == "alt_params") t.alt_params = parse_bindings(val, where);
                else if (key == "retry") t.retryable = true;
                else if (key == "compensate") t.compensate = val;
                else if (key == "after") {
                    for (const auto& d : split(val, ',')) t.depends_on.insert(d);
                } else if (key == "desc") t.description = humanize(val);
                else throw Error(ErrorCode::ParseError, where + ": unknown task option " + key);
            }
            if (t.description.empty()) t.description = humanize(t.tag);
            cur->tasks.push_back(std::move(t));
        } else if (head == "recommend") {
            std::string id;
            is >> id;
            std::string rest;
            std::getline(is, rest);
            cur->recommendations[id] = trim(rest);
        } else {
            throw Error(ErrorCode::ParseError, where + ": unknown directive " + head);
        }
    }
    if (cur) throw Error(ErrorCode::ParseError, origin + ": template " + cur->name + " missing end");
    return lib;
}

TemplateLibrary TemplateLibrary::load_dir(const std::string& dir) {
    std::vector<fs::path> files;
    std::error_code ec;
    for (const auto& e : fs::directory_iterator(dir, ec))
        if (e.is_regular_file() && e.path().extension() == ".plan") files.push_back(e.path());
    if (ec) throw Error(ErrorCode::Io, "cannot list " + dir);
    std::sort(files.begin(), files.end());
    TemplateLibrary lib;
    for (const auto& f : files)
        for (auto& t : parse(read_file(f.string()), f.filename().string()).templates_) lib.add(std::move(t));
    return lib;
}

void TemplateLibrary::add(PlanTemplate t) {
    if (find(t.name)) throw Error(ErrorCode::DuplicateName, "template " + t.name);
    Plan probe{t.tasks, 0, t.name, {}};
    if (!plan_is_acyclic(probe)) throw Error(ErrorCode::ValidationError, "template " + t.name + " has a dependency cycle");
    templates_.push_back(std::move(t));
}

const PlanTemplate* TemplateLibrary::for_category(core::Category c) const {
    for (const auto& t : templates_)
        if (std::find(t.categories.begin(), t.categories.end(), c) != t.categories.end()) return &t;
    return nullptr;
}

const PlanTemplate* TemplateLibrary::find(const std::string& name) const {
    for (const auto& t : templates_)
        if (t.name == name) return &t;
    return nullptr;
}

Plan plan(const TemplateLibrary& library, core::Category category, const core::FactSet& facts,
          const std::vector<memory::EpisodeRef>& episodic_context,
          const std::vector<memory::Retrieved>& semantic_context) {
    const auto* tpl = library.for_category(category);
    if (!tpl) throw Error(ErrorCode::UnplannableCategory, std::string(core::to_string(category)));
    Plan p{tpl->tasks, 0, tpl->name, {}};
    std::ostringstream why;
    why << "category " << core::to_string(category) << " -> template " << tpl->name << " (" << p.tasks.size()
        << " tasks)";
    if (!facts.hints.empty()) {
        why << "; hints:";
        for (const auto& h : facts.hints) why << ' ' << h;
    }
    if (!episodic_context.empty()) {
        why << "; precedents:";
        for (const auto& e : episodic_context) why << ' ' << e->case_id;
    }
    if (!semantic_context.empty()) {
        why << "; policies:";
        for (const auto& r : semantic_context) why << ' ' << r.doc->doc_id;
    }
    p.reasoning = why.str();
    if (!plan_is_acyclic(p)) throw Error(ErrorCode::InvariantViolation, "cyclic plan from " + tpl->name);
    return p;
}

double utility(const AgentProfile& agent, const Task& task) {
    return agent.capabilities.count(task.tag) ? 1.0 : 0.0;
}

std::size_t argmax_utility(const std::vector<double>& utilities) {
    if (utilities.empty()) throw Error(ErrorCode::NoCapableAgent, "empty roster");
    std::size_t best = 0;
    for (std::size_t i = 1; i < utilities.size(); ++i)
        if (utilities[i] > utilities[best]) best = i;
    if (!(utilities[best] > 0.0)) throw Error(ErrorCode::NoCapableAgent, "no agent has positive utility");
    return best;
}

const AgentProfile& select_agent(const Task& task, const std::vector<AgentProfile>& roster) {
    std::vector<double> u;
    u.reserve(roster.size());
    for (const auto& a : roster) u.push_back(utility(a, task));
    try {
        return roster[argmax_utility(u)];
    } catch (const Error&) {
        throw Error(ErrorCode::NoCapableAgent, "task " + task.task_id + " tag " + task.tag);
    }
}

// ---------------------------------------------------------------------------
// Reasoning

json action_to_json(const Action& a) {
    if (const auto* t = std::get_if<ToolInvocation>(&a))
        return {{"type", "tool"}, {"tool", t->tool}, {"args", t->args}};
    if (const auto* f = std::get_if<ReportFail>(&a)) return {{"type", "report_fail"}, {"reason", f->reason}};
    return {{"type", "report_success"}};
}

Action action_from_json(const json& j) {
    auto type = j.at("type").get<std::string>();
    if (type == "tool") return ToolInvocation{j.at("tool").get<std::string>(), j.at("args")};
    if (type == "report_fail") return ReportFail{j.at("reason").get<std::string>()};
    if (type == "report_success") return ReportSuccess{};
    throw Error(ErrorCode::ParseError, "unknown action type " + type);
}

json ActionDecision::to_json() const {
    json c = json::array();
    for (const auto& x : cited) c.push_back({{"ref", x.ref}, {"relevant", x.relevant}});
    return {{"reasoning", reasoning}, {"action", action_to_json(action)}, {"cited", c}, {"has_more", has_more}};
}

namespace {

const std::set<std::string>& stopwords() {
    static const std::set<std::string> s{"a",  "an", "and", "as",  "at",  "be",   "by",   "for", "from", "in",
                                         "is", "it", "of",  "on",  "or",  "per",  "that", "the", "this", "to",
                                         "with", "was", "are", "if", "all", "any", "when"};
    return s;
}

std::set<std::string> content_words(std::string_view text) {
    std::set<std::string> out;
    for (auto& w : word_tokens(text))
        if (!stopwords().count(w)) out.insert(std::move(w));
    return out;
}

std::optional<json> wm_ctx(const memory::WorkingMemory& wm, const std::string& key) {
    if (const auto* v = wm.get(std::string(wm_key::kCtxPrefix) + key)) return *v;
    return std::nullopt;
}

std::optional<json> coerce(const json& v, tools::ParamType type) {
    using tools::ParamType;
    switch (type) {
        case ParamType::String:
            if (v.is_string()) return v;
            if (v.is_number_float()) {
                double d = v.get<double>();
                if (std::floor(d) == d && std::abs(d) < 1e15) return json(std::to_string(static_cast<long long>(d)));
                return json(v.dump());
            }
            if (v.is_number() || v.is_boolean()) return json(v.dump());
            return std::nullopt;
        case ParamType::Number:
            if (v.is_number()) return v;
            if (v.is_string()) {
                auto parsed = core::parse_fact_value(v.get<std::string>());
                if (const auto* d = std::get_if<double>(&parsed)) return json(*d);
            }
            return std::nullopt;
        case ParamType::Boolean:
            if (v.is_boolean()) return v;
            if (v == "true") return json(true);
            if (v == "false") return json(false);
            return std::nullopt;
    }
    return std::nullopt;
}

}  // namespace

std::string context_query(const Task& task, const memory::WorkingMemory& wm) {
    std::string q = task.description;
    if (task.tools.empty()) {
        q += " policy";
        if (auto f = wm_ctx(wm, "finding"); f && f->is_string()) q += " " + humanize(f->get<std::string>());
    } else if (task.cursor < task.tools.size()) {
        q += " " + humanize(task.tools[task.cursor]);
    }
    return q;
}

bool is_relevant(std::string_view query, std::string_view doc_text) {
    auto q = content_words(query);
    for (const auto& w : content_words(doc_text))
        if (q.count(w)) return true;
    return false;
}

std::optional<PolicyDirective> parse_policy(std::string_view text) {
    PolicyDirective d;
    bool any = false;
    for (const auto& line : split(text, '\n')) {
        auto colon = line.find(':');
        if (colon == std::string::npos) continue;
        auto key = to_lower(trim(line.substr(0, colon)));
        auto val = line.substr(colon + 1);
        if (key == "applies-to") {
            for (const auto& v : split(val, ',')) d.applies_to.insert(v);
            any = true;
        } else if (key == "actions") {
            d.actions = split(val, ',');
            any = true;
        }
    }
    if (!any) return std::nullopt;
    return d;
}

json bind_args(const tools::ToolSpec& spec, const Task& task, const memory::WorkingMemory& wm,
               std::vector<std::string>* missing) {
    core::FactSet facts;
    if (const auto* f = wm.get(wm_key::kFacts)) facts = core::FactSet::from_json(*f);
    auto fact = [&](const std::string& key) -> std::optional<json> {
        auto it = facts.facts.find(key);
        if (it == facts.facts.end()) return std::nullopt;
        return core::fact_value_to_json(it->second.value);
    };

    json args = json::object();
    for (const auto& p : spec.params) {
        std::optional<json> v;
        if (auto b = task.params.find(p.name); b != task.params.end()) {
            const auto& expr = b->second;
            if (expr.rfind("@fact:", 0) == 0) v = fact(expr.substr(6));
            else if (expr.rfind("@wm:", 0) == 0) v = wm_ctx(wm, expr.substr(4));
            else v = core::fact_value_to_json(core::parse_fact_value(expr));
        } else if (auto f = fact(p.name)) {
            v = f;
        } else {
            v = wm_ctx(wm, p.name);
        }
        if (v) v = coerce(*v, p.type);
        if (v) args[p.name] = *v;
        else if (p.required && missing) missing->push_back(p.name);
    }
    return args;
}

ActionDecision RuleReasoner::reason(const AgentProfile& agent, const Task& task, const Context& context,
                                    const memory::WorkingMemory& wm,
                                    const tools::ToolRegistry& registry) const {
    ActionDecision d;
    for (const auto& r : context.docs)
        d.cited.push_back({"doc:" + r.doc->doc_id, is_relevant(context.query, r.doc->text)});
    for (const auto& e : context.episodes) d.cited.push_back({"episode:" + e->case_id, true});

    std::ostringstream why;
    why << to_string(agent.role) << " on " << task.task_id << " (" << task.tag << ")";
    if (task.attempt > 0) why << " attempt " << task.attempt + 1;

    std::vector<std::string> actions = task.tools;
    if (actions.empty()) {
        auto finding = wm_ctx(wm, "finding");
        std::string fs = finding && finding->is_string() ? finding->get<std::string>() : "";
        why << "; finding " << (fs.empty() ? "none" : fs);
        const memory::SemanticDoc* chosen = nullptr;
        for (const auto& r : context.docs) {
            auto pol = parse_policy(r.doc->text);
            if (pol && !fs.empty() && pol->applies_to.count(fs)) {
                chosen = r.doc;
                actions = pol->actions;
                break;
            }
        }
        if (!chosen) {
            why << "; no retrieved policy covers it";
            d.reasoning = why.str();
            d.action = ReportFail{"no policy covers finding " + (fs.empty() ? "none" : fs)};
            return d;
        }
        why << "; policy " << chosen->doc_id << " prescribes " << actions.size() << " action(s)";
        // The governing policy leads the citations.
        auto it = std::find_if(d.cited.begin(), d.cited.end(),
                               [&](const Citation& c) { return c.ref == "doc:" + chosen->doc_id; });
        std::rotate(d.cited.begin(), it, it + 1);
        if (actions.empty()) {
            d.reasoning = why.str();
            d.action = ReportSuccess{};
            return d;
        }
    }

    if (task.cursor >= actions.size()) {
        why << "; all actions done";
        d.reasoning = why.str();
        d.action = ReportSuccess{};
        return d;
    }
    const auto& tool = actions[task.cursor];
    d.has_more = task.cursor + 1 < actions.size();
    why << "; action " << task.cursor + 1 << "/" << actions.size() << ": " << tool;
    if (!context.docs.empty()) {
        why << "; consulted";
        for (const auto& r : context.docs) why << ' ' << r.doc->doc_id;
    }
    if (!context.episodes.empty()) {
        why << "; precedents";
        for (const auto& e : context.episodes) why << ' ' << e->case_id;
    }

    const auto* spec = registry.find(tool);
    if (!spec) {
        d.reasoning = why.str();
        d.action = ReportFail{"tool " + tool + " is not registered"};
        return d;
    }
    std::vector<std::string> missing;
    auto args = bind_args(*spec, task, wm, &missing);
    if (!missing.empty()) {
        std::string m;
        for (const auto& x : missing) m += (m.empty() ? "" : ",") + x;
        why << "; cannot bind " << m;
        d.reasoning = why.str();
        d.action = ReportFail{"cannot bind " + m + " for " + tool};
        return d;
    }
    d.reasoning = why.str();
    d.action = ToolInvocation{tool, std::move(args)};
    return d;
}

// ---------------------------------------------------------------------------
// Remote reasoner

RemoteReasoner::RemoteReasoner(std::string url, double timeout_seconds)
    : url_(std::move(url)), timeout_(timeout_seconds) {}

std::unique_ptr<RemoteReasoner> RemoteReasoner::from_env() {
    const char* url = std::getenv("LMR_REMOTE_URL");
    if (!url || !*url) throw Error(ErrorCode::ReasonerUnavailable, "LMR_REMOTE_URL is not set");
    return std::make_unique<RemoteReasoner>(url);
}

ActionDecision RemoteReasoner::reason(const AgentProfile& agent, const Task& task, const Context& context,
                                      const memory::WorkingMemory& wm,
                                      const tools::ToolRegistry& registry) const {
    json ctx = json::array();
    for (const auto& r : context.docs) ctx.push_back({{"ref", "doc:" + r.doc->doc_id}, {"text", r.doc->text}});
    for (const auto& e : context.episodes)
        ctx.push_back({{"ref", "episode:" + e->case_id}, {"text", e->resolution.dump()}});
    json allowed = json::array();
    for (const auto& t : agent.tool_allowlist)
        if (registry.find(t)) allowed.push_back(t);
    json body{{"role", std::string(to_string(agent.role))},
              {"task", task.to_json()},
              {"context", ctx},
              {"working_memory_digest", wm.digest()},
              {"tools", allowed}};
    json reply = post_json(url_, body, timeout_, ErrorCode::ReasonerUnavailable);

    ActionDecision d;
    try {
        d.reasoning = reply.at("reasoning").get<std::string>();
        auto action = reply.at("action").get<std::string>();
        if (action == "ReportSuccess") d.action = ReportSuccess{};
        else if (action == "ReportFail") d.action = ReportFail{reply.value("reason", std::string("remote report"))};
        else d.action = ToolInvocation{action, reply.value("args", json::object())};
        d.has_more = reply.value("more", false);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ReasonerUnavailable, std::string("malformed reply: ") + e.what());
    }
    for (const auto& r : context.docs)
        d.cited.push_back({"doc:" + r.doc->doc_id, is_relevant(context.query, r.doc->text)});
    for (const auto& e : context.episodes) d.cited.push_back({"episode:" + e->case_id, true});
    return d;
}

// ---------------------------------------------------------------------------

Plan replan(const Plan& plan, const Task& failed_task, const tools::ToolResult& failure) {
    if (failure.status == tools::Status::Success)
        throw Error(ErrorCode::ValidationError, "replan needs a failed result");
    auto it = std::find_if(plan.tasks.begin(), plan.tasks.end(),
                           [&](const Task& t) { return t.task_id == failed_task.task_id; });
    if (it == plan.tasks.end()) throw Error(ErrorCode::ValidationError, "task " + failed_task.task_id + " not in plan");
    auto idx = static_cast<std::size_t>(it - plan.tasks.begin());

    Plan out = plan;
    out.origin = plan.origin + 1;
    Task t = failed_task;
    std::ostringstream why;
    why << "replan " << out.origin << " after " << t.task_id << " " << tools::to_string(failure.status) << " ("
        << failure.reason << "): ";

    auto rename_deps = [&](const std::string& from, const std::optional<std::string>& to) {
        for (auto& other : out.tasks) {
            if (other.depends_on.erase(from) && to) other.depends_on.insert(*to);
        }
    };

    if (!t.alt_tools.empty()) {
        auto old_id = t.task_id;
        t.task_id = old_id + "~alt";
        t.tools = t.alt_tools;
        for (const auto& [k, v] : t.alt_params) t.params[k] = v;
        t.alt_tools.clear();
        t.alt_params.clear();
        t.cursor = 0;
        t.attempt += 1;
        out.tasks[idx] = t;
        rename_deps(old_id, t.task_id);
        why << "substituted alternative " << t.task_id;
    } else if (t.retryable) {
        t.attempt += 1;
        out.tasks[idx] = t;
        why << "retry " << t.task_id << " from action " << t.cursor + 1;
    } else if (!t.compensate.empty()) {
        out.tasks.erase(out.tasks.begin() + static_cast<std::ptrdiff_t>(idx));
        rename_deps(t.task_id, std::nullopt);
        Task comp;
        comp.task_id = t.task_id + "~comp";
        comp.tag = t.compensate;
        comp.description = "compensating notification for " + t.task_id;
        comp.tools = {t.compensate};
        comp.params["message"] = "We could not complete " + humanize(t.tag) + "; an agent will follow up.";
        comp.attempt = t.attempt + 1;
        out.tasks.push_back(std::move(comp));
        why << "dropped " << t.task_id << ", appended compensation";
    } else {
        throw Error(ErrorCode::NoAlternative, "task " + t.task_id + " has no alternative, retry or compensation");
    }
    out.reasoning = why.str();
    return out;
}

}  // namespace lmr::agents
