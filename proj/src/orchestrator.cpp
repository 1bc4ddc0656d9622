#include "lmr/orchestrator.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>

namespace lmr::orch {

namespace {

namespace key {
constexpr const char* kEvent = "case/event";
constexpr const char* kRoute = "case/route";
constexpr const char* kPlan = "plan";
constexpr const char* kDone = "plan/done";
constexpr const char* kTask = "task/current";
constexpr const char* kAgent = "task/agent";
constexpr const char* kLog = "log";
constexpr const char* kEscalation = "escalation/reason";
}  // namespace key

namespace out {
constexpr const char* kPlanned = "Planned";
constexpr const char* kUnplannable = "Unplannable";
constexpr const char* kAssigned = "TaskAssigned:";
constexpr const char* kComplete = "Complete";
constexpr const char* kEscalate = "Escalate";
constexpr const char* kContinue = "Continue";
}  // namespace out

const char* node_of(agents::Role r) {
    switch (r) {
        case agents::Role::Logistics: return "logistics";
        case agents::Role::Communications: return "communications";
        case agents::Role::EvidencePolicy: return "evidence_policy";
        case agents::Role::Adjudication: return "adjudication";
        case agents::Role::Supervisor: break;
    }
    throw Error(ErrorCode::InvariantViolation, "supervisors have no worker node");
}

constexpr agents::Role kWorkerRoles[] = {agents::Role::Logistics, agents::Role::Communications,
                                         agents::Role::EvidencePolicy, agents::Role::Adjudication};

bool is_worker_node(const std::string& id) {
    for (auto r : kWorkerRoles)
        if (id == node_of(r)) return true;
    return false;
}

const json& require(const memory::WorkingMemory& wm, const std::string& k) {
    const auto* v = wm.get(k);
    if (!v) throw Error(ErrorCode::InvariantViolation, "working memory lacks " + k);
    return *v;
}

std::vector<ExecutionRecord> log_of(const memory::WorkingMemory& wm) {
    std::vector<ExecutionRecord> log;
    if (const auto* l = wm.get(key::kLog))
        for (const auto& r : *l) log.push_back(ExecutionRecord::from_json(r));
    return log;
}

std::string base_task_id(const std::string& id) { return id.substr(0, id.find('~')); }

const dcg::Graph& default_graph() {
    static const dcg::Graph g = dcg::build_graph(default_graph_spec());
    return g;
}

}  // namespace

// ---------------------------------------------------------------------------

std::optional<std::string> ExecutionRecord::tool() const {
    if (const auto* t = std::get_if<agents::ToolInvocation>(&action)) return t->tool;
    return std::nullopt;
}

json ExecutionRecord::to_json() const {
    json c = json::array();
    for (const auto& x : cited) c.push_back({{"ref", x.ref}, {"relevant", x.relevant}});
    return {{"step", step},
            {"task_id", task_id},
            {"agent_id", agent_id},
            {"reasoning", reasoning},
            {"action", agents::action_to_json(action)},
            {"result", result.to_json()},
            {"attempt", attempt},
            {"cited", c}};
}

ExecutionRecord ExecutionRecord::from_json(const json& j) {
    ExecutionRecord r;
    r.step = j.at("step").get<std::uint64_t>();
    r.task_id = j.at("task_id").get<std::string>();
    r.agent_id = j.at("agent_id").get<std::string>();
    r.reasoning = j.at("reasoning").get<std::string>();
    r.action = agents::action_from_json(j.at("action"));
    r.result = tools::ToolResult::from_json(j.at("result"));
    r.attempt = j.at("attempt").get<std::uint32_t>();
    for (const auto& c : j.at("cited")) r.cited.push_back({c.at("ref").get<std::string>(), c.at("relevant").get<bool>()});
    return r;
}

std::string_view to_string(ReportStatus s) { return s == ReportStatus::Resolved ? "RESOLVED" : "INCOMPLETE"; }

json ResolutionReport::to_json() const {
    return {{"case_id", case_id},
            {"status", std::string(to_string(status))},
            {"success_count", success_count},
            {"fail_count", fail_count},
            {"recommendations", recommendations},
            {"cited_policies", cited_policies}};
}

ResolutionReport ResolutionReport::from_json(const json& j) {
    ResolutionReport r;
    r.case_id = j.at("case_id").get<std::string>();
    r.status = j.at("status") == "RESOLVED" ? ReportStatus::Resolved : ReportStatus::Incomplete;
    r.success_count = j.at("success_count").get<std::size_t>();
    r.fail_count = j.at("fail_count").get<std::size_t>();
    r.recommendations = j.at("recommendations").get<std::vector<std::string>>();
    r.cited_policies = j.at("cited_policies").get<std::vector<std::string>>();
    return r;
}

std::string_view to_string(EscalationReason r) {
    switch (r) {
        case EscalationReason::BudgetExhausted: return "BudgetExhausted";
        case EscalationReason::UnplannableCategory: return "UnplannableCategory";
        case EscalationReason::NoAlternative: return "NoAlternative";
    }
    return "BudgetExhausted";
}

EscalationReason escalation_reason_from_string(std::string_view s) {
    for (auto r : {EscalationReason::BudgetExhausted, EscalationReason::UnplannableCategory,
                   EscalationReason::NoAlternative})
        if (s == to_string(r)) return r;
    throw Error(ErrorCode::ParseError, "unknown escalation reason " + std::string(s));
}

json EscalationTicket::to_json() const {
    json l = json::array();
    for (const auto& r : log) l.push_back(r.to_json());
    return {{"case_id", case_id},   {"event_digest", event_digest}, {"log", l},
            {"reason", std::string(to_string(reason))}, {"created_at", created_at}, {"tau", tau}};
}

EscalationTicket EscalationTicket::from_json(const json& j) {
    EscalationTicket t;
    t.case_id = j.at("case_id").get<std::string>();
    t.event_digest = j.at("event_digest").get<std::string>();
    for (const auto& r : j.at("log")) t.log.push_back(ExecutionRecord::from_json(r));
    t.reason = escalation_reason_from_string(j.at("reason").get<std::string>());
    t.created_at = j.at("created_at").get<std::uint64_t>();
    t.tau = j.at("tau").get<std::uint32_t>();
    return t;
}

ResolutionReport synthesize(const std::string& case_id, const std::vector<ExecutionRecord>& log,
                            const std::map<std::string, std::string>& recommendations) {
    if (log.empty()) throw Error(ErrorCode::EmptyLog, "case " + case_id);
    ResolutionReport r;
    r.case_id = case_id;
    std::set<std::string> recommended;
    std::set<std::string> cited;
    for (const auto& rec : log) {
        if (rec.result.status == tools::Status::Success) {
            ++r.success_count;
        } else {
            ++r.fail_count;
            auto base = base_task_id(rec.task_id);
            auto it = recommendations.find(base);
            if (it != recommendations.end() && recommended.insert(base).second)
                r.recommendations.push_back(it->second);
        }
        for (const auto& c : rec.cited)
            if (c.relevant && c.ref.rfind("doc:", 0) == 0 && cited.insert(c.ref).second)
                r.cited_policies.push_back(c.ref.substr(4));
    }
    r.status = r.fail_count == 0 ? ReportStatus::Resolved : ReportStatus::Incomplete;
    return r;
}

// ---------------------------------------------------------------------------

json MonitorRecord::to_json() const {
    return {{"ts", ts},         {"case_id", case_id}, {"step", step},     {"stage", stage}, {"agent", agent},
            {"tool", tool},     {"status", status},   {"digest", digest}, {"reasoning", reasoning}};
}

MonitorRecord MonitorRecord::from_json(const json& j) {
    return {j.at("ts").get<std::uint64_t>(),    j.at("case_id").get<std::string>(), j.at("step").get<std::uint64_t>(),
            j.at("stage").get<std::string>(),   j.at("agent").get<std::string>(),   j.at("tool").get<std::string>(),
            j.at("status").get<std::string>(),  j.at("digest").get<std::string>(),  j.value("reasoning", std::string{})};
}

void MonitorSink::emit(const MonitorRecord& r) noexcept {
    std::lock_guard lock(mu_);
    try {
        write_line(r.to_json().dump());
    } catch (const std::exception& e) {
        ++failures_;
        std::cerr << "monitor: dropped record for " << r.case_id << " step " << r.step << ": " << e.what() << '\n';
    } catch (...) {
        ++failures_;
    }
}

void JsonlMonitorSink::write_line(const std::string& line) {
    std::ofstream f(path_, std::ios::app);
    if (!f) throw Error(ErrorCode::Io, "cannot open " + path_);
    f << line << '\n';
    f.flush();
    if (!f) throw Error(ErrorCode::Io, "cannot write " + path_);
}

void emit_monitor_record(MonitorSink* sink, const MonitorRecord& r) {
    if (sink) sink->emit(r);
}

// ---------------------------------------------------------------------------

void EscalationQueue::append(const EscalationTicket& t) {
    std::lock_guard lock(mu_);
    std::ofstream f(path_, std::ios::app);
    if (!f) throw Error(ErrorCode::Io, "cannot open " + path_);
    f << json{{"ticket", t.to_json()}}.dump() << '\n';
}

bool EscalationQueue::ack(const std::string& case_id) {
    auto entries = list();
    bool found = std::any_of(entries.begin(), entries.end(),
                             [&](const Entry& e) { return e.ticket.case_id == case_id; });
    if (!found) return false;
    std::lock_guard lock(mu_);
    std::ofstream f(path_, std::ios::app);
    if (!f) throw Error(ErrorCode::Io, "cannot open " + path_);
    f << json{{"ack", case_id}}.dump() << '\n';
    return true;
}

std::vector<EscalationQueue::Entry> EscalationQueue::list() const {
    std::lock_guard lock(mu_);
    std::vector<Entry> out;
    std::ifstream f(path_);
    if (!f) return out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception&) {
            throw Error(ErrorCode::ParseError, path_ + ":" + std::to_string(lineno));
        }
        if (j.contains("ticket")) {
            out.push_back({EscalationTicket::from_json(j.at("ticket")), false});
        } else if (j.contains("ack")) {
            for (auto& e : out)
                if (e.ticket.case_id == j.at("ack")) e.acked = true;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

std::string default_graph_text() {
    std::string t =
        "NODES\n"
        "orchestrator proc\n"
        "supervisor agent\n"
        "logistics agent\n"
        "communications agent\n"
        "evidence_policy agent\n"
        "adjudication agent\n"
        "synthesize terminal resolved\n"
        "escalate terminal escalated\n"
        "EDGES\n"
        "orchestrator supervisor\n"
        "orchestrator escalate\n"
        "supervisor synthesize\n"
        "supervisor escalate\n";
    for (auto r : kWorkerRoles) {
        std::string n = node_of(r);
        t += "supervisor " + n + "\n" + n + " supervisor\n" + n + " " + n + "\n";
    }
    t +=
        "RULES\n"
        "orchestrator Planned supervisor\n"
        "orchestrator Unplannable escalate\n"
        "supervisor Complete synthesize\n"
        "supervisor Escalate escalate\n";
    for (auto r : kWorkerRoles) {
        std::string n = node_of(r);
        t += "supervisor TaskAssigned:" + std::string(agents::to_string(r)) + " " + n + "\n";
        t += n + " Success supervisor\n" + n + " Fail supervisor\n" + n + " Continue " + n + "\n";
    }
    t += "START\norchestrator\n";
    return t;
}

dcg::GraphSpec default_graph_spec() { return dcg::GraphSpec::parse(default_graph_text()); }

// ---------------------------------------------------------------------------

namespace {

const agents::AgentProfile& agent_by_id(const Deps& deps, const std::string& id) {
    for (const auto& a : deps.roster)
        if (a.agent_id == id) return a;
    throw Error(ErrorCode::InvariantViolation, "unknown agent " + id);
}

std::set<std::string> done_of(const memory::WorkingMemory& wm) {
    std::set<std::string> out;
    if (const auto* d = wm.get(key::kDone))
        for (const auto& x : *d) out.insert(x.get<std::string>());
    return out;
}

dcg::NodeOutput run_orchestrator(dcg::SystemState& s, Deps& deps) {
    auto& wm = s.working;
    auto event = core::DisruptionEvent::from_json(require(wm, key::kEvent));
    auto facts = core::extract_facts(event, *deps.routing);
    wm.put(agents::wm_key::kFacts, facts.to_json());
    auto route = core::classify_and_route(facts, *deps.routing);
    wm.put(key::kRoute, {{"category", std::string(core::to_string(route.category.label))},
                         {"confidence", route.category.confidence},
                         {"supervisor", route.supervisor_id}});
    wm.put(key::kLog, json::array());
    wm.put(key::kDone, json::array());

    std::vector<memory::EpisodeRef> episodes;
    if (deps.episodic) episodes = deps.episodic->query(facts, deps.episodic_k);
    std::vector<memory::Retrieved> docs;
    if (deps.semantic && deps.semantic->size()) docs = deps.semantic->retrieve_top_k(event.text, deps.semantic_k);
    try {
        auto p = agents::plan(*deps.templates, route.category.label, facts, episodes, docs);
        wm.put(key::kPlan, p.to_json());
        return {out::kPlanned, {{"template", p.template_name}, {"tasks", p.tasks.size()}}};
    } catch (const Error& e) {
        if (e.code() != ErrorCode::UnplannableCategory) throw;
        wm.put(key::kEscalation, std::string(to_string(EscalationReason::UnplannableCategory)));
        return {out::kUnplannable, {{"reason", e.what()}}};
    }
}

dcg::NodeOutput run_supervisor(dcg::SystemState& s, Deps& deps) {
    auto& wm = s.working;
    auto plan = agents::Plan::from_json(require(wm, key::kPlan));
    const auto& last = s.comp.last_output;
    if (last && last->cls == dcg::output::kFail && is_worker_node(s.comp.last_node)) {
        if (s.comp.failures >= kMaxAttempts) {
            wm.put(key::kEscalation, std::string(to_string(EscalationReason::BudgetExhausted)));
            return {out::kEscalate, {{"reason", "BudgetExhausted"}, {"tau", s.comp.failures}}};
        }
        auto failed = agents::Task::from_json(require(wm, key::kTask));
        auto log = log_of(wm);
        if (log.empty()) throw Error(ErrorCode::InvariantViolation, "failure without a record");
        try {
            plan = agents::replan(plan, failed, log.back().result);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::NoAlternative) throw;
            wm.put(key::kEscalation, std::string(to_string(EscalationReason::NoAlternative)));
            return {out::kEscalate, {{"reason", "NoAlternative"}, {"task_id", failed.task_id}}};
        }
        if (!agents::plan_is_acyclic(plan)) throw Error(ErrorCode::InvariantViolation, "replan produced a cycle");
        wm.put(key::kPlan, plan.to_json());
    }

    auto done = done_of(wm);
    const agents::Task* next = nullptr;
    bool pending = false;
    for (const auto& t : plan.tasks) {
        if (done.count(t.task_id)) continue;
        pending = true;
        bool ready = std::all_of(t.depends_on.begin(), t.depends_on.end(),
                                 [&](const std::string& d) { return done.count(d) != 0; });
        if (ready) {
            next = &t;
            break;
        }
    }
    if (!pending) return {out::kComplete, {{"tasks_done", done.size()}}};
    if (!next) throw Error(ErrorCode::InvariantViolation, "pending tasks but none ready");

    const agents::AgentProfile* agent = nullptr;
    try {
        agent = &agents::select_agent(*next, deps.roster);
    } catch (const Error& e) {
        throw Error(ErrorCode::InvariantViolation, e.what());
    }
    if (agent->role == agents::Role::Supervisor)
        throw Error(ErrorCode::InvariantViolation, "task " + next->task_id + " delegated to a supervisor");
    wm.put(key::kTask, next->to_json());
    wm.put(key::kAgent, agent->agent_id);
    return {std::string(out::kAssigned) + std::string(agents::to_string(agent->role)),
            {{"task_id", next->task_id}, {"agent", agent->agent_id}}};
}

dcg::NodeOutput run_worker(dcg::SystemState& s, Deps& deps, sim::World& world) {
    auto& wm = s.working;
    auto task = agents::Task::from_json(require(wm, key::kTask));
    const auto& agent = agent_by_id(deps, require(wm, key::kAgent).get<std::string>());
    auto event = core::DisruptionEvent::from_json(require(wm, key::kEvent));
    core::FactSet facts = core::FactSet::from_json(require(wm, agents::wm_key::kFacts));

    agents::Context ctx;
    ctx.query = agents::context_query(task, wm);
    if (deps.episodic) ctx.episodes = deps.episodic->query(facts, deps.episodic_k);
    if (deps.semantic && deps.semantic->size()) ctx.docs = deps.semantic->retrieve_top_k(ctx.query, deps.semantic_k);

    // The step this executor runs as; the counter advances after it returns.
    const std::uint64_t step = s.comp.step + 1;
    ExecutionRecord rec;
    rec.step = step;
    rec.task_id = task.task_id;
    rec.agent_id = agent.agent_id;
    rec.attempt = s.comp.failures;

    agents::ActionDecision d;
    try {
        d = deps.reasoner->reason(agent, task, ctx, wm, *deps.registry);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::ReasonerUnavailable) throw;
        d.reasoning = "reasoner unavailable";
        d.action = agents::ReportFail{e.what()};
    }
    rec.cited = d.cited;

    const tools::Redactor& redactor = deps.redactor ? *deps.redactor : tools::Redactor::defaults();
    if (auto* inv = std::get_if<agents::ToolInvocation>(&d.action)) {
        if (!agent.tool_allowlist.count(inv->tool)) {
            rec.result = tools::ToolResult::denied(tools::policy::kAllowlist);
        } else {
            tools::ToolCall call{event.id, step, inv->tool, inv->args};
            try {
                rec.result = tools::invoke_tool(*deps.registry, world, call, *deps.safety, redactor);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::UnknownTool && e.code() != ErrorCode::SchemaViolation) throw;
                rec.result = tools::ToolResult::fail(e.what());
            }
        }
        inv->args = redactor.redact_json(inv->args).first;
    } else if (const auto* f = std::get_if<agents::ReportFail>(&d.action)) {
        rec.result = tools::ToolResult::fail(redactor.redact(std::string_view(f->reason)).first);
    } else {
        rec.result = tools::ToolResult::ok(json::object());
    }
    rec.reasoning = redactor.redact(std::string_view(d.reasoning)).first;
    rec.action = d.action;

    json log = require(wm, key::kLog);
    log.push_back(rec.to_json());
    wm.put(key::kLog, std::move(log));

    json payload{{"task_id", task.task_id},
                 {"tool", rec.tool().value_or("")},
                 {"status", std::string(tools::to_string(rec.result.status))}};
    if (rec.result.status != tools::Status::Success) {
        payload["reason"] = rec.result.reason;
        return {dcg::output::kFail, payload};
    }
    if (rec.result.payload.is_object())
        for (const auto& [k, v] : rec.result.payload.items())
            wm.put(std::string(agents::wm_key::kCtxPrefix) + k, v);
    if (d.has_more) {
        task.cursor += 1;
        wm.put(key::kTask, task.to_json());
        return {out::kContinue, payload};
    }
    json done = require(wm, key::kDone);
    done.push_back(task.task_id);
    wm.put(key::kDone, std::move(done));
    return {dcg::output::kSuccess, payload};
}

dcg::ExecutorTable executors(Deps& deps, sim::World& world) {
    dcg::ExecutorTable t;
    t["orchestrator"] = [&deps](dcg::SystemState& s) { return run_orchestrator(s, deps); };
    t["supervisor"] = [&deps](dcg::SystemState& s) { return run_supervisor(s, deps); };
    for (auto r : kWorkerRoles)
        t[node_of(r)] = [&deps, &world](dcg::SystemState& s) { return run_worker(s, deps, world); };
    return t;
}

std::uint64_t monitor_ts(const core::DisruptionEvent& e, std::uint64_t step) { return e.received_at * 1000 + step; }

void check_deps(const Deps& deps) {
    if (!deps.registry || !deps.safety || !deps.templates || !deps.routing || !deps.reasoner)
        throw Error(ErrorCode::ValidationError, "orchestrator dependencies incomplete");
    if (deps.roster.empty()) throw Error(ErrorCode::ValidationError, "empty roster");
}

CaseResult run_case(dcg::SystemState state, dcg::Trace prior, sim::World& world, Deps& deps,
                    const RunOptions& options) {
    auto event = core::DisruptionEvent::from_json(require(state.working, key::kEvent));
    dcg::ExecuteHooks hooks;
    hooks.after_step = [&](const dcg::SystemState& s, const dcg::Trace& t) {
        if (options.crash_after_step && s.comp.step == *options.crash_after_step)
            throw dcg::Abort(ErrorCode::Io, "injected crash after step " + std::to_string(s.comp.step));
        if (!options.checkpoint_path.empty()) memory::checkpoint_save(s.working, options.checkpoint_path);
        const auto& entry = t.entries.back();
        if (entry.node == "orchestrator") {
            const auto* p = s.working.get(key::kPlan);
            emit_monitor_record(deps.monitor, {monitor_ts(event, entry.step), event.id, entry.step, "plan",
                                               require(s.working, key::kRoute).at("supervisor").get<std::string>(),
                                               "", entry.output.cls, p ? digest_of(*p) : digest_of(entry.output.payload),
                                               p ? p->at("reasoning").get<std::string>() : ""});
        } else if (is_worker_node(entry.node)) {
            auto rec = ExecutionRecord::from_json(require(s.working, key::kLog).back());
            emit_monitor_record(deps.monitor, {monitor_ts(event, entry.step), event.id, rec.step, "execute",
                                               rec.agent_id, rec.tool().value_or(""),
                                               std::string(tools::to_string(rec.result.status)),
                                               digest_of(rec.to_json()), rec.reasoning});
        }
    };

    auto trace = dcg::execute(default_graph(), state, executors(deps, world), options.step_limit, hooks,
                              std::move(prior));
    if (trace.terminal == dcg::Termination::StepLimit)
        throw Error(ErrorCode::InvariantViolation, "case " + event.id + " hit the step limit");

    CaseResult res;
    res.case_id = event.id;
    res.trace = std::move(trace);
    res.log = log_of(state.working);
    res.tau = state.comp.failures;
    if (const auto* p = state.working.get(key::kPlan)) res.plan = agents::Plan::from_json(*p);
    if (const auto* r = state.working.get(key::kRoute)) {
        res.route.category.label = core::category_from_string(r->at("category").get<std::string>()).value();
        res.route.category.confidence = r->at("confidence").get<double>();
        res.route.supervisor_id = r->at("supervisor").get<std::string>();
    }

    if (res.trace.terminal == dcg::Termination::Escalated) {
        auto reason = escalation_reason_from_string(require(state.working, key::kEscalation).get<std::string>());
        res.outcome = escalate(event, res.log, reason, event.received_at + state.comp.step, res.tau, deps);
        return res;
    }

    std::map<std::string, std::string> recs;
    if (const auto* tpl = deps.templates->find(res.plan.template_name)) recs = tpl->recommendations;
    auto report = synthesize(event.id, res.log, recs);
    if (deps.episodic && deps.persist_episode) {
        memory::Episode ep;
        ep.case_id = event.id;
        json ev = event.to_json();
        ev["text"] = (deps.redactor ? *deps.redactor : tools::Redactor::defaults()).redact(std::string_view(event.text)).first;
        ev["fields"] = (deps.redactor ? *deps.redactor : tools::Redactor::defaults()).redact_json(ev["fields"]).first;
        ep.event = ev;
        ep.event_digest = event.digest();
        ep.t = event.received_at;
        ep.category = std::string(core::to_string(res.route.category.label));
        ep.tags = memory::tags_of(core::FactSet::from_json(require(state.working, agents::wm_key::kFacts)));
        ep.plan = res.plan.to_json();
        json l = json::array();
        for (const auto& r : res.log) l.push_back(r.to_json());
        ep.log = l;
        ep.trace = res.trace.to_json();
        ep.trace_digest = res.trace.digest();
        ep.resolution = report.to_json();
        deps.episodic->append(std::move(ep));
    }
    emit_monitor_record(deps.monitor, {monitor_ts(event, state.comp.step), event.id, state.comp.step, "synthesize",
                                       res.route.supervisor_id, "", std::string(to_string(report.status)),
                                       digest_of(report.to_json()), ""});
    res.outcome = std::move(report);
    return res;
}

}  // namespace

EscalationTicket escalate(const core::DisruptionEvent& event, const std::vector<ExecutionRecord>& log,
                          EscalationReason reason, std::uint64_t created_at, std::uint32_t tau, Deps& deps) {
    EscalationTicket t{event.id, event.digest(), log, reason, created_at, tau};
    if (deps.safety) deps.safety->mark_escalated(event.id);
    if (deps.escalations) deps.escalations->append(t);
    emit_monitor_record(deps.monitor, {created_at * 1000, event.id, created_at - event.received_at, "escalate", "", "",
                                       std::string(to_string(reason)), digest_of(t.to_json()), ""});
    return t;
}

CaseResult resolve(const core::DisruptionEvent& event, sim::World& world, Deps& deps, const RunOptions& options) {
    check_deps(deps);
    dcg::SystemState state{memory::WorkingMemory(event.id, options.wm_capacity),
                           {deps.episodic, deps.semantic}, {}};
    state.working.put(key::kEvent, event.to_json());
    if (!options.checkpoint_path.empty()) memory::checkpoint_save(state.working, options.checkpoint_path);
    return run_case(std::move(state), {}, world, deps, options);
}

CaseResult resume(sim::World& world, Deps& deps, const RunOptions& options) {
    check_deps(deps);
    if (options.checkpoint_path.empty()) throw Error(ErrorCode::ValidationError, "resume needs a checkpoint path");
    auto wm = memory::checkpoint_restore(options.checkpoint_path);
    auto [comp, prior] = dcg::restore_progress(wm);
    dcg::SystemState state{std::move(wm), {deps.episodic, deps.semantic}, comp};
    return run_case(std::move(state), std::move(prior), world, deps, options);
}

std::vector<std::string> CaseResult::tool_sequence() const {
    std::vector<std::string> out;
    for (const auto& r : log)
        if (auto t = r.tool()) out.push_back(*t);
    return out;
}

json CaseResult::to_json() const {
    json l = json::array();
    for (const auto& r : log) l.push_back(r.to_json());
    json o = escalated() ? json{{"escalation", ticket()->to_json()}} : json{{"report", report()->to_json()}};
    return {{"case_id", case_id},
            {"outcome", o},
            {"log", l},
            {"plan", plan.to_json()},
            {"route",
             {{"category", std::string(core::to_string(route.category.label))},
              {"confidence", route.category.confidence},
              {"supervisor", route.supervisor_id}}},
            {"tau", tau},
            {"trace", trace.to_json()},
            {"trace_digest", trace.digest()}};
}

}  // namespace lmr::orch
