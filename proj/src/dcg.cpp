#include "lmr/dcg.hpp"

#include <deque>
#include <sstream>

namespace lmr::dcg {

namespace {

NodeKind kind_from(std::string_view s, std::size_t lineno) {
    if (s == "agent") return NodeKind::Agent;
    if (s == "proc") return NodeKind::Proc;
    if (s == "terminal") return NodeKind::Terminal;
    throw Error(ErrorCode::ParseError,
                "graph line " + std::to_string(lineno) + ": unknown node kind " + std::string(s));
}

std::vector<std::string> fields(std::string_view line) {
    std::vector<std::string> out;
    std::istringstream is{std::string(line)};
    std::string w;
    while (is >> w) out.push_back(w);
    return out;
}

}  // namespace

GraphSpec GraphSpec::parse(std::string_view text) {
    GraphSpec spec;
    std::string section;
    std::size_t lineno = 0;
    for (const auto& raw : split(text, '\n', true)) {
        ++lineno;
        if (raw.empty() || raw[0] == '#') continue;
        auto f = fields(raw);
        if (f.size() == 1 && (f[0] == "NODES" || f[0] == "EDGES" || f[0] == "RULES" || f[0] == "START")) {
            section = f[0];
            continue;
        }
        auto bad = [&](const char* what) {
            return Error(ErrorCode::ParseError, "graph line " + std::to_string(lineno) + ": " + what);
        };
        if (section == "NODES") {
            if (f.size() < 2 || f.size() > 3) throw bad("expected <id> <kind> [outcome]");
            Node n{f[0], kind_from(f[1], lineno), TerminalOutcome::Resolved};
            if (f.size() == 3) {
                if (f[2] == "escalated") n.outcome = TerminalOutcome::Escalated;
                else if (f[2] != "resolved") throw bad("terminal outcome must be resolved|escalated");
            }
            spec.nodes.push_back(std::move(n));
        } else if (section == "EDGES") {
            if (f.size() != 2) throw bad("expected <from> <to>");
            spec.edges.emplace_back(f[0], f[1]);
        } else if (section == "RULES") {
            if (f.size() != 3) throw bad("expected <from> <class> <to>");
            spec.rules.push_back({f[0], f[1], f[2]});
        } else if (section == "START") {
            if (f.size() != 1 || !spec.start.empty()) throw bad("START takes exactly one node");
            spec.start = f[0];
        } else {
            throw bad("content outside a section");
        }
    }
    return spec;
}

GraphSpec GraphSpec::load(const std::string& path) { return parse(read_file(path)); }

const Node& Graph::node(const NodeId& id) const {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) throw Error(ErrorCode::DanglingEdge, "unknown node " + id);
    return it->second;
}

std::optional<NodeId> Graph::rule(const NodeId& from, const std::string& cls) const {
    auto it = rules_.find({from, cls});
    if (it == rules_.end()) return std::nullopt;
    return it->second;
}

std::set<NodeId> Graph::successors(const NodeId& id) const {
    std::set<NodeId> out;
    for (auto it = edges_.lower_bound({id, NodeId{}}); it != edges_.end() && it->first == id; ++it)
        out.insert(it->second);
    return out;
}

bool Graph::has_cycle() const {
    for (const auto& [a, b] : edges_) {
        std::set<NodeId> seen{b};
        std::deque<NodeId> queue{b};
        while (!queue.empty()) {
            auto cur = queue.front();
            queue.pop_front();
            if (cur == a) return true;
            for (const auto& n : successors(cur))
                if (seen.insert(n).second) queue.push_back(n);
        }
    }
    return false;
}

Graph build_graph(const GraphSpec& spec) {
    Graph g;
    for (const auto& n : spec.nodes) {
        if (!g.nodes_.emplace(n.id, n).second)
            throw Error(ErrorCode::ValidationError, "duplicate node " + n.id);
    }
    if (!g.nodes_.count(spec.start)) throw Error(ErrorCode::UnknownStart, "start '" + spec.start + "'");
    g.start_ = spec.start;
    for (const auto& [a, b] : spec.edges) {
        if (!g.nodes_.count(a) || !g.nodes_.count(b))
            throw Error(ErrorCode::DanglingEdge, a + " -> " + b);
        g.edges_.insert({a, b});
    }
    for (const auto& r : spec.rules) {
        if (!g.nodes_.count(r.from) || !g.nodes_.count(r.to))
            throw Error(ErrorCode::DanglingEdge, "rule " + r.from + " " + r.cls + " -> " + r.to);
        if (!g.edges_.count({r.from, r.to}))
            throw Error(ErrorCode::RuleWithoutEdge, r.from + " " + r.cls + " -> " + r.to);
        auto [it, fresh] = g.rules_.emplace(std::make_pair(r.from, r.cls), r.to);
        if (!fresh && it->second != r.to)
            throw Error(ErrorCode::ValidationError, "conflicting rules for " + r.from + " " + r.cls);
    }
    std::set<NodeId> seen{g.start_};
    std::deque<NodeId> queue{g.start_};
    bool terminal = false;
    while (!queue.empty()) {
        auto cur = queue.front();
        queue.pop_front();
        if (g.nodes_.at(cur).kind == NodeKind::Terminal) terminal = true;
        for (const auto& n : g.successors(cur))
            if (seen.insert(n).second) queue.push_back(n);
    }
    if (!terminal) throw Error(ErrorCode::UnreachableTerminal, "no terminal reachable from " + g.start_);
    return g;
}

json ComputationalState::to_json() const {
    json j{{"step", step}, {"failures", failures}, {"current", current}, {"last_node", last_node}};
    j["last_output"] = last_output ? last_output->to_json() : json(nullptr);
    return j;
}

ComputationalState ComputationalState::from_json(const json& j) {
    ComputationalState c;
    c.step = j.at("step").get<std::uint64_t>();
    c.failures = j.at("failures").get<std::uint32_t>();
    c.current = j.at("current").get<std::string>();
    c.last_node = j.at("last_node").get<std::string>();
    if (!j.at("last_output").is_null()) c.last_output = NodeOutput::from_json(j.at("last_output"));
    return c;
}

std::string SystemState::digest() const {
    auto h = fnv1a(comp.to_json().dump());
    h = fnv1a(working.digest(), h);
    return hex_digest(h);
}

std::string_view to_string(Termination t) {
    switch (t) {
        case Termination::Resolved: return "Resolved";
        case Termination::Escalated: return "Escalated";
        case Termination::StepLimit: return "StepLimit";
    }
    return "StepLimit";
}

json TraceEntry::to_json() const {
    return {{"step", step}, {"node", node}, {"state_digest", state_digest}, {"output", output.to_json()}};
}

TraceEntry TraceEntry::from_json(const json& j) {
    return {j.at("step").get<std::uint64_t>(), j.at("node").get<std::string>(),
            j.at("state_digest").get<std::string>(), NodeOutput::from_json(j.at("output"))};
}

json Trace::to_json() const {
    json entries_j = json::array();
    for (const auto& e : entries) entries_j.push_back(e.to_json());
    return {{"entries", entries_j},
            {"terminal", terminal ? json(std::string(to_string(*terminal))) : json(nullptr)}};
}

Trace Trace::from_json(const json& j) {
    Trace t;
    for (const auto& e : j.at("entries")) t.entries.push_back(TraceEntry::from_json(e));
    const auto& term = j.at("terminal");
    if (!term.is_null()) {
        for (auto v : {Termination::Resolved, Termination::Escalated, Termination::StepLimit})
            if (term == to_string(v)) t.terminal = v;
    }
    return t;
}

std::string Trace::digest() const { return digest_of(to_json()); }

std::string Trace::to_jsonl() const {
    std::string out;
    for (const auto& e : entries) {
        json line{{"step", e.step},
                  {"node", e.node},
                  {"output_class", e.output.cls},
                  {"payload_digest", digest_of(e.output.payload)},
                  {"state_digest", e.state_digest}};
        out += line.dump();
        out += '\n';
    }
    return out;
}

NodeId transition(const Graph& graph, const SystemState& state, const NodeOutput& output) {
    const auto& cur = graph.node(state.comp.current);
    if (cur.kind == NodeKind::Terminal) return cur.id;
    auto next = graph.rule(cur.id, output.cls);
    if (!next)
        throw Error(ErrorCode::NoRuleMatches, "node " + cur.id + " has no rule for " + output.cls);
    return *next;
}

SystemState update_state(SystemState state, const NodeId& next, const NodeOutput& output) {
    state.comp.step += 1;
    if (output.cls == output::kFail) state.comp.failures += 1;
    state.comp.last_node = state.comp.current;
    state.comp.current = next;
    state.comp.last_output = output;
    state.working.put("out/" + std::to_string(state.comp.step),
                      {{"node", state.comp.last_node}, {"output", output.to_json()}});
    return state;
}

Trace execute(const Graph& graph, SystemState& state, const ExecutorTable& executors,
              std::uint64_t step_limit, const ExecuteHooks& hooks, Trace prior) {
    if (step_limit == 0) throw Error(ErrorCode::ValidationError, "step_limit must be >= 1");
    for (const auto& [id, n] : graph.nodes())
        if (n.kind != NodeKind::Terminal && !executors.count(id))
            throw Error(ErrorCode::MissingExecutor, id);

    Trace trace = std::move(prior);
    trace.terminal.reset();
    if (state.comp.current.empty()) state.comp.current = graph.start();

    while (true) {
        if (state.comp.step >= step_limit) {
            trace.terminal = Termination::StepLimit;
            break;
        }
        const Node& node = graph.node(state.comp.current);
        NodeOutput out{output::kHalt, json::object()};
        if (auto it = executors.find(node.id); it != executors.end()) {
            try {
                out = it->second(state);
            } catch (const Abort&) {
                throw;
            } catch (const Error& e) {
                if (e.code() == ErrorCode::InvariantViolation) throw;
                out = NodeOutput{output::kFail, {{"error", e.what()}}};
            } catch (const std::exception& e) {
                out = NodeOutput{output::kFail, {{"error", e.what()}}};
            }
        }
        auto next = transition(graph, state, out);
        state = update_state(std::move(state), next, out);
        trace.entries.push_back({state.comp.step, node.id, state.digest(), out});
        if (node.kind == NodeKind::Terminal)
            trace.terminal = node.outcome == TerminalOutcome::Resolved ? Termination::Resolved
                                                                       : Termination::Escalated;
        state.working.put(kProgressKey, {{"comp", state.comp.to_json()}, {"trace", trace.to_json()}});
        if (hooks.after_step) hooks.after_step(state, trace);
        if (node.kind == NodeKind::Terminal) break;
    }
    return trace;
}

std::pair<ComputationalState, Trace> restore_progress(const memory::WorkingMemory& wm) {
    const auto* p = wm.get(kProgressKey);
    if (!p) return {ComputationalState{}, Trace{}};
    auto trace = Trace::from_json(p->at("trace"));
    trace.terminal.reset();
    return {ComputationalState::from_json(p->at("comp")), std::move(trace)};
}

}  // namespace lmr::dcg
