#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "lmr/common.hpp"
#include "lmr/memory.hpp"

namespace lmr::dcg {

using NodeId = std::string;

enum class NodeKind { Agent, Proc, Terminal };
enum class TerminalOutcome { Resolved, Escalated };

struct Node {
    NodeId id;
    NodeKind kind = NodeKind::Proc;
    TerminalOutcome outcome = TerminalOutcome::Resolved;  // Terminal nodes only
};

// Output classes are the finite alphabet the transition table matches on; the
// payload is opaque to the graph.
namespace output {
inline constexpr const char* kSuccess = "Success";
inline constexpr const char* kFail = "Fail";
inline constexpr const char* kHalt = "Halt";
}  // namespace output

struct NodeOutput {
    std::string cls;
    json payload = json::object();

    json to_json() const { return {{"class", cls}, {"payload", payload}}; }
    static NodeOutput from_json(const json& j) {
        return {j.at("class").get<std::string>(), j.at("payload")};
    }
    friend bool operator==(const NodeOutput&, const NodeOutput&) = default;
};

struct Rule {
    NodeId from;
    std::string cls;
    NodeId to;
};

// Unvalidated description, either built in code or parsed from a graph file.
struct GraphSpec {
    std::vector<Node> nodes;
    std::vector<std::pair<NodeId, NodeId>> edges;
    std::vector<Rule> rules;
    NodeId start;

    // Sections NODES / EDGES / RULES / START; '#' starts a comment line.
    //   NODES:  <id> agent|proc|terminal [resolved|escalated]
    //   EDGES:  <from> <to>
    //   RULES:  <from> <output-class> <to>
    //   START:  <id>
    static GraphSpec parse(std::string_view text);
    static GraphSpec load(const std::string& path);
};

class Graph {
public:
    const Node& node(const NodeId& id) const;
    bool has_node(const NodeId& id) const { return nodes_.count(id) != 0; }
    bool has_edge(const NodeId& a, const NodeId& b) const { return edges_.count({a, b}) != 0; }
    const NodeId& start() const { return start_; }
    const std::map<NodeId, Node>& nodes() const { return nodes_; }
    const std::set<std::pair<NodeId, NodeId>>& edges() const { return edges_; }
    const std::map<std::pair<NodeId, std::string>, NodeId>& rules() const { return rules_; }
    std::optional<NodeId> rule(const NodeId& from, const std::string& cls) const;
    std::set<NodeId> successors(const NodeId& id) const;

    // True if some node lies on a cycle: (a,b) in E and a reachable from b.
    bool has_cycle() const;

private:
    friend Graph build_graph(const GraphSpec& spec);
    std::map<NodeId, Node> nodes_;
    std::set<std::pair<NodeId, NodeId>> edges_;
    std::map<std::pair<NodeId, std::string>, NodeId> rules_;
    NodeId start_;
};

Graph build_graph(const GraphSpec& spec);

struct ComputationalState {
    std::uint64_t step = 0;
    std::uint32_t failures = 0;
    NodeId current;
    NodeId last_node;
    std::optional<NodeOutput> last_output;

    json to_json() const;
    static ComputationalState from_json(const json& j);
};

struct MemoryView {
    const memory::EpisodicStore* episodic = nullptr;
    const memory::SemanticStore* semantic = nullptr;
};

struct SystemState {
    memory::WorkingMemory working;
    MemoryView memory;
    ComputationalState comp;

    std::string digest() const;
};

enum class Termination { Resolved, Escalated, StepLimit };
std::string_view to_string(Termination t);

struct TraceEntry {
    std::uint64_t step = 0;
    NodeId node;
    std::string state_digest;
    NodeOutput output;

    json to_json() const;
    static TraceEntry from_json(const json& j);
};

struct Trace {
    std::vector<TraceEntry> entries;
    std::optional<Termination> terminal;

    std::string digest() const;
    json to_json() const;
    static Trace from_json(const json& j);
    // One line per entry: {step, node, output_class, payload_digest, state_digest}.
    std::string to_jsonl() const;
};

NodeId transition(const Graph& graph, const SystemState& state, const NodeOutput& output);
SystemState update_state(SystemState state, const NodeId& next, const NodeOutput& output);

using Executor = std::function<NodeOutput(SystemState&)>;
using ExecutorTable = std::map<NodeId, Executor>;

// Raised by executors for conditions that must abort the run instead of being
// folded into a Fail output.
class Abort : public Error {
public:
    using Error::Error;
};

struct ExecuteHooks {
    // Called after each step once the state and trace include it.
    std::function<void(const SystemState&, const Trace&)> after_step;
};

inline constexpr std::uint64_t kDefaultStepLimit = 64;
inline constexpr const char* kProgressKey = "dcg/progress";

// Runs the transition/update loop from state.comp.current (graph start when
// empty) until a terminal node has run or step_limit steps were taken in total.
// The trace so far is carried in `prior` so a restored run continues it.
Trace execute(const Graph& graph, SystemState& state, const ExecutorTable& executors,
              std::uint64_t step_limit = kDefaultStepLimit, const ExecuteHooks& hooks = {},
              Trace prior = {});

// Reads the computational state and trace back out of a working memory that
// was produced by execute().
std::pair<ComputationalState, Trace> restore_progress(const memory::WorkingMemory& wm);

}  // namespace lmr::dcg
