#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "lmr/common.hpp"
#include "lmr/core.hpp"
#include "lmr/memory.hpp"
#include "lmr/toolkit.hpp"

namespace lmr::agents {

enum class Role { Supervisor, Logistics, Communications, EvidencePolicy, Adjudication };

std::string_view to_string(Role r);
Role role_from_string(std::string_view s);

struct AgentProfile {
    std::string agent_id;
    Role role = Role::Supervisor;
    std::set<std::string> capabilities;
    std::set<std::string> tool_allowlist;
};

// Four workers followed by one supervisor per routing target.
std::vector<AgentProfile> default_roster();

// Allowlists within the registry, nonempty worker capabilities, exactly one
// supervisor per supervisor id named by the routing table. Throws ValidationError.
void validate_roster(const std::vector<AgentProfile>& roster, const tools::ToolRegistry& registry,
                     const core::RoutingTable& routing);

// ---------------------------------------------------------------------------
// Tasks and plans

struct Task {
    std::string task_id;
    std::string tag;
    std::string description;
    // Parameter bindings: "@fact:<key>", "@wm:<key>" or a literal.
    std::map<std::string, std::string> params;
    std::set<std::string> depends_on;
    // Tool sequence; empty for tasks whose actions come from a retrieved policy.
    std::vector<std::string> tools;
    std::size_t cursor = 0;  // index of the next action
    std::uint32_t attempt = 0;

    // Replanning metadata.
    std::vector<std::string> alt_tools;
    std::map<std::string, std::string> alt_params;
    bool retryable = false;
    std::string compensate;  // tool of the compensating notification

    json to_json() const;
    static Task from_json(const json& j);
    friend bool operator==(const Task&, const Task&) = default;
};

struct Plan {
    std::vector<Task> tasks;
    std::uint32_t origin = 0;  // 0 = Initial, n = Replanned(n)
    std::string template_name;
    std::string reasoning;

    bool initial() const { return origin == 0; }
    const Task* find(const std::string& task_id) const;
    json to_json() const;
    static Plan from_json(const json& j);
    friend bool operator==(const Plan&, const Plan&) = default;
};

// Kahn's algorithm over depends_on; also requires each dependency to precede
// its dependent in list order.
bool plan_is_acyclic(const Plan& plan);

struct PlanTemplate {
    std::string name;
    std::vector<core::Category> categories;
    std::vector<Task> tasks;
    std::map<std::string, std::string> recommendations;  // task id -> text
};

class TemplateLibrary {
public:
    // Line format:
    //   template <name>
    //   category <Category>
    //   task <id> <tag> [tools=a,b] [params=k=v;k=v] [alt=a,b] [alt_params=k=v]
    //        [retry] [compensate=<tool>] [after=id,id] [desc=words_with_underscores]
    //   recommend <task id> <free text>
    //   end
    static TemplateLibrary parse(std::string_view text, const std::string& origin = "<templates>");
    static TemplateLibrary load_dir(const std::string& dir);

    void add(PlanTemplate t);
    const PlanTemplate* for_category(core::Category c) const;
    const PlanTemplate* find(const std::string& name) const;
    const std::vector<PlanTemplate>& templates() const { return templates_; }

private:
    std::vector<PlanTemplate> templates_;
};

Plan plan(const TemplateLibrary& library, core::Category category, const core::FactSet& facts,
          const std::vector<memory::EpisodeRef>& episodic_context,
          const std::vector<memory::Retrieved>& semantic_context);

// Utility of an agent for a task: 1 when the task tag is among its capabilities.
double utility(const AgentProfile& agent, const Task& task);

const AgentProfile& select_agent(const Task& task, const std::vector<AgentProfile>& roster);
// Same argmax over caller-supplied utilities (one per roster entry).
std::size_t argmax_utility(const std::vector<double>& utilities);

// ---------------------------------------------------------------------------
// Reasoning

struct ToolInvocation {
    std::string tool;
    json args = json::object();
    friend bool operator==(const ToolInvocation&, const ToolInvocation&) = default;
};
struct ReportSuccess {
    friend bool operator==(const ReportSuccess&, const ReportSuccess&) = default;
};
struct ReportFail {
    std::string reason;
    friend bool operator==(const ReportFail&, const ReportFail&) = default;
};
using Action = std::variant<ToolInvocation, ReportSuccess, ReportFail>;

json action_to_json(const Action& a);
Action action_from_json(const json& j);

struct Citation {
    std::string ref;  // "doc:<id>" or "episode:<case id>"
    bool relevant = false;
    friend bool operator==(const Citation&, const Citation&) = default;
};

struct Context {
    std::string query;
    std::vector<memory::EpisodeRef> episodes;
    std::vector<memory::Retrieved> docs;
};

// Query text for the retrieval step of a task.
std::string context_query(const Task& task, const memory::WorkingMemory& wm);

// Whether a document shares a content word with the query.
bool is_relevant(std::string_view query, std::string_view doc_text);

struct ActionDecision {
    std::string reasoning;
    Action action;
    std::vector<Citation> cited;
    bool has_more = false;

    json to_json() const;
};

// Working-memory keys shared by the reasoner and the orchestrator.
namespace wm_key {
inline constexpr const char* kFacts = "case/facts";
inline constexpr const char* kCtxPrefix = "ctx/";
}  // namespace wm_key

class Reasoner {
public:
    virtual ~Reasoner() = default;
    virtual ActionDecision reason(const AgentProfile& agent, const Task& task, const Context& context,
                                  const memory::WorkingMemory& wm,
                                  const tools::ToolRegistry& registry) const = 0;
    virtual std::string id() const = 0;
};

// Deterministic policy table over (role, task tag, working-memory facts).
class RuleReasoner final : public Reasoner {
public:
    ActionDecision reason(const AgentProfile& agent, const Task& task, const Context& context,
                          const memory::WorkingMemory& wm,
                          const tools::ToolRegistry& registry) const override;
    std::string id() const override { return "rules"; }
};

// Reads "applies-to:" and "actions:" lines from a policy document.
struct PolicyDirective {
    std::set<std::string> applies_to;
    std::vector<std::string> actions;
};
std::optional<PolicyDirective> parse_policy(std::string_view text);

// Binds every schema parameter of `tool`: task binding, then the fact of the
// same name, then working memory "ctx/<name>". Missing optional params are
// omitted; a missing required param is reported in `missing`.
json bind_args(const tools::ToolSpec& spec, const Task& task, const memory::WorkingMemory& wm,
               std::vector<std::string>* missing = nullptr);

// HTTP client for an external completion service.
// POST {role, task, context[], working_memory_digest} -> {reasoning, action, args, more?}.
class RemoteReasoner final : public Reasoner {
public:
    explicit RemoteReasoner(std::string url, double timeout_seconds = 5.0);
    // URL from LMR_REMOTE_URL; throws ReasonerUnavailable when unset.
    static std::unique_ptr<RemoteReasoner> from_env();

    ActionDecision reason(const AgentProfile& agent, const Task& task, const Context& context,
                          const memory::WorkingMemory& wm,
                          const tools::ToolRegistry& registry) const override;
    std::string id() const override { return "remote"; }

private:
    std::string url_;
    double timeout_;
};

// Posts a JSON body and parses the JSON reply. Throws `on_failure` on
// connection errors, timeouts, non-200 replies and malformed bodies.
json post_json(const std::string& url, const json& body, double timeout_seconds, ErrorCode on_failure);

// ---------------------------------------------------------------------------

// Substitute an unused alternative, else retry a retryable task from the failed
// action, else drop it and append its compensating notification.
// Throws NoAlternative when none applies.
Plan replan(const Plan& plan, const Task& failed_task, const tools::ToolResult& failure);

}  // namespace lmr::agents
