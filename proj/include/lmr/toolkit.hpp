#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "lmr/common.hpp"
#include "lmr/simulator.hpp"

namespace lmr::tools {

enum class ParamType { String, Number, Boolean };
enum class EffectClass { Read, Notify, Mutate, Financial };

std::string_view to_string(EffectClass e);
std::string_view to_string(ParamType t);

struct ParamSpec {
    std::string name;
    ParamType type = ParamType::String;
    bool required = true;
    // Marks the amount a Financial tool's limit applies to.
    bool financial_amount = false;
};

struct ToolCall {
    std::string case_id;
    std::uint64_t step = 0;
    std::string tool;
    json args = json::object();

    json to_json() const { return {{"case_id", case_id}, {"step", step}, {"tool", tool}, {"args", args}}; }
};

enum class Status { Success, Fail, Denied };
std::string_view to_string(Status s);
Status status_from_string(std::string_view s);

struct ToolResult {
    Status status = Status::Success;
    std::string reason;  // failure reason, or violated policy id when Denied
    json payload = json::object();
    std::size_t redactions = 0;

    json to_json() const;
    static ToolResult from_json(const json& j);

    static ToolResult ok(json payload) { return {Status::Success, {}, std::move(payload), 0}; }
    static ToolResult fail(std::string reason, json payload = json::object()) {
        return {Status::Fail, std::move(reason), std::move(payload), 0};
    }
    static ToolResult denied(std::string policy) {
        return {Status::Denied, policy, {{"policy", policy}}, 0};
    }
};

// A backend reads/mutates the world through its arguments and returns a result.
// Effects must go through World::apply so the toolkit can count them.
using Backend = std::function<ToolResult(sim::World&, const json& args)>;

struct ToolSpec {
    std::string name;
    std::vector<ParamSpec> params;
    EffectClass effect = EffectClass::Read;
    Backend backend;
};

// ---------------------------------------------------------------------------
// PII redaction

struct PiiPattern {
    std::string label;
    std::regex re;
};

class Redactor {
public:
    Redactor() = default;
    explicit Redactor(std::vector<PiiPattern> patterns) : patterns_(std::move(patterns)) {}

    static Redactor defaults();
    // One pattern per line: LABEL <TAB> regex. '#' starts a comment.
    static Redactor parse(std::string_view text);
    static Redactor load(const std::string& path);

    // Replaces each match with "[LABEL]".
    std::pair<std::string, std::size_t> redact(std::string_view text) const;
    // Redacts every string value inside a JSON document.
    std::pair<json, std::size_t> redact_json(const json& value) const;
    bool contains_pii(std::string_view text) const;
    const std::vector<PiiPattern>& patterns() const { return patterns_; }

private:
    std::vector<PiiPattern> patterns_;
};

std::pair<std::string, std::size_t> redact_pii(std::string_view text);

// ---------------------------------------------------------------------------
// Safety layer

struct SafetyPolicy {
    double financial_limit = 500.0;
    std::string pii_patterns_path;

    // financial_limit=<n> and pii_patterns=<file>, one per line.
    static SafetyPolicy parse(std::string_view text);
    static SafetyPolicy load(const std::string& path);
};

namespace policy {
inline constexpr const char* kFinancialLimit = "financial-limit";
inline constexpr const char* kEscalatedCase = "escalated-case";
inline constexpr const char* kAllowlist = "agent-allowlist";
}  // namespace policy

// nullopt = allow, otherwise the violated policy id.
std::optional<std::string> check_safety(const ToolCall& call, const ToolSpec& spec,
                                        const SafetyPolicy& policy, bool case_escalated);

// Holds the policy plus the set of closed (escalated) cases.
class SafetyLayer {
public:
    explicit SafetyLayer(SafetyPolicy policy = {}) : policy_(std::move(policy)) {}

    const SafetyPolicy& policy() const { return policy_; }
    void mark_escalated(const std::string& case_id);
    bool escalated(const std::string& case_id) const;
    std::optional<std::string> check(const ToolCall& call, const ToolSpec& spec) const;

private:
    SafetyPolicy policy_;
    mutable std::mutex mu_;
    std::set<std::string> escalated_;
};

// ---------------------------------------------------------------------------
// Registry

class ToolRegistry {
public:
    void register_tool(ToolSpec spec);
    const ToolSpec* find(const std::string& name) const;
    std::vector<std::string> list() const;  // name order
    std::set<std::string> names() const;
    std::size_t size() const { return tools_.size(); }

    // Validates args against the schema; throws SchemaViolation.
    void validate(const ToolCall& call) const;

private:
    std::map<std::string, ToolSpec> tools_;
};

// The 15 catalog tools bound to the simulated world.
ToolRegistry default_registry();
std::vector<std::string> catalog_tool_names();

// Safety check, then the backend under the world's lock. Results are journaled
// per (case_id, step): a repeated key returns the recorded result and applies
// no effect. Payloads are PII-redacted.
// Throws UnknownTool / SchemaViolation.
ToolResult invoke_tool(const ToolRegistry& registry, sim::World& world, const ToolCall& call,
                       const SafetyLayer& safety, const Redactor& redactor = Redactor::defaults());

}  // namespace lmr::tools
