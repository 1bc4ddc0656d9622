#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "lmr/agents.hpp"
#include "lmr/common.hpp"
#include "lmr/core.hpp"
#include "lmr/dcg.hpp"
#include "lmr/memory.hpp"
#include "lmr/simulator.hpp"
#include "lmr/toolkit.hpp"

namespace lmr::orch {

inline constexpr std::uint32_t kMaxAttempts = 3;

struct ExecutionRecord {
    std::uint64_t step = 0;
    std::string task_id;
    std::string agent_id;
    std::string reasoning;
    agents::Action action;
    tools::ToolResult result;
    std::uint32_t attempt = 0;  // failure budget when the step ran
    std::vector<agents::Citation> cited;

    std::optional<std::string> tool() const;
    json to_json() const;
    static ExecutionRecord from_json(const json& j);
};

enum class ReportStatus { Resolved, Incomplete };
std::string_view to_string(ReportStatus s);

struct ResolutionReport {
    std::string case_id;
    ReportStatus status = ReportStatus::Resolved;
    std::size_t success_count = 0;
    std::size_t fail_count = 0;
    std::vector<std::string> recommendations;
    std::vector<std::string> cited_policies;

    json to_json() const;
    static ResolutionReport from_json(const json& j);
};

enum class EscalationReason { BudgetExhausted, UnplannableCategory, NoAlternative };
std::string_view to_string(EscalationReason r);
EscalationReason escalation_reason_from_string(std::string_view s);

struct EscalationTicket {
    std::string case_id;
    std::string event_digest;
    std::vector<ExecutionRecord> log;
    EscalationReason reason = EscalationReason::BudgetExhausted;
    std::uint64_t created_at = 0;
    std::uint32_t tau = 0;

    json to_json() const;
    static EscalationTicket from_json(const json& j);
};

// Counts Success and Fail over the whole log (Denied counts as Fail); RESOLVED
// iff nothing failed. Recommendations come from `recommendations` (task id ->
// text) for every task with a failed record. Throws EmptyLog.
ResolutionReport synthesize(const std::string& case_id, const std::vector<ExecutionRecord>& log,
                            const std::map<std::string, std::string>& recommendations);

// ---------------------------------------------------------------------------
// Monitoring

struct MonitorRecord {
    std::uint64_t ts = 0;
    std::string case_id;
    std::uint64_t step = 0;
    std::string stage;  // plan | execute | synthesize | escalate
    std::string agent;
    std::string tool;
    std::string status;
    std::string digest;
    std::string reasoning;

    json to_json() const;
    static MonitorRecord from_json(const json& j);
    friend bool operator==(const MonitorRecord&, const MonitorRecord&) = default;
};

class MonitorSink {
public:
    virtual ~MonitorSink() = default;
    // Never throws; failures go to the fallback stream.
    void emit(const MonitorRecord& r) noexcept;
    std::size_t failures() const { return failures_; }

protected:
    virtual void write_line(const std::string& line) = 0;

private:
    std::mutex mu_;
    std::size_t failures_ = 0;
};

class JsonlMonitorSink final : public MonitorSink {
public:
    explicit JsonlMonitorSink(std::string path) : path_(std::move(path)) {}

protected:
    void write_line(const std::string& line) override;

private:
    std::string path_;
};

class MemoryMonitorSink final : public MonitorSink {
public:
    const std::vector<std::string>& lines() const { return lines_; }

protected:
    void write_line(const std::string& line) override { lines_.push_back(line); }

private:
    std::vector<std::string> lines_;
};

void emit_monitor_record(MonitorSink* sink, const MonitorRecord& r);

// ---------------------------------------------------------------------------

// Append-only JSONL queue of escalation tickets.
class EscalationQueue {
public:
    explicit EscalationQueue(std::string path) : path_(std::move(path)) {}

    void append(const EscalationTicket& t);
    // Returns false when no ticket has that case id.
    bool ack(const std::string& case_id);

    struct Entry {
        EscalationTicket ticket;
        bool acked = false;
    };
    std::vector<Entry> list() const;
    const std::string& path() const { return path_; }

private:
    std::string path_;
    mutable std::mutex mu_;
};

// ---------------------------------------------------------------------------

// The orchestration graph: orchestrator -> supervisor <-> workers, with
// synthesize and escalate terminals.
dcg::GraphSpec default_graph_spec();
std::string default_graph_text();

struct Deps {
    const tools::ToolRegistry* registry = nullptr;
    tools::SafetyLayer* safety = nullptr;
    const tools::Redactor* redactor = nullptr;
    memory::EpisodicStore* episodic = nullptr;
    const memory::SemanticStore* semantic = nullptr;
    const agents::TemplateLibrary* templates = nullptr;
    const core::RoutingTable* routing = nullptr;
    const agents::Reasoner* reasoner = nullptr;
    std::vector<agents::AgentProfile> roster;
    MonitorSink* monitor = nullptr;
    EscalationQueue* escalations = nullptr;
    std::size_t episodic_k = 3;
    std::size_t semantic_k = 4;
    bool persist_episode = true;
};

struct RunOptions {
    std::uint64_t step_limit = 256;
    std::size_t wm_capacity = 1024;
    // Working memory is checkpointed here after every step when set.
    std::string checkpoint_path;
    // Throws dcg::Abort after step `crash_after_step` completes, before its checkpoint.
    std::optional<std::uint64_t> crash_after_step;
};

struct CaseResult {
    std::string case_id;
    std::variant<ResolutionReport, EscalationTicket> outcome;
    dcg::Trace trace;
    std::vector<ExecutionRecord> log;
    agents::Plan plan;
    core::Route route;
    std::uint32_t tau = 0;

    bool escalated() const { return std::holds_alternative<EscalationTicket>(outcome); }
    const ResolutionReport* report() const { return std::get_if<ResolutionReport>(&outcome); }
    const EscalationTicket* ticket() const { return std::get_if<EscalationTicket>(&outcome); }
    // Tools of Success/Fail/Denied tool records, in order.
    std::vector<std::string> tool_sequence() const;
    json to_json() const;
};

CaseResult resolve(const core::DisruptionEvent& event, sim::World& world, Deps& deps,
                   const RunOptions& options = {});
// Continues a case from the working memory stored at `options.checkpoint_path`.
CaseResult resume(sim::World& world, Deps& deps, const RunOptions& options);

// Records a ticket, closes the case for Mutate/Financial tools and emits the
// escalate monitor record.
EscalationTicket escalate(const core::DisruptionEvent& event, const std::vector<ExecutionRecord>& log,
                          EscalationReason reason, std::uint64_t created_at, std::uint32_t tau, Deps& deps);

}  // namespace lmr::orch
