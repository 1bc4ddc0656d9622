#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lmr/agents.hpp"
#include "lmr/evaluation.hpp"
#include "lmr/orchestrator.hpp"
#include "lmr/simulator.hpp"

namespace lmr {

// Static configuration loaded once from a data directory:
//   routing.tsv, safety.conf (+ its pii pattern file), templates/*.plan,
//   policies/* (semantic corpus), corpus/*.scn.
struct Environment {
    std::string data_dir;
    tools::ToolRegistry registry;
    core::RoutingTable routing;
    tools::SafetyPolicy safety_policy;
    tools::Redactor redactor;
    agents::TemplateLibrary templates;
    memory::SemanticStore semantic;
    std::vector<agents::AgentProfile> roster;

    static Environment load(const std::string& data_dir);
    std::string corpus_dir() const { return data_dir + "/corpus"; }
    // Scenario by corpus key or by path to a .scn file. Throws Io when neither exists.
    sim::Scenario scenario(const std::string& key_or_path) const;
    std::vector<sim::Scenario> corpus() const;
    std::vector<sim::Scenario> corpus(const std::string& dir) const;
};

struct CaseRun {
    sim::Scenario scenario;
    std::uint64_t seed = 0;
    orch::CaseResult result;
    sim::WorldState final_world;
    std::map<std::pair<std::string, std::uint64_t>, int> mutations;
};

struct RunSettings {
    std::uint64_t seed = 1;
    const agents::Reasoner* reasoner = nullptr;  // rule reasoner when null
    memory::EpisodicStore* episodic = nullptr;
    orch::MonitorSink* monitor = nullptr;
    orch::EscalationQueue* escalations = nullptr;
    orch::RunOptions options;
    // Extra faults layered over the scenario's own.
    std::vector<sim::FaultSpec> faults;
};

// Case id for a scenario run: "<key>-s<seed>", suffixed "-r<n>" when the
// episodic store already holds it.
std::string case_id_for(const sim::Scenario& s, std::uint64_t seed, const memory::EpisodicStore* store);

core::DisruptionEvent event_for(const sim::Scenario& s, const std::string& case_id, std::uint64_t received_at);

CaseRun run_scenario(const Environment& env, const sim::Scenario& s, const RunSettings& settings);

struct BenchResult {
    std::vector<CaseRun> runs;  // corpus order
    std::vector<eval::ScoreVector> scores;
    eval::AggregateReport aggregate;
    std::vector<std::string> warnings;
};

// Every scenario sees the episodic store as it was when the bench started;
// new episodes, monitor lines and tickets are committed in corpus order.
// `parallel` runs cases on OpenMP threads.
BenchResult run_bench(const Environment& env, const std::vector<sim::Scenario>& scenarios,
                      const RunSettings& settings, const eval::Judge& judge, bool parallel);

}  // namespace lmr
