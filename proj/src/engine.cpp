#include "lmr/engine.hpp"

#include <filesystem>

namespace lmr {

namespace fs = std::filesystem;

Environment Environment::load(const std::string& data_dir) {
    if (!fs::is_directory(data_dir)) throw Error(ErrorCode::Io, "data directory " + data_dir + " not found");
    Environment env;
    env.data_dir = data_dir;
    env.registry = tools::default_registry();
    auto routing = data_dir + "/routing.tsv";
    env.routing = fs::exists(routing) ? core::RoutingTable::load(routing) : core::RoutingTable::defaults();
    auto safety = data_dir + "/safety.conf";
    if (fs::exists(safety)) env.safety_policy = tools::SafetyPolicy::load(safety);
    env.redactor = env.safety_policy.pii_patterns_path.empty()
                       ? tools::Redactor::defaults()
                       : tools::Redactor::load((fs::path(data_dir) / env.safety_policy.pii_patterns_path).string());
    env.templates = agents::TemplateLibrary::load_dir(data_dir + "/templates");
    env.semantic.load_dir(data_dir + "/policies");
    env.roster = agents::default_roster();
    agents::validate_roster(env.roster, env.registry, env.routing);
    return env;
}

sim::Scenario Environment::scenario(const std::string& key_or_path) const {
    if (fs::is_regular_file(key_or_path)) return sim::load_scenario(key_or_path, registry.names());
    auto p = corpus_dir() + "/" + key_or_path + ".scn";
    if (fs::is_regular_file(p)) return sim::load_scenario(p, registry.names());
    throw Error(ErrorCode::Io, "no scenario '" + key_or_path + "'");
}

std::vector<sim::Scenario> Environment::corpus() const { return corpus(corpus_dir()); }

std::vector<sim::Scenario> Environment::corpus(const std::string& dir) const {
    std::vector<sim::Scenario> out;
    for (const auto& f : sim::list_corpus(dir)) out.push_back(sim::load_scenario(f, registry.names()));
    return out;
}

std::string case_id_for(const sim::Scenario& s, std::uint64_t seed, const memory::EpisodicStore* store) {
    auto base = s.key + "-s" + std::to_string(seed);
    if (!store || !store->contains(base)) return base;
    for (std::uint64_t n = 2;; ++n) {
        auto id = base + "-r" + std::to_string(n);
        if (!store->contains(id)) return id;
    }
}

core::DisruptionEvent event_for(const sim::Scenario& s, const std::string& case_id, std::uint64_t received_at) {
    Clock clock(received_at - 1);
    core::EventIngestor ingest(clock);
    return ingest.ingest(case_id, s.reporter, s.event_text, s.key, s.fields);
}

CaseRun run_scenario(const Environment& env, const sim::Scenario& s, const RunSettings& settings) {
    static const agents::RuleReasoner rules;
    auto world = sim::World::from_scenario(s, settings.seed);
    for (const auto& f : settings.faults) world.inject_fault(f);

    tools::SafetyLayer safety(env.safety_policy);
    orch::Deps deps;
    deps.registry = &env.registry;
    deps.safety = &safety;
    deps.redactor = &env.redactor;
    deps.episodic = settings.episodic;
    deps.semantic = &env.semantic;
    deps.templates = &env.templates;
    deps.routing = &env.routing;
    deps.reasoner = settings.reasoner ? settings.reasoner : &rules;
    deps.roster = env.roster;
    deps.monitor = settings.monitor;
    deps.escalations = settings.escalations;

    auto case_id = case_id_for(s, settings.seed, settings.episodic);
    auto received = (settings.episodic ? settings.episodic->size() : 0) + 1;
    auto event = event_for(s, case_id, received);
    auto result = orch::resolve(event, world, deps, settings.options);
    return {s, settings.seed, std::move(result), world.state(), world.mutation_counts()};
}

BenchResult run_bench(const Environment& env, const std::vector<sim::Scenario>& scenarios,
                      const RunSettings& settings, const eval::Judge& judge, bool parallel) {
    const auto n = static_cast<long>(scenarios.size());
    std::vector<std::optional<CaseRun>> runs(scenarios.size());
    std::vector<std::unique_ptr<memory::EpisodicStore>> snapshots(scenarios.size());
    std::vector<orch::MemoryMonitorSink> sinks(scenarios.size());
    std::vector<std::string> errors(scenarios.size());

    for (std::size_t i = 0; i < scenarios.size(); ++i)
        snapshots[i] = settings.episodic ? std::make_unique<memory::EpisodicStore>(*settings.episodic)
                                         : std::make_unique<memory::EpisodicStore>();

#pragma omp parallel for schedule(dynamic) if (parallel)
    for (long i = 0; i < n; ++i) {
        auto idx = static_cast<std::size_t>(i);
        RunSettings local = settings;
        local.episodic = snapshots[idx].get();
        local.monitor = &sinks[idx];
        local.escalations = nullptr;
        local.options.checkpoint_path.clear();
        try {
            runs[idx] = run_scenario(env, scenarios[idx], local);
        } catch (const std::exception& e) {
            errors[idx] = e.what();
        }
    }

    BenchResult out;
    for (std::size_t i = 0; i < scenarios.size(); ++i) {
        if (!errors[i].empty()) throw Error(ErrorCode::InvariantViolation, scenarios[i].key + ": " + errors[i]);
        auto& run = *runs[i];
        if (settings.monitor)
            for (const auto& line : sinks[i].lines())
                settings.monitor->emit(orch::MonitorRecord::from_json(json::parse(line)));
        if (run.result.escalated()) {
            if (settings.escalations) settings.escalations->append(*run.result.ticket());
        } else if (settings.episodic && snapshots[i]->contains(run.result.case_id)) {
            for (const auto& ep : snapshots[i]->all())
                if (ep->case_id == run.result.case_id) settings.episodic->append(*ep);
        }
        out.scores.push_back(judge.score(eval::submission_of(run.scenario, run.result), &out.warnings));
        out.runs.push_back(std::move(run));
    }
    if (!out.scores.empty()) out.aggregate = eval::aggregate(out.scores);
    return out;
}

}  // namespace lmr
