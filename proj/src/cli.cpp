#include "lmr/cli.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "CLI11.hpp"
#include "lmr/engine.hpp"

namespace lmr::cli {

namespace fs = std::filesystem;

namespace {

// Argument problems found after parsing (missing scenario, unknown case, ...).
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string num(double v) { return json(v).dump(); }

std::string fixed4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

struct Common {
    std::string data_dir = LMR_DEFAULT_DATA_DIR;
    std::string state_dir = ".lmr-state";
};

struct StatePaths {
    fs::path root;
    fs::path episodes() const { return root / "episodes.jsonl"; }
    fs::path monitor() const { return root / "monitor.jsonl"; }
    fs::path escalations() const { return root / "escalations.jsonl"; }
    fs::path traces() const { return root / "traces"; }
    fs::path trace(const std::string& case_id) const { return traces() / (case_id + ".json"); }

    void create() const { fs::create_directories(traces()); }
};

json expected_json(const std::optional<sim::Expected>& e) {
    if (!e) return nullptr;
    return {{"tools", e->tools}, {"status", e->status ? json(*e->status) : json(nullptr)}};
}

std::optional<sim::Expected> expected_from(const json& j) {
    if (j.is_null()) return std::nullopt;
    sim::Expected e;
    e.tools = j.at("tools").get<std::vector<std::string>>();
    if (!j.at("status").is_null()) e.status = j.at("status").get<std::string>();
    return e;
}

void export_trace(const StatePaths& state, const CaseRun& run) {
    json doc{{"scenario", run.scenario.key},
             {"seed", run.seed},
             {"expected", expected_json(run.scenario.expected)},
             {"result", run.result.to_json()}};
    std::ofstream f(state.trace(run.result.case_id), std::ios::trunc);
    if (!f) throw Error(ErrorCode::Io, "cannot write trace for " + run.result.case_id);
    f << doc.dump(2) << '\n';
}

std::string action_text(const agents::Action& a) {
    if (const auto* t = std::get_if<agents::ToolInvocation>(&a)) return t->tool + " " + t->args.dump();
    if (const auto* f = std::get_if<agents::ReportFail>(&a)) return "report_fail: " + f->reason;
    return "report_success";
}

void print_log(std::ostream& out, const std::vector<orch::ExecutionRecord>& log) {
    for (const auto& r : log) {
        out << "  [" << r.step << "] " << r.task_id << " (" << r.agent_id << ") " << action_text(r.action) << " -> "
            << tools::to_string(r.result.status);
        if (!r.result.reason.empty()) out << " (" << r.result.reason << ")";
        out << '\n';
    }
}

void print_outcome(std::ostream& out, const orch::CaseResult& res) {
    if (const auto* rep = res.report()) {
        out << "status: " << orch::to_string(rep->status) << " (success " << rep->success_count << ", fail "
            << rep->fail_count << ")\n";
        for (const auto& r : rep->recommendations) out << "recommendation: " << r << '\n';
        for (const auto& p : rep->cited_policies) out << "cited: " << p << '\n';
    } else {
        const auto* t = res.ticket();
        out << "status: ESCALATED (" << orch::to_string(t->reason) << ", tau " << t->tau << ")\n";
    }
}

void print_case(std::ostream& out, const orch::CaseResult& res) {
    out << "case: " << res.case_id << '\n';
    out << "category: " << core::to_string(res.route.category.label) << " (confidence "
        << fixed4(res.route.category.confidence) << ") -> " << res.route.supervisor_id << '\n';
    out << "plan: " << (res.plan.template_name.empty() ? "-" : res.plan.template_name) << ", "
        << res.plan.tasks.size() << " tasks, revision " << res.plan.origin << '\n';
    out << "actions:\n";
    print_log(out, res.log);
    auto seq = res.tool_sequence();
    out << "tools:";
    for (const auto& t : seq) out << ' ' << t;
    out << '\n';
    print_outcome(out, res);
    out << "trace digest: " << res.trace.digest() << '\n';
}

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    std::string line() const {
        auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
        char buf[64];
        std::snprintf(buf, sizeof buf, "wall-clock: %.1f ms\n", ms);
        return buf;
    }

private:
    std::chrono::steady_clock::time_point start_;
};

Environment load_env(const Common& c) {
    if (!fs::is_directory(c.data_dir)) throw UsageError("data directory '" + c.data_dir + "' not found");
    return Environment::load(c.data_dir);
}

std::unique_ptr<agents::Reasoner> make_reasoner(const std::string& name) {
    if (name == "remote") return agents::RemoteReasoner::from_env();
    return nullptr;
}

std::unique_ptr<eval::Judge> make_judge(const std::string& name) {
    if (name == "remote") return eval::RemoteJudge::from_env();
    return std::make_unique<eval::ScriptedJudge>();
}

void check_level(double level) {
    try {
        eval::z_for_level(level);
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
}

std::string resolve_corpus_dir(const Environment& env, const std::string& arg) {
    if (fs::is_directory(arg)) return arg;
    auto under = fs::path(env.data_dir) / arg;
    if (fs::is_directory(under)) return under.string();
    throw UsageError("corpus directory '" + arg + "' not found");
}

// ---------------------------------------------------------------------------

struct RunArgs {
    std::string scenario;
    std::uint64_t seed = 1;
    std::string reasoner = "rules";
    bool json_out = false;
};

int cmd_run(const Common& c, const RunArgs& a, std::ostream& out) {
    auto env = load_env(c);
    sim::Scenario scenario;
    try {
        scenario = env.scenario(a.scenario);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::Io) throw UsageError(e.what());
        throw;
    }
    auto reasoner = make_reasoner(a.reasoner);

    StatePaths state{c.state_dir};
    state.create();
    memory::EpisodicStore episodic(state.episodes().string());
    orch::JsonlMonitorSink monitor(state.monitor().string());
    orch::EscalationQueue queue(state.escalations().string());

    Stopwatch clock;
    RunSettings settings;
    settings.seed = a.seed;
    settings.reasoner = reasoner.get();
    settings.episodic = &episodic;
    settings.monitor = &monitor;
    settings.escalations = &queue;
    auto run = run_scenario(env, scenario, settings);
    export_trace(state, run);

    if (a.json_out) {
        out << run.result.to_json().dump(2) << '\n';
    } else {
        out << "scenario: " << scenario.key << " (seed " << a.seed << ")\n";
        print_case(out, run.result);
    }
    out << clock.line();
    return kOk;
}

struct BenchArgs {
    std::string corpus = "corpus";
    std::uint64_t seed = 1;
    std::string reasoner = "rules";
    std::string judge = "scripted";
    std::string agent_family = "lmr-rules";
    std::string judge_family = "lmr-scripted";
    double level = 0.95;
    bool serial = false;
    std::string jsonl;
};

int cmd_bench(const Common& c, const BenchArgs& a, std::ostream& out, std::ostream& err) {
    eval::enforce_judge_family(a.judge_family, a.agent_family);
    check_level(a.level);
    auto env = load_env(c);
    auto scenarios = env.corpus(resolve_corpus_dir(env, a.corpus));
    if (scenarios.empty()) throw UsageError("corpus '" + a.corpus + "' has no scenarios");
    auto reasoner = make_reasoner(a.reasoner);
    auto judge = make_judge(a.judge);

    StatePaths state{c.state_dir};
    state.create();
    memory::EpisodicStore episodic(state.episodes().string());
    orch::JsonlMonitorSink monitor(state.monitor().string());
    orch::EscalationQueue queue(state.escalations().string());

    Stopwatch clock;
    RunSettings settings;
    settings.seed = a.seed;
    settings.reasoner = reasoner.get();
    settings.episodic = &episodic;
    settings.monitor = &monitor;
    settings.escalations = &queue;
    auto bench = run_bench(env, scenarios, settings, *judge, !a.serial);
    for (const auto& run : bench.runs) export_trace(state, run);

    for (std::size_t i = 0; i < bench.runs.size(); ++i) {
        const auto& run = bench.runs[i];
        const auto& s = bench.scores[i];
        std::string status = run.result.escalated() ? "ESCALATED"
                                                    : std::string(orch::to_string(run.result.report()->status));
        char line[256];
        std::snprintf(line, sizeof line, "%-28s %-10s steps=%-3zu correct=%.4f reason=%.4f safety=%.4f\n",
                      run.scenario.key.c_str(), status.c_str(), run.result.log.size(), s.s_correct, s.s_reason,
                      s.s_safety);
        out << line;
    }
    out << '\n';
    auto report = eval::aggregate(bench.scores, a.level);
    report.agent_family = a.agent_family;
    report.judge_family = a.judge_family;
    out << eval::format_table(report);
    for (const auto& w : bench.warnings) err << "warning: " << w << '\n';
    if (!a.jsonl.empty()) {
        std::ofstream f(a.jsonl, std::ios::trunc);
        if (!f) throw Error(ErrorCode::Io, "cannot write " + a.jsonl);
        f << eval::to_jsonl(bench.scores, report);
    }
    out << clock.line();
    return kOk;
}

int cmd_trace(const Common& c, const std::string& case_id, bool raw, std::ostream& out) {
    StatePaths state{c.state_dir};
    auto path = state.trace(case_id);
    if (!fs::is_regular_file(path)) throw UsageError("no stored trace for case '" + case_id + "'");
    auto doc = json::parse(read_file(path.string()));
    if (raw) {
        out << doc.dump(2) << '\n';
        return kOk;
    }
    const auto& r = doc.at("result");
    out << "case: " << r.at("case_id").get<std::string>() << '\n';
    out << "scenario: " << doc.at("scenario").get<std::string>() << " (seed " << doc.at("seed").get<std::uint64_t>()
        << ")\n";
    out << "route: " << r.at("route").at("category").get<std::string>() << " -> "
        << r.at("route").at("supervisor").get<std::string>() << '\n';
    auto plan = agents::Plan::from_json(r.at("plan"));
    out << "plan (revision " << plan.origin << "):\n";
    for (const auto& t : plan.tasks) {
        out << "  " << t.task_id << " [" << t.tag << "]";
        for (const auto& tool : t.tools) out << ' ' << tool;
        if (!t.depends_on.empty()) {
            out << " after";
            for (const auto& d : t.depends_on) out << ' ' << d;
        }
        out << '\n';
    }
    auto trace = dcg::Trace::from_json(r.at("trace"));
    out << "graph steps:\n";
    for (const auto& e : trace.entries)
        out << "  " << e.step << ' ' << e.node << " -> " << e.output.cls << " state=" << e.state_digest << '\n';
    if (trace.terminal) out << "terminal: " << dcg::to_string(*trace.terminal) << '\n';
    std::vector<orch::ExecutionRecord> log;
    for (const auto& j : r.at("log")) log.push_back(orch::ExecutionRecord::from_json(j));
    out << "actions:\n";
    print_log(out, log);
    for (const auto& rec : log) {
        out << "  reasoning [" << rec.step << "]: " << rec.reasoning << '\n';
    }
    const auto& o = r.at("outcome");
    if (o.contains("report")) {
        auto rep = orch::ResolutionReport::from_json(o.at("report"));
        out << "status: " << orch::to_string(rep.status) << " (success " << rep.success_count << ", fail "
            << rep.fail_count << ")\n";
    } else {
        auto t = orch::EscalationTicket::from_json(o.at("escalation"));
        out << "status: ESCALATED (" << orch::to_string(t.reason) << ", tau " << t.tau << ")\n";
    }
    out << "trace digest: " << r.at("trace_digest").get<std::string>() << '\n';
    return kOk;
}

struct MemoryArgs {
    std::string episodic;
    std::string semantic;
    std::size_t k = 4;
};

int cmd_memory(const Common& c, const MemoryArgs& a, std::ostream& out) {
    auto env = load_env(c);
    if (!a.semantic.empty()) {
        auto hits = env.semantic.retrieve_top_k(a.semantic, a.k);
        char line[256];
        for (const auto& h : hits) {
            std::snprintf(line, sizeof line, "%.6f  %s\n", h.score, h.doc->doc_id.c_str());
            out << line;
        }
        if (hits.empty()) out << "(no documents)\n";
        return kOk;
    }
    StatePaths state{c.state_dir};
    memory::EpisodicStore store(state.episodes().string());
    Clock clk;
    core::EventIngestor ingest(clk);
    auto facts = core::extract_facts(ingest.ingest("query", core::Reporter::Customer, a.episodic), env.routing);
    auto tags = memory::tags_of(facts);
    out << "tags:";
    for (const auto& t : tags) out << ' ' << t;
    out << '\n';
    auto hits = store.query(facts, a.k);
    for (const auto& e : hits) {
        out << e->case_id << "  t=" << e->t << "  " << e->category << "  ";
        if (e->resolution.contains("status")) out << e->resolution.at("status").get<std::string>();
        out << '\n';
    }
    if (hits.empty()) out << "(no episodes)\n";
    return kOk;
}

int cmd_escalations(const Common& c, const std::string& ack, std::ostream& out) {
    StatePaths state{c.state_dir};
    orch::EscalationQueue queue(state.escalations().string());
    if (!ack.empty()) {
        if (!fs::is_regular_file(state.escalations()) || !queue.ack(ack))
            throw UsageError("no escalation ticket for case '" + ack + "'");
        out << "acknowledged " << ack << '\n';
        return kOk;
    }
    if (!fs::is_regular_file(state.escalations())) {
        out << "(no tickets)\n";
        return kOk;
    }
    auto entries = queue.list();
    for (const auto& e : entries) {
        const auto& t = e.ticket;
        out << t.case_id << "  " << orch::to_string(t.reason) << "  tau=" << t.tau << "  records=" << t.log.size()
            << "  " << (e.acked ? "acked" : "open") << '\n';
    }
    if (entries.empty()) out << "(no tickets)\n";
    return kOk;
}

struct EvalArgs {
    std::string judge = "scripted";
    std::string agent_family = "lmr-rules";
    std::string judge_family = "lmr-scripted";
    double level = 0.95;
};

int cmd_eval(const Common& c, const EvalArgs& a, std::ostream& out, std::ostream& err) {
    eval::enforce_judge_family(a.judge_family, a.agent_family);
    check_level(a.level);
    StatePaths state{c.state_dir};
    if (!fs::is_directory(state.traces())) throw UsageError("no stored traces under " + state.traces().string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(state.traces()))
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw UsageError("no stored traces under " + state.traces().string());
    auto judge = make_judge(a.judge);

    std::vector<eval::ScoreVector> scores;
    std::vector<std::string> warnings;
    for (const auto& f : files) {
        auto doc = json::parse(read_file(f.string()));
        eval::Submission sub;
        sub.scenario_key = doc.at("scenario").get<std::string>();
        sub.expected = expected_from(doc.at("expected"));
        for (const auto& j : doc.at("result").at("log")) sub.log.push_back(orch::ExecutionRecord::from_json(j));
        auto s = judge->score(sub, &warnings);
        char line[256];
        std::snprintf(line, sizeof line, "%-36s correct=%.4f reason=%.4f safety=%.4f\n",
                      f.stem().string().c_str(), s.s_correct, s.s_reason, s.s_safety);
        out << line;
        scores.push_back(std::move(s));
    }
    out << '\n';
    auto report = eval::aggregate(scores, a.level);
    report.agent_family = a.agent_family;
    report.judge_family = a.judge_family;
    out << eval::format_table(report);
    for (const auto& w : warnings) err << "warning: " << w << '\n';
    return kOk;
}

int cmd_cost(const eval::CostModel& m, std::ostream& out) {
    auto e = eval::estimate_cost(m);
    out << "time: " << num(e.time) << '\n';
    out << "space: " << num(e.space) << '\n';
    return kOk;
}

int code_for(const Error& e) {
    switch (e.code()) {
        case ErrorCode::BiasViolation: return kBias;
        default: return kRuntime;
    }
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"lmr: last-mile delivery disruption resolver"};
    app.name("lmr");
    app.set_config("--config", "", "INI/TOML file supplying flag defaults");
    app.require_subcommand(1);

    Common common;
    app.add_option("--data-dir", common.data_dir, "Routing, templates, policies and corpus")->capture_default_str();
    app.add_option("--state-dir", common.state_dir, "Episodes, monitor log, escalations and traces")
        ->capture_default_str();

    const std::vector<std::string> reasoners{"rules", "remote"};
    const std::vector<std::string> judges{"scripted", "remote"};

    RunArgs run;
    auto* run_cmd = app.add_subcommand("run", "Resolve one scenario and print its report");
    run_cmd->add_option("scenario", run.scenario, "Corpus key or path to a .scn file")->required();
    run_cmd->add_option("--seed", run.seed)->capture_default_str();
    run_cmd->add_option("--reasoner", run.reasoner)->check(CLI::IsMember(reasoners))->capture_default_str();
    run_cmd->add_flag("--json", run.json_out, "Print the full case result as JSON");

    BenchArgs bench;
    auto* bench_cmd = app.add_subcommand("bench", "Run every scenario of a corpus and score it");
    bench_cmd->add_option("corpus", bench.corpus, "Corpus directory (absolute, relative, or under the data dir)")
        ->capture_default_str();
    bench_cmd->add_option("--seed", bench.seed)->capture_default_str();
    bench_cmd->add_option("--reasoner", bench.reasoner)->check(CLI::IsMember(reasoners))->capture_default_str();
    bench_cmd->add_option("--judge", bench.judge)->check(CLI::IsMember(judges))->capture_default_str();
    bench_cmd->add_option("--agent-family", bench.agent_family)->capture_default_str();
    bench_cmd->add_option("--judge-family", bench.judge_family)->capture_default_str();
    bench_cmd->add_option("--level", bench.level, "Confidence level")->capture_default_str();
    bench_cmd->add_flag("--serial", bench.serial, "Run scenarios one at a time");
    bench_cmd->add_option("--jsonl", bench.jsonl, "Also write scores as JSONL to this file");

    std::string trace_case;
    bool trace_raw = false;
    auto* trace_cmd = app.add_subcommand("trace", "Pretty-print a stored case trace");
    trace_cmd->add_option("case_id", trace_case)->required();
    trace_cmd->add_flag("--raw", trace_raw, "Print the stored JSON");

    MemoryArgs mem;
    auto* mem_cmd = app.add_subcommand("memory", "Query episodic or semantic memory");
    auto* ep_opt = mem_cmd->add_option("--episodic", mem.episodic, "Free-text query against past cases");
    auto* sem_opt = mem_cmd->add_option("--semantic", mem.semantic, "Free-text query against the policy corpus");
    ep_opt->excludes(sem_opt);
    mem_cmd->add_option("--k", mem.k)->check(CLI::PositiveNumber)->capture_default_str();

    std::string ack;
    auto* esc_cmd = app.add_subcommand("escalations", "List or acknowledge escalation tickets");
    esc_cmd->add_option("--ack", ack, "Case id to acknowledge");

    EvalArgs ev;
    auto* eval_cmd = app.add_subcommand("eval", "Re-score stored traces");
    eval_cmd->add_option("--judge", ev.judge)->check(CLI::IsMember(judges))->capture_default_str();
    eval_cmd->add_option("--agent-family", ev.agent_family)->capture_default_str();
    eval_cmd->add_option("--judge-family", ev.judge_family)->capture_default_str();
    eval_cmd->add_option("--level", ev.level)->capture_default_str();

    eval::CostModel cost;
    auto* cost_cmd = app.add_subcommand("cost", "Estimate time and space cost");
    cost_cmd->add_option("--T", cost.T, "Trace length")->required();
    cost_cmd->add_option("--k", cost.k, "Retrieval size")->required();
    cost_cmd->add_option("--d", cost.d, "Embedding dimension")->required();
    cost_cmd->add_option("--L", cost.L, "Sequence length")->required();
    cost_cmd->add_option("--d-model", cost.d_model, "Model width")->required();
    cost_cmd->add_option("--corpus", cost.corpus_size, "Semantic corpus size")->required();
    cost_cmd->add_option("--avg-trace", cost.avg_trace, "Mean stored trace size")->capture_default_str();
    cost_cmd->add_option("--wm", cost.wm_capacity, "Working-memory capacity")->capture_default_str();
    cost_cmd->add_option("--episodes", cost.episodes, "Stored episodes")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << '\n';
        return kUsage;
    }
    if (mem_cmd->parsed() && mem.episodic.empty() && mem.semantic.empty()) {
        err << "usage error: memory needs --episodic <query> or --semantic <query>\n";
        return kUsage;
    }

    try {
        if (run_cmd->parsed()) return cmd_run(common, run, out);
        if (bench_cmd->parsed()) return cmd_bench(common, bench, out, err);
        if (trace_cmd->parsed()) return cmd_trace(common, trace_case, trace_raw, out);
        if (mem_cmd->parsed()) return cmd_memory(common, mem, out);
        if (esc_cmd->parsed()) return cmd_escalations(common, ack, out);
        if (eval_cmd->parsed()) return cmd_eval(common, ev, out, err);
        if (cost_cmd->parsed()) return cmd_cost(cost, out);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return code_for(e);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kRuntime;
    }
    return kUsage;
}

}  // namespace lmr::cli
