// Acceptance run: one PASS/FAIL line per criterion, exit status 1 on any FAIL.
// `acceptance --rag-digest` prints the retrieval digest used by criterion 4.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <regex>
#include <sstream>

#include "lmr/cli.hpp"
#include "lmr/engine.hpp"
#include "support/fixtures.hpp"
#include "support/gen.hpp"

using namespace lmr;
using lmr::testing::Gen;
using lmr::testing::shared_env;
using lmr::testing::TempDir;

namespace {

namespace fs = std::filesystem;

struct Failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void expect(bool cond, const std::string& what) {
    if (!cond) throw Failure(what);
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

int dispatch(const std::vector<std::string>& args, std::string* out = nullptr) {
    std::vector<const char*> argv{"lmr"};
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream o, e;
    int code = cli::dispatch(static_cast<int>(argv.size()), argv.data(), o, e);
    if (out) *out = o.str();
    return code;
}

// Maps each known text to a preset vector.
class TableEmbedder final : public memory::Embedder {
public:
    explicit TableEmbedder(std::size_t dim) : dim_(dim) {}
    void set(const std::string& text, memory::Vector v) { table_[text] = std::move(v); }
    memory::Vector embed(std::string_view text) const override { return table_.at(std::string(text)); }
    std::size_t dim() const override { return dim_; }

private:
    std::size_t dim_;
    std::map<std::string, memory::Vector> table_;
};

double oracle_cosine(const memory::Vector& a, const memory::Vector& b) {
    double dot = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    return std::clamp(dot / (std::sqrt(aa) * std::sqrt(bb)), -1.0, 1.0);
}

// ---------------------------------------------------------------------------

void criterion_1() {
    auto start = std::chrono::steady_clock::now();
    TempDir state("acc1");
    std::string out;
    expect(dispatch({"--state-dir", state.path().string(), "run", "golden-damaged-packaging"}, &out) == 0,
           "run exited nonzero");
    const double ms = elapsed_ms(start);
    expect(out.find("status: RESOLVED") != std::string::npos, "report is not RESOLVED");

    auto run = run_scenario(shared_env(), shared_env().scenario("golden-damaged-packaging"), {});
    const std::vector<std::string> steps{"initiate_mediation_flow", "collect_evidence",  "analyze_evidence",
                                         "issue_instant_refund",    "exonerate_driver",  "log_merchant_packaging_feedback",
                                         "notify_resolution"};
    expect(run.result.tool_sequence() == steps, "tool sequence differs from the golden steps");
    expect(ms < 1000.0, "took " + std::to_string(ms) + " ms");
}

void criterion_2() {
    auto a = eval::aggregate({eval::ScoreVector::make(0.71, 0.77, 0.73, "table", "scripted")});
    expect(std::abs(a.overall - 2.21 / 3.0) <= 1e-12, "overall " + std::to_string(a.overall));
    auto table = eval::format_table(a);
    expect(table.find("0.73 for these component scores does not match") != std::string::npos,
           "footer does not flag the 0.73 discrepancy");
}

void criterion_3() {
    auto start = std::chrono::steady_clock::now();
    Gen g(3003);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto n = static_cast<std::size_t>(g.range(1, 200));
        const auto d = static_cast<std::size_t>(g.range(1, 32));
        const auto k = static_cast<std::size_t>(g.range(1, 20));
        auto emb = std::make_shared<TableEmbedder>(d);
        auto random_vec = [&] {
            memory::Vector v(d);
            do {
                for (auto& x : v) x = g.coin(0.3) ? static_cast<double>(g.range(-2, 2)) : g.real(-1.0, 1.0);
            } while (std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; }));
            return v;
        };
        std::vector<std::pair<std::string, memory::Vector>> docs;
        for (std::size_t i = 0; i < n; ++i) {
            auto id = "d" + std::to_string(g.range(0, 100000)) + "-" + std::to_string(i);
            // Repeat earlier vectors so equal scores occur.
            auto v = (!docs.empty() && g.coin(0.2)) ? docs[g.index(docs.size())].second : random_vec();
            emb->set(id, v);
            docs.emplace_back(id, v);
        }
        auto q = random_vec();
        emb->set("query", q);
        memory::SemanticStore store(emb);
        for (const auto& [id, v] : docs) store.add(id, id);

        std::vector<std::pair<double, std::string>> ranked;
        for (const auto& [id, v] : docs) ranked.emplace_back(oracle_cosine(q, v), id);
        std::sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) {
            return x.first != y.first ? x.first > y.first : x.second < y.second;
        });
        ranked.resize(std::min(k, ranked.size()));

        auto got = store.retrieve_top_k("query", k);
        expect(got.size() == ranked.size(), "trial " + std::to_string(trial) + ": size");
        for (std::size_t i = 0; i < got.size(); ++i)
            expect(got[i].doc->doc_id == ranked[i].second, "trial " + std::to_string(trial) + ": order at " + std::to_string(i));
    }
    const double ms = elapsed_ms(start);
    expect(ms < 30000.0, "took " + std::to_string(ms) + " ms");
}

// 100 (query, corpus) evaluations over the shipped policies and fixed queries.
std::string rag_digest() {
    const auto& env = shared_env();
    Gen g(4004);
    std::vector<std::string> words;
    for (const auto& d : env.semantic.docs()) {
        std::istringstream in(d.text);
        for (std::string w; in >> w;) words.push_back(w);
    }
    std::uint64_t h = fnv1a("");
    for (int i = 0; i < 100; ++i) {
        std::string q;
        for (long n = g.range(1, 8); n > 0; --n) q += g.pick(words) + " ";
        auto docs = env.semantic.retrieve_top_k(q, static_cast<std::size_t>(g.range(1, 6)));
        std::string line;
        for (const auto& r : docs) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%a", r.score);
            line += r.doc->doc_id + "=" + buf + ";";
        }
        line += "|" + memory::augment(q, docs);
        h = fnv1a(line, h);
    }
    return hex_digest(h);
}

std::string self_digest(const std::string& self) {
    std::string cmd = "'" + self + "' --rag-digest";
    FILE* p = ::popen(cmd.c_str(), "r");
    if (!p) throw Failure("cannot spawn " + self);
    char buf[128] = {};
    std::string out;
    while (std::fgets(buf, sizeof buf, p)) out += buf;
    if (::pclose(p) != 0) throw Failure("child exited nonzero");
    while (!out.empty() && std::isspace(static_cast<unsigned char>(out.back()))) out.pop_back();
    return out;
}

void criterion_4(const std::string& self) {
    auto here = rag_digest();
    expect(rag_digest() == here, "in-process repeat differs");
    auto first = self_digest(self);
    auto second = self_digest(self);
    expect(first == here && second == here, "digests " + here + " / " + first + " / " + second);
}

orch::CaseResult run_with(const sim::Scenario& s, const std::vector<std::string>& faults,
                          std::optional<double> financial_limit = std::nullopt) {
    const auto& env = shared_env();
    auto policy = env.safety_policy;
    if (financial_limit) policy.financial_limit = *financial_limit;
    tools::SafetyLayer safety(policy);
    agents::RuleReasoner rules;
    orch::Deps deps;
    deps.registry = &env.registry;
    deps.safety = &safety;
    deps.redactor = &env.redactor;
    deps.semantic = &env.semantic;
    deps.templates = &env.templates;
    deps.routing = &env.routing;
    deps.reasoner = &rules;
    deps.roster = env.roster;
    auto world = sim::World::from_scenario(s, 1);
    for (const auto& f : faults) world.inject_fault(sim::parse_fault(f));
    return orch::resolve(event_for(s, s.key + "-s1", 1), world, deps);
}

void criterion_5() {
    auto offline = shared_env().scenario("merchant-offline");
    for (std::uint32_t n : {1u, 2u, 3u, 5u}) {
        auto res = run_with(offline, {"notify_customer fail=" + std::to_string(n)});
        const auto tag = "n=" + std::to_string(n);
        expect(res.escalated() == (n >= 3), tag + ": escalation");
        expect(res.tau == std::min(n, orch::kMaxAttempts), tag + ": tau " + std::to_string(res.tau));
        if (res.escalated()) {
            expect(res.ticket()->tau == orch::kMaxAttempts, tag + ": ticket tau");
            expect(res.ticket()->reason == orch::EscalationReason::BudgetExhausted, tag + ": reason");
        }
    }
    // A denied refund and a failed refund at the same step spend the same budget.
    auto golden = shared_env().scenario("golden-damaged-packaging");
    auto denied = run_with(golden, {}, 1.0);
    auto failed = run_with(golden, {"issue_instant_refund once"});
    auto has_denied = std::any_of(denied.log.begin(), denied.log.end(), [](const orch::ExecutionRecord& r) {
        return r.result.status == tools::Status::Denied;
    });
    expect(has_denied, "no Denied record under a 1.0 limit");
    expect(denied.tau == failed.tau && denied.tau >= 1, "tau denied " + std::to_string(denied.tau) + " vs failed " +
                                                            std::to_string(failed.tau));
    expect(denied.escalated() == failed.escalated(), "escalation differs");
    expect(denied.tool_sequence() == failed.tool_sequence(), "tool sequence differs");
    // Three denials escalate exactly as three failures do.
    auto offline_denied = run_with(offline, {"notify_customer fail=3"}, 0.0);
    expect(offline_denied.escalated() && offline_denied.tau == orch::kMaxAttempts, "three failures with a zero limit");
}

void criterion_6() {
    auto s = shared_env().scenario("golden-damaged-packaging");
    const auto& env = shared_env();
    auto make_deps = [&](tools::SafetyLayer& safety, const agents::Reasoner& r) {
        orch::Deps deps;
        deps.registry = &env.registry;
        deps.safety = &safety;
        deps.redactor = &env.redactor;
        deps.semantic = &env.semantic;
        deps.templates = &env.templates;
        deps.routing = &env.routing;
        deps.reasoner = &r;
        deps.roster = env.roster;
        return deps;
    };
    agents::RuleReasoner rules;
    tools::SafetyLayer base_safety(env.safety_policy);
    auto base_deps = make_deps(base_safety, rules);
    auto base_world = sim::World::from_scenario(s, 1);
    auto base = orch::resolve(event_for(s, "resume-case", 1), base_world, base_deps);
    const auto n = base.trace.entries.size();
    for (std::uint64_t k = 1; k <= n; ++k) {
        TempDir dir("acc6");
        orch::RunOptions opt;
        opt.checkpoint_path = dir.file("wm.ckpt");
        opt.crash_after_step = k;
        auto world = sim::World::from_scenario(s, 1);
        bool crashed = false;
        {
            tools::SafetyLayer safety(env.safety_policy);
            auto deps = make_deps(safety, rules);
            try {
                orch::resolve(event_for(s, "resume-case", 1), world, deps, opt);
            } catch (const dcg::Abort&) {
                crashed = true;
            }
        }
        expect(crashed, "no crash at k=" + std::to_string(k));
        tools::SafetyLayer safety(env.safety_policy);
        auto deps = make_deps(safety, rules);
        opt.crash_after_step.reset();
        auto res = orch::resume(world, deps, opt);
        expect(res.trace.digest() == base.trace.digest(), "digest differs at k=" + std::to_string(k));
        expect(world.state() == base_world.state(), "world differs at k=" + std::to_string(k));
        for (const auto& [key, count] : world.mutation_counts())
            expect(count <= 1, "repeated effect at k=" + std::to_string(k));
    }
}

void criterion_7() {
    const auto& env = shared_env();
    const auto& refund = *env.registry.find("issue_instant_refund");
    Gen g(7007);
    auto s = env.scenario("golden-damaged-packaging");
    std::size_t over_limit_success = 0, checked = 0;
    for (int i = 0; i < 10000; ++i) {
        tools::SafetyPolicy pol;
        pol.financial_limit = static_cast<double>(g.range(1, 1000));
        tools::SafetyLayer safety(pol);
        const double amount = g.coin(0.1) ? pol.financial_limit : g.real(0.0, 2.0 * pol.financial_limit);
        const bool escalated = g.coin(0.05);
        const std::string case_id = "fin-" + std::to_string(i);
        if (escalated) safety.mark_escalated(case_id);
        tools::ToolCall call{case_id, 1, refund.name, {{"order_id", "o-1001"}, {"customer_id", "c-21"}, {"amount", amount}}};
        // A fresh world every 500 calls keeps the refunded total bounded.
        static std::unique_ptr<sim::World> world;
        if (i % 500 == 0) world.reset(new sim::World(sim::World::from_scenario(s, 1)));
        auto ledger = world->state().ledger.size();
        auto r = tools::invoke_tool(env.registry, *world, call, safety);
        ++checked;
        if (r.status == tools::Status::Success && (amount > pol.financial_limit || escalated)) ++over_limit_success;
        if (r.status != tools::Status::Success)
            expect(world->state().ledger.size() == ledger, "ledger changed on a non-success call");
    }
    expect(checked == 10000 && over_limit_success == 0,
           std::to_string(over_limit_success) + " over-limit or escalated successes");

    // Every exported artifact of a bench run is scanned for PII.
    TempDir state("acc7");
    auto jsonl = state.file("scores.jsonl");
    expect(dispatch({"--state-dir", state.path().string(), "bench", "--jsonl", jsonl}) == 0, "bench failed");
    std::set<std::string> literals;
    for (const auto& sc : env.corpus())
        for (const auto& [id, c] : sc.world_init.customers)
            for (const auto& v : {c.address, c.phone, c.email})
                if (!v.empty()) literals.insert(v);
    static const std::regex phone(R"(\+?\d{1,3}[-. ]\d{3}[-. ]\d{4}|\d{3}[-. ]\d{3}[-. ]\d{4})");
    static const std::regex email(R"([A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,})");
    std::size_t files = 0;
    for (const auto& e : fs::recursive_directory_iterator(state.path())) {
        if (!e.is_regular_file()) continue;
        ++files;
        std::ifstream in(e.path());
        std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        const auto where = e.path().filename().string();
        expect(!env.redactor.contains_pii(body), "redactor pattern match in " + where);
        expect(!std::regex_search(body, phone) && !std::regex_search(body, email), "phone or email in " + where);
        for (const auto& lit : literals) expect(body.find(lit) == std::string::npos, "'" + lit + "' in " + where);
    }
    expect(files >= 6, "only " + std::to_string(files) + " exported files");
}

void criterion_8() {
    TempDir same("acc8a");
    fs::remove_all(same.path());
    expect(dispatch({"--state-dir", same.path().string(), "bench", "--agent-family", "gpt", "--judge-family", "GPT"}) == 3,
           "matching families did not exit 3");
    expect(!fs::exists(same.path()), "refused bench left state behind");
    fs::create_directories(same.path());
    TempDir differ("acc8b");
    expect(dispatch({"--state-dir", differ.path().string(), "bench", "--agent-family", "gpt", "--judge-family",
                     "claude"}) == 0,
           "distinct families did not run");
}

void criterion_9() {
    Gen g(9009);
    const double z = 1.959963984540054;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> xs(static_cast<std::size_t>(g.range(2, 60)));
        for (auto& x : xs) x = g.unit();
        const double n = static_cast<double>(xs.size());
        const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
        double ss = 0.0;
        for (double x : xs) ss += (x - mean) * (x - mean);
        const double half = z * std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
        auto ci = eval::confidence_interval(xs, 0.95);
        expect(std::abs(ci.low - std::max(0.0, mean - half)) <= 1e-9 &&
                   std::abs(ci.high - std::min(1.0, mean + half)) <= 1e-9,
               "trial " + std::to_string(trial));
    }
    for (double c : {0.0, 0.37, 1.0}) {
        auto ci = eval::confidence_interval(std::vector<double>(5, c), 0.95);
        expect(ci.low == ci.high, "zero-variance interval has width");
    }
}

void criterion_10() {
    const auto corpus = shared_env().corpus();
    memory::EpisodicStore store;
    Gen g(1010);
    std::size_t non_escalated = 0;
    for (int i = 0; i < 50; ++i) {
        RunSettings rs;
        rs.seed = g.bits() % 1000000;
        rs.episodic = &store;
        for (const auto& s : corpus) {
            const auto before = store.size();
            auto run = run_scenario(shared_env(), s, rs);
            if (run.result.escalated()) {
                expect(store.size() == before, s.key + ": escalated case stored");
                continue;
            }
            ++non_escalated;
            const auto* rep = run.result.report();
            expect((rep->status == orch::ReportStatus::Resolved) == (rep->fail_count == 0), s.key + ": status law");
            expect(store.size() == before + 1, s.key + ": store did not grow by one");
        }
    }
    expect(store.size() == non_escalated, "growth " + std::to_string(store.size()) + " vs " +
                                              std::to_string(non_escalated));
}

}  // namespace

int main(int argc, char** argv) {
    if (argc > 1 && std::string(argv[1]) == "--rag-digest") {
        std::cout << rag_digest() << '\n';
        return 0;
    }
    const std::string self = fs::canonical("/proc/self/exe").string();
    const std::vector<std::pair<std::string, std::function<void()>>> criteria = {
        {"golden trace reproduction", criterion_1},
        {"aggregation math", criterion_2},
        {"top-k oracle equivalence", criterion_3},
        {"retrieval determinism across restarts", [&] { criterion_4(self); }},
        {"replanning and escalation budget", criterion_5},
        {"crash-resume equivalence", criterion_6},
        {"safety layer and PII scan", criterion_7},
        {"judge family guard", criterion_8},
        {"confidence interval oracle", criterion_9},
        {"status law and episodic growth", criterion_10},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto& [name, fn] = criteria[i];
        auto start = std::chrono::steady_clock::now();
        std::string detail;
        bool ok = true;
        try {
            fn();
        } catch (const std::exception& e) {
            ok = false;
            detail = e.what();
        }
        std::printf("criterion %2zu %-40s %s (%.0f ms)%s%s\n", i + 1, name.c_str(), ok ? "PASS" : "FAIL",
                    elapsed_ms(start), detail.empty() ? "" : ": ", detail.c_str());
        std::fflush(stdout);
        failed += !ok;
    }
    return failed == 0 ? 0 : 1;
}
