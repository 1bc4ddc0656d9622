#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "lmr/agents.hpp"
#include "support/checks.hpp"
#include "support/fixtures.hpp"
#include "support/gen.hpp"

using namespace lmr;
using namespace lmr::agents;
using lmr::testing::Gen;
using lmr::testing::shared_env;

namespace {

std::vector<std::string> tools_of(const Plan& p) {
    std::vector<std::string> out;
    for (const auto& t : p.tasks)
        for (const auto& tool : t.tools) out.push_back(tool);
    return out;
}

Plan plan_for(core::Category c) { return plan(shared_env().templates, c, core::FactSet{}, {}, {}); }

const AgentProfile& agent_with_role(Role r) {
    for (const auto& a : shared_env().roster)
        if (a.role == r) return a;
    throw std::logic_error("role missing");
}

memory::WorkingMemory golden_wm() {
    memory::WorkingMemory wm("g", 256);
    core::FactSet facts;
    for (auto [k, v] : std::map<std::string, std::string>{
             {"order_id", "o-1001"}, {"customer_id", "c-21"}, {"driver_id", "d-7"}, {"merchant_id", "m-3"}})
        facts.facts[k] = core::Fact{v, {core::Provenance::Kind::Field, k, 0, v.size()}};
    wm.put(wm_key::kFacts, facts.to_json());
    return wm;
}

Context retrieve(const Task& t, const memory::WorkingMemory& wm) {
    Context c;
    c.query = context_query(t, wm);
    c.docs = shared_env().semantic.retrieve_top_k(c.query, 4);
    return c;
}

}  // namespace

TEST_SUITE("agents") {
    TEST_CASE("shipped roster validates and has one supervisor per routing target") {
        CHECK_NOTHROW(validate_roster(shared_env().roster, shared_env().registry, shared_env().routing));
        auto bad = shared_env().roster;
        bad[0].tool_allowlist.insert("summon_drone");
        CHECK_ERROR_CODE(validate_roster(bad, shared_env().registry, shared_env().routing), ErrorCode::ValidationError);
        auto twice = shared_env().roster;
        twice.push_back(twice.back());
        CHECK_ERROR_CODE(validate_roster(twice, shared_env().registry, shared_env().routing), ErrorCode::ValidationError);
    }

    TEST_CASE("merchant-offline plan: alternatives, notify, reassign") {
        auto p = plan_for(core::Category::Cancellation);
        CHECK(tools_of(p) == std::vector<std::string>{"get_nearby_merchants", "notify_customer", "reassign_driver"});
        CHECK(p.initial());
        CHECK(plan_is_acyclic(p));
    }

    TEST_CASE("damaged-packaging plan has the five dispute tasks") {
        auto p = plan_for(core::Category::ComplexAdjudication);
        REQUIRE(p.tasks.size() == 5);
        std::vector<std::string> tags;
        for (const auto& t : p.tasks) tags.push_back(t.tag);
        CHECK(tags == std::vector<std::string>{"initiate_mediation_flow", "collect_evidence", "analyze_evidence",
                                               "execute_resolution", "notify_resolution"});
        CHECK(plan_is_acyclic(p));
    }

    TEST_CASE("Unknown has no template") {
        CHECK_ERROR_CODE(plan_for(core::Category::Unknown), ErrorCode::UnplannableCategory);
    }

    TEST_CASE("every shipped template yields an acyclic plan whose tags have a capable agent") {
        for (auto c : core::all_categories()) {
            if (!shared_env().templates.for_category(c)) continue;
            auto p = plan_for(c);
            CHECK(plan_is_acyclic(p));
            CHECK_FALSE(p.tasks.empty());
            for (const auto& t : p.tasks) CHECK_NOTHROW(select_agent(t, shared_env().roster));
        }
    }

    TEST_CASE("select_agent examples") {
        Task t;
        t.tag = "notify_customer";
        CHECK(select_agent(t, shared_env().roster).role == Role::Communications);
        t.tag = "issue_instant_refund";
        CHECK(select_agent(t, shared_env().roster).role == Role::Adjudication);
        t.tag = "teleport_package";
        CHECK_ERROR_CODE(select_agent(t, shared_env().roster), ErrorCode::NoCapableAgent);
    }

    TEST_CASE("argmax is first-max and invariant under strictly increasing transforms") {
        Gen g(61);
        auto oracle = [](const std::vector<double>& u) {
            std::size_t best = 0;
            for (std::size_t i = 0; i < u.size(); ++i)
                if (u[i] > u[best]) best = i;
            return best;
        };
        for (int trial = 0; trial < 2000; ++trial) {
            std::vector<double> u(static_cast<std::size_t>(g.range(1, 12)));
            // Coarse values so ties are common.
            for (auto& x : u) x = static_cast<double>(g.range(0, 4)) / 4.0;
            u[g.index(u.size())] = 1.0;
            const auto expect = oracle(u);
            CHECK(argmax_utility(u) == expect);
            const double a = g.real(0.1, 10.0), b = g.real(-3.0, 3.0);
            std::vector<std::vector<double>> transforms(4, u);
            for (std::size_t i = 0; i < u.size(); ++i) {
                transforms[0][i] = a * u[i];
                transforms[1][i] = std::exp(u[i]) + 1.0;  // stays positive
                transforms[2][i] = std::pow(u[i] + 1.0, 3.0);
                transforms[3][i] = a * u[i] + std::abs(b) + 0.5;
            }
            for (const auto& t : transforms) CHECK(argmax_utility(t) == expect);
        }
        CHECK_ERROR_CODE(argmax_utility({0.0, 0.0}), ErrorCode::NoCapableAgent);
        CHECK_ERROR_CODE(argmax_utility({}), ErrorCode::NoCapableAgent);
    }

    TEST_CASE("communications starts mediation for the mediation task") {
        auto p = plan_for(core::Category::ComplexAdjudication);
        const auto& t1 = p.tasks[0];
        const auto& agent = select_agent(t1, shared_env().roster);
        CHECK(agent.role == Role::Communications);
        auto wm = golden_wm();
        auto d = RuleReasoner().reason(agent, t1, retrieve(t1, wm), wm, shared_env().registry);
        const auto* inv = std::get_if<ToolInvocation>(&d.action);
        REQUIRE(inv);
        CHECK(inv->tool == "initiate_mediation_flow");
        CHECK(inv->args.at("order_id") == "o-1001");
        CHECK(agent.tool_allowlist.count(inv->tool));
    }

    TEST_CASE("adjudication applies the merchant packaging policy: refund, exonerate, feedback") {
        auto p = plan_for(core::Category::ComplexAdjudication);
        auto task = *p.find("t4");
        auto wm = golden_wm();
        wm.put("ctx/finding", "merchant_fault");
        wm.put("ctx/amount", 24.5);
        const auto& agent = agent_with_role(Role::Adjudication);
        std::vector<std::string> tools;
        for (int guard = 0; guard < 10; ++guard) {
            auto ctx = retrieve(task, wm);
            auto d = RuleReasoner().reason(agent, task, ctx, wm, shared_env().registry);
            // Citations only name what was retrieved.
            for (const auto& c : d.cited) {
                bool retrieved = std::any_of(ctx.docs.begin(), ctx.docs.end(),
                                             [&](const memory::Retrieved& r) { return c.ref == "doc:" + r.doc->doc_id; });
                CHECK(retrieved);
            }
            const auto* inv = std::get_if<ToolInvocation>(&d.action);
            if (!inv) break;
            CHECK(agent.tool_allowlist.count(inv->tool));
            tools.push_back(inv->tool);
            if (!d.has_more) break;
            ++task.cursor;
        }
        CHECK(tools == std::vector<std::string>{"issue_instant_refund", "exonerate_driver", "log_merchant_packaging_feedback"});
    }

    TEST_CASE("adjudication without a covering policy reports failure") {
        auto p = plan_for(core::Category::ComplexAdjudication);
        auto task = *p.find("t4");
        auto wm = golden_wm();
        wm.put("ctx/finding", "alien_interference");
        auto d = RuleReasoner().reason(agent_with_role(Role::Adjudication), task, retrieve(task, wm), wm,
                                       shared_env().registry);
        CHECK(std::holds_alternative<ReportFail>(d.action));
    }

    TEST_CASE("rule reasoner is deterministic") {
        auto p = plan_for(core::Category::Delay);
        auto wm = golden_wm();
        const auto& agent = select_agent(p.tasks[0], shared_env().roster);
        auto a = RuleReasoner().reason(agent, p.tasks[0], retrieve(p.tasks[0], wm), wm, shared_env().registry);
        auto b = RuleReasoner().reason(agent, p.tasks[0], retrieve(p.tasks[0], wm), wm, shared_env().registry);
        CHECK(a.to_json() == b.to_json());
    }

    TEST_CASE("bind_args precedence: task binding, then fact, then working memory") {
        const auto& spec = *shared_env().registry.find("reassign_driver");
        auto wm = golden_wm();
        wm.put("ctx/merchant_id", "m-ctx");
        Task t;
        t.params["driver_id"] = "d-literal";
        std::vector<std::string> missing;
        auto args = bind_args(spec, t, wm, &missing);
        CHECK(missing.empty());
        CHECK(args.at("driver_id") == "d-literal");
        CHECK(args.at("merchant_id") == "m-3");
        t.params["merchant_id"] = "@wm:merchant_id";
        CHECK(bind_args(spec, t, wm).at("merchant_id") == "m-ctx");
        memory::WorkingMemory empty("e", 8);
        empty.put(wm_key::kFacts, core::FactSet{}.to_json());
        bind_args(spec, Task{}, empty, &missing);
        CHECK_FALSE(missing.empty());
    }

    TEST_CASE("replan: closed road substitutes a traffic check plus reroute on the alternate") {
        auto p = plan_for(core::Category::Delay);
        const auto* reroute = p.find("t2");
        REQUIRE(reroute);
        auto next = replan(p, *reroute, tools::ToolResult::fail("road closed on route primary"));
        CHECK(next.origin == p.origin + 1);
        CHECK_FALSE(next == p);
        const auto* alt = next.find("t2~alt");
        REQUIRE(alt);
        CHECK(alt->tools == std::vector<std::string>{"check_traffic", "re-route_driver"});
        CHECK(alt->params.at("route") == "alternate");
        CHECK(next.find("t2") == nullptr);
        CHECK(plan_is_acyclic(next));
        for (const auto& t : next.tasks)
            for (const auto& d : t.depends_on) CHECK(next.find(d) != nullptr);
    }

    TEST_CASE("replan: retryable notification is retried with a bumped attempt") {
        auto p = plan_for(core::Category::Cancellation);
        const auto* notify = p.find("t2");
        REQUIRE(notify);
        REQUIRE(notify->retryable);
        auto next = replan(p, *notify, tools::ToolResult::fail("gateway timeout"));
        const auto* again = next.find("t2");
        REQUIRE(again);
        CHECK(again->attempt == notify->attempt + 1);
        CHECK(next.origin == 1);
        CHECK_FALSE(next == p);
    }

    TEST_CASE("replan: no alternative raises NoAlternative; success is not a failure") {
        auto p = plan_for(core::Category::Cancellation);
        const auto* lookup = p.find("t1");
        REQUIRE(lookup);
        CHECK_ERROR_CODE(replan(p, *lookup, tools::ToolResult::fail("x")), ErrorCode::NoAlternative);
        CHECK_THROWS(replan(p, *lookup, tools::ToolResult::ok({})));
    }

    TEST_CASE("replan progress over random failure chains") {
        Gen g(62);
        for (auto c : {core::Category::Delay, core::Category::Navigation, core::Category::ComplexAdjudication,
                       core::Category::Cancellation, core::Category::SupportFailure}) {
            for (int trial = 0; trial < 40; ++trial) {
                auto p = plan_for(c);
                for (int round = 0; round < 6 && !p.tasks.empty(); ++round) {
                    const auto& victim = p.tasks[g.index(p.tasks.size())];
                    try {
                        auto next = replan(p, victim, tools::ToolResult::fail("injected"));
                        CHECK(next.origin > p.origin);
                        CHECK_FALSE(next == p);
                        CHECK(plan_is_acyclic(next));
                        p = next;
                    } catch (const Error& e) {
                        CHECK(e.code() == ErrorCode::NoAlternative);
                        break;
                    }
                }
            }
        }
    }

    TEST_CASE("plan_is_acyclic against random dependency graphs") {
        Gen g(63);
        for (int trial = 0; trial < 500; ++trial) {
            Plan p;
            const auto n = g.range(1, 8);
            for (long i = 0; i < n; ++i) {
                Task t;
                t.task_id = "t" + std::to_string(i);
                for (long j = 0; j < i; ++j)
                    if (g.coin(0.3)) t.depends_on.insert("t" + std::to_string(j));
                p.tasks.push_back(t);
            }
            CHECK(plan_is_acyclic(p));
            if (n >= 2) {
                // A back edge from an early task to a later one breaks the order.
                auto i = g.index(static_cast<std::size_t>(n - 1));
                p.tasks[i].depends_on.insert("t" + std::to_string(n - 1));
                CHECK_FALSE(plan_is_acyclic(p));
            }
        }
    }

    TEST_CASE("template parse errors and action JSON round-trip") {
        CHECK_ERROR_CODE(TemplateLibrary::parse("template x\ncategory Weather\nend\n"), ErrorCode::ValidationError);
        CHECK_ERROR_CODE(TemplateLibrary::parse("task t1 a\n"), ErrorCode::ParseError);
        for (const Action& a : {Action{ToolInvocation{"notify_customer", {{"customer_id", "c"}}}}, Action{ReportSuccess{}},
                                Action{ReportFail{"no"}}})
            CHECK(action_from_json(action_to_json(a)) == a);
    }

    TEST_CASE("policy directives and relevance") {
        auto pol = parse_policy("Title\napplies-to: merchant_fault, other\nactions: issue_instant_refund, exonerate_driver\n");
        REQUIRE(pol);
        CHECK(pol->applies_to == std::set<std::string>{"merchant_fault", "other"});
        CHECK(pol->actions == std::vector<std::string>{"issue_instant_refund", "exonerate_driver"});
        CHECK_FALSE(parse_policy("just prose"));
        CHECK(is_relevant("refund the customer", "Refunds go to the customer within a day"));
        CHECK_FALSE(is_relevant("reroute around traffic", "packaging feedback for merchants"));
    }

    TEST_CASE("remote reasoner without an endpoint is unavailable") {
        RemoteReasoner r("http://127.0.0.1:9/nothing", 0.2);
        auto wm = golden_wm();
        auto p = plan_for(core::Category::Cancellation);
        CHECK_ERROR_CODE(r.reason(agent_with_role(Role::Logistics), p.tasks[0], {}, wm, shared_env().registry),
                         ErrorCode::ReasonerUnavailable);
    }
}
