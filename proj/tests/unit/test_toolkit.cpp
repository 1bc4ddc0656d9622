#include <algorithm>
#include <regex>

#include "doctest.h"
#include "lmr/toolkit.hpp"
#include "support/checks.hpp"
#include "support/fixtures.hpp"
#include "support/gen.hpp"

using namespace lmr;
using namespace lmr::tools;
using lmr::testing::Gen;
using lmr::testing::shared_env;

namespace {

const std::vector<std::string> kCatalog = {
    "get_merchant_status",     "re-route_driver",  "check_traffic",     "find_nearby_locker",
    "get_nearby_merchants",    "reassign_driver",  "notify_customer",   "contact_recipient_via_chat",
    "initiate_mediation_flow", "notify_resolution", "collect_evidence", "analyze_evidence",
    "exonerate_driver",        "issue_instant_refund", "log_merchant_packaging_feedback"};

sim::Scenario scenario(const std::string& key) { return shared_env().scenario(key); }

ToolCall refund_call(const std::string& case_id, std::uint64_t step, double amount) {
    return {case_id, step, "issue_instant_refund", {{"order_id", "o-1001"}, {"customer_id", "c-21"}, {"amount", amount}}};
}

// Independent PII detectors used as a scan oracle.
bool looks_like_pii(const std::string& s) {
    static const std::regex phone(R"(\d{3}[-. ]\d{3,4})");
    static const std::regex email(R"([A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,})");
    return std::regex_search(s, phone) || std::regex_search(s, email);
}

}  // namespace

TEST_SUITE("toolkit") {
    TEST_CASE("default registry holds exactly the 15 catalog tools in name order") {
        auto reg = default_registry();
        auto expect = kCatalog;
        std::sort(expect.begin(), expect.end());
        CHECK(reg.list() == expect);
        CHECK(reg.size() == 15);
        auto names = catalog_tool_names();
        std::sort(names.begin(), names.end());
        CHECK(names == expect);
        CHECK(default_registry().list() == reg.list());
    }

    TEST_CASE("registration rejects duplicates and financial tools without an amount parameter") {
        ToolRegistry reg;
        reg.register_tool({"ping", {}, EffectClass::Read, [](sim::World&, const json&) { return ToolResult::ok({}); }});
        CHECK(reg.find("ping") != nullptr);
        CHECK_ERROR_CODE(reg.register_tool({"ping", {}, EffectClass::Read, nullptr}), ErrorCode::DuplicateName);
        CHECK_ERROR_CODE(reg.register_tool({"pay", {{"to", ParamType::String}}, EffectClass::Financial, nullptr}),
                         ErrorCode::ValidationError);
        for (const auto& name : default_registry().list()) {
            const auto* spec = default_registry().find(name);
            if (spec->effect != EffectClass::Financial) continue;
            CHECK(std::any_of(spec->params.begin(), spec->params.end(), [](const ParamSpec& p) {
                return p.financial_amount && p.type == ParamType::Number;
            }));
        }
    }

    TEST_CASE("schema validation") {
        auto reg = default_registry();
        CHECK_ERROR_CODE(reg.validate({"c", 1, "teleport", {}}), ErrorCode::UnknownTool);
        CHECK_ERROR_CODE(reg.validate({"c", 1, "get_merchant_status", json::object()}), ErrorCode::SchemaViolation);
        CHECK_ERROR_CODE(reg.validate({"c", 1, "get_merchant_status", {{"merchant_id", 4}}}), ErrorCode::SchemaViolation);
        CHECK_ERROR_CODE(reg.validate({"c", 1, "get_merchant_status", {{"merchant_id", "m"}, {"extra", 1}}}),
                         ErrorCode::SchemaViolation);
        CHECK_NOTHROW(reg.validate({"c", 1, "get_merchant_status", {{"merchant_id", "m-3"}}}));
    }

    TEST_CASE("safety: financial ceiling is inclusive, reads are allowed") {
        auto reg = default_registry();
        const auto& refund = *reg.find("issue_instant_refund");
        SafetyPolicy pol;  // limit 500
        CHECK(check_safety(refund_call("c", 1, 1e9), refund, pol, false) == std::optional<std::string>(policy::kFinancialLimit));
        CHECK_FALSE(check_safety(refund_call("c", 1, 500.0), refund, pol, false).has_value());
        CHECK(check_safety(refund_call("c", 1, 500.01), refund, pol, false).has_value());
        CHECK_FALSE(check_safety({"c", 1, "get_merchant_status", {{"merchant_id", "m"}}}, *reg.find("get_merchant_status"),
                                 pol, true)
                        .has_value());
    }

    TEST_CASE("safety: mutate and financial calls on escalated cases are denied") {
        auto reg = default_registry();
        SafetyLayer layer;
        layer.mark_escalated("closed");
        ToolCall reassign{"closed", 9, "reassign_driver", {{"order_id", "o"}, {"driver_id", "d"}, {"merchant_id", "m"}}};
        CHECK(layer.check(reassign, *reg.find("reassign_driver")) == std::optional<std::string>(policy::kEscalatedCase));
        CHECK(layer.check(refund_call("closed", 9, 1.0), *reg.find("issue_instant_refund")).has_value());
        reassign.case_id = "open";
        CHECK_FALSE(layer.check(reassign, *reg.find("reassign_driver")).has_value());
    }

    TEST_CASE("safety: denial predicate oracle over random financial calls") {
        auto reg = default_registry();
        const auto& refund = *reg.find("issue_instant_refund");
        Gen g(41);
        for (int i = 0; i < 5000; ++i) {
            SafetyPolicy pol;
            pol.financial_limit = static_cast<double>(g.range(0, 1000));
            double amount = g.coin(0.1) ? pol.financial_limit : g.real(0.0, 2000.0);
            bool denied = check_safety(refund_call("c", 1, amount), refund, pol, false).has_value();
            CHECK(denied == (amount > pol.financial_limit));
        }
    }

    TEST_CASE("safety policy file parsing") {
        auto p = SafetyPolicy::parse("# limits\nfinancial_limit=250\npii_patterns=pii.txt\n");
        CHECK(p.financial_limit == 250.0);
        CHECK(p.pii_patterns_path == "pii.txt");
        CHECK_ERROR_CODE(SafetyPolicy::parse("colour=blue\n"), ErrorCode::ConfigParse);
        CHECK_ERROR_CODE(SafetyPolicy::parse("financial_limit=lots\n"), ErrorCode::ConfigParse);
    }

    TEST_CASE("redaction examples") {
        auto [text, n] = redact_pii("call me at +1-555-0123");
        CHECK(text == "call me at [PHONE]");
        CHECK(n == 1);
        auto [same, zero] = redact_pii("the gate is locked");
        CHECK(same == "the gate is locked");
        CHECK(zero == 0);
        CHECK(redact_pii("write to jo.doe@example.com").first == "write to [EMAIL]");
        CHECK(redact_pii("left at 42 Elm Street today").first == "left at [ADDRESS] today");
    }

    TEST_CASE("redaction is idempotent and leaves no detectable PII on generated strings") {
        Gen g(42);
        const std::vector<std::string> streets = {"Street", "Avenue", "Road", "Lane", "Drive", "Blvd"};
        for (int i = 0; i < 2000; ++i) {
            std::string s;
            for (long parts = g.range(1, 6); parts > 0; --parts) {
                switch (g.range(0, 4)) {
                    case 0: s += "+1-" + g.digits(3) + "-" + g.digits(4); break;
                    case 1: s += g.digits(3) + "." + g.digits(3) + "." + g.digits(4); break;
                    case 2: s += g.word() + "." + g.word() + "@" + g.word() + ".com"; break;
                    case 3: s += std::to_string(g.range(1, 9999)) + " Maple " + g.pick(streets); break;
                    default: s += g.word(); break;
                }
                s += g.coin() ? " " : ", ";
            }
            auto once = redact_pii(s);
            auto twice = redact_pii(once.first);
            CHECK(twice.first == once.first);
            CHECK(twice.second == 0);
            CHECK_FALSE(looks_like_pii(once.first));
            CHECK_FALSE(Redactor::defaults().contains_pii(once.first));
        }
    }

    TEST_CASE("redactor pattern file parsing") {
        auto r = Redactor::parse("# label\tregex\nTICKET\tT-\\d+\n");
        CHECK(r.redact("see T-42").first == "see [TICKET]");
        CHECK_ERROR_CODE(Redactor::parse("NOTAB\n"), ErrorCode::ConfigParse);
        auto shipped = Redactor::load(std::string(LMR_DEFAULT_DATA_DIR) + "/pii_patterns.txt");
        CHECK(shipped.patterns().size() == Redactor::defaults().patterns().size());
    }

    TEST_CASE("collect_evidence on the golden world returns photos and two intact-seal answers") {
        auto s = scenario("golden-damaged-packaging");
        auto world = sim::World::from_scenario(s);
        SafetyLayer safety;
        auto r = invoke_tool(shared_env().registry, world, {"g", 4, "collect_evidence", {{"order_id", "o-1001"}}}, safety);
        REQUIRE(r.status == Status::Success);
        CHECK(r.payload.at("customer_answer") == "Yes, seal was intact.");
        CHECK(r.payload.at("driver_answer") == "Yes, seal was intact.");
        CHECK_FALSE(r.payload.at("photos").empty());
    }

    TEST_CASE("get_merchant_status reports an offline merchant") {
        auto world = sim::World::from_scenario(scenario("merchant-offline"));
        SafetyLayer safety;
        auto r = invoke_tool(shared_env().registry, world, {"m", 1, "get_merchant_status", {{"merchant_id", "m-5"}}}, safety);
        CHECK(r.status == Status::Success);
        CHECK(r.payload.at("merchant_status") == "offline");
    }

    TEST_CASE("re-invoking the same (case, step) returns the recorded result and applies once") {
        auto world = sim::World::from_scenario(scenario("golden-damaged-packaging"));
        SafetyLayer safety;
        auto call = refund_call("g", 7, 24.5);
        auto first = invoke_tool(shared_env().registry, world, call, safety);
        auto ledger = world.state().ledger.size();
        auto second = invoke_tool(shared_env().registry, world, call, safety);
        CHECK(first.to_json() == second.to_json());
        CHECK(world.state().ledger.size() == ledger);
        CHECK(ledger == 1);
        for (const auto& [key, n] : world.mutation_counts()) CHECK(n <= 1);
    }

    TEST_CASE("over-limit refunds never succeed and never touch the ledger") {
        auto world = sim::World::from_scenario(scenario("golden-damaged-packaging"));
        SafetyLayer safety;
        auto r = invoke_tool(shared_env().registry, world, refund_call("g", 1, 900.0), safety);
        CHECK(r.status == Status::Denied);
        CHECK(r.reason == policy::kFinancialLimit);
        CHECK(r.payload.at("policy") == policy::kFinancialLimit);
        CHECK(world.state().ledger.empty());
    }

    TEST_CASE("tool payloads are redacted") {
        auto world = sim::World::from_scenario(scenario("wrong-address"));
        SafetyLayer safety;
        auto r = invoke_tool(shared_env().registry, world, {"w", 2, "contact_recipient_via_chat", {{"customer_id", "c-55"}}},
                             safety);
        REQUIRE(r.status == Status::Success);
        CHECK(r.redactions > 0);
        CHECK_FALSE(looks_like_pii(r.payload.dump()));
    }

    TEST_CASE("backend failures surface as Fail results") {
        auto world = sim::World::from_scenario(scenario("traffic-obstruction"));
        SafetyLayer safety;
        auto r = invoke_tool(shared_env().registry, world,
                             {"t", 3, "re-route_driver", {{"driver_id", "d-3"}, {"route", "primary"}}}, safety);
        CHECK(r.status == Status::Fail);
        CHECK(r.reason.find("closed") != std::string::npos);
    }
}
