#include <algorithm>
#include <set>

#include "doctest.h"
#include "lmr/core.hpp"
#include "support/gen.hpp"

using namespace lmr;
using namespace lmr::core;
using lmr::testing::Gen;

namespace {

DisruptionEvent make_event(const std::string& text, std::map<std::string, std::string> fields = {}) {
    static Clock clock;
    static std::uint64_t n = 0;
    EventIngestor ingest(clock);
    return ingest.ingest("ev-" + std::to_string(++n), Reporter::Customer, text, std::nullopt, std::move(fields));
}

FactSet hints_only(std::set<std::string> hints) {
    FactSet f;
    f.hints = std::move(hints);
    f.source_event = "synthetic";
    return f;
}

}  // namespace

TEST_SUITE("core") {
    TEST_CASE("fnv1a matches published 64-bit test vectors") {
        CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
        CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
        CHECK(fnv1a("foobar") == 0x85944171f73967e8ULL);
        CHECK(hex_digest(0xabcULL) == "0000000000000abc");
    }

    TEST_CASE("digest_of is independent of key insertion order") {
        json a = {{"x", 1}, {"y", {1, 2}}};
        json b;
        b["y"] = {1, 2};
        b["x"] = 1;
        CHECK(digest_of(a) == digest_of(b));
    }

    TEST_CASE("ingestion rejects empty text and duplicate ids, ticks strictly increase") {
        Clock clock;
        EventIngestor ingest(clock);
        CHECK_THROWS_AS(ingest.ingest("a", Reporter::Driver, "   "), Error);
        auto e1 = ingest.ingest("a", Reporter::Driver, "late again");
        auto e2 = ingest.ingest("b", Reporter::Driver, "late again");
        CHECK(e2.received_at > e1.received_at);
        CHECK_THROWS_AS(ingest.ingest("a", Reporter::Driver, "x"), Error);
    }

    TEST_CASE("golden dispute text yields spill, item and seal facts with dispute hints") {
        auto facts = extract_facts(make_event("Customer says drink spilled, but bag was sealed. What do I do?"));
        CHECK(facts.text("item") == "drink");
        CHECK(facts.text("damage") == "spilled");
        CHECK(facts.text("seal") == "intact");
        CHECK(facts.hints == std::set<std::string>{"damaged", "spilled", "dispute", "sealed bag"});
        auto route = classify_and_route(facts);
        CHECK(route.category.label == Category::ComplexAdjudication);
        CHECK(route.supervisor_id == "sup-adjudication");
    }

    TEST_CASE("text without any pattern yields no facts and the unclassified hint") {
        auto facts = extract_facts(make_event("hello"));
        CHECK(facts.facts.empty());
        CHECK(facts.hints == std::set<std::string>{"unclassified"});
        auto route = classify_and_route(facts);
        CHECK(route.category.label == Category::Unknown);
        CHECK(route.category.confidence == 0.0);
        CHECK(route.supervisor_id == "sup-default");
    }

    TEST_CASE("structured fields are copied one to one (field-copy oracle)") {
        Gen g(11);
        for (int trial = 0; trial < 200; ++trial) {
            std::map<std::string, std::string> fields;
            const auto n = g.range(0, 6);
            for (long i = 0; i < n; ++i) {
                std::string v;
                switch (g.range(0, 3)) {
                    case 0: v = g.word(); break;
                    case 1: v = std::to_string(g.range(0, 999)); break;
                    case 2: v = g.coin() ? "true" : "false"; break;
                    default: v = g.word() + "-" + g.digits(3); break;
                }
                fields[g.word(4, 9) + "_" + g.word(2, 4)] = v;
            }
            auto facts = extract_facts(make_event("status update", fields));
            for (const auto& [name, raw] : fields) {
                REQUIRE(facts.has(name));
                const auto& f = facts.facts.at(name);
                CHECK(f.provenance.kind == Provenance::Kind::Field);
                CHECK(f.provenance.source == name);
                // Oracle: the typed value is recovered from the raw string alone.
                json expect;
                if (raw == "true" || raw == "false") expect = raw == "true";
                else if (!raw.empty() && std::all_of(raw.begin(), raw.end(), ::isdigit)) expect = std::stod(raw);
                else expect = raw;
                CHECK(fact_value_to_json(f.value) == expect);
            }
        }
        auto offline = extract_facts(make_event("order stuck", {{"merchant_status", "offline"}}));
        CHECK(offline.text("merchant_status") == "offline");
    }

    TEST_CASE("every pattern fact points at a real substring of the text (provenance closure)") {
        const std::vector<std::string> vocab = {
            "customer", "says",    "drink",   "spilled", "but",      "bag",    "was",     "sealed",  "driver",
            "threw",    "the",     "package", "crushed", "seal",     "is",     "broken",  "merchant", "offline",
            "wrong",    "address", "late",    "traffic", "accident", "urgent", "refund",  "canceled", "order",
            "claims",   "intact",  "leaked",  "food",    "ruined",   "gate",   "locked",  "incorrect", "charged"};
        Gen g(12);
        for (int trial = 0; trial < 500; ++trial) {
            std::string text;
            const auto n = g.range(1, 14);
            for (long i = 0; i < n; ++i) text += (i ? " " : "") + g.pick(vocab);
            auto facts = extract_facts(make_event(text));
            CHECK_FALSE(facts.hints.empty());
            for (const auto& [key, f] : facts.facts) {
                REQUIRE(f.provenance.kind == Provenance::Kind::Pattern);
                REQUIRE(f.provenance.offset + f.provenance.length <= text.size());
                CHECK(f.provenance.length > 0);
            }
        }
    }

    TEST_CASE("extraction and routing are deterministic") {
        const std::string text = "Driver was careless and threw the bag, the seal is torn.";
        auto a = extract_facts(make_event(text));
        auto b = extract_facts(make_event(text));
        a.source_event = b.source_event;
        CHECK(a.to_json() == b.to_json());
        CHECK(classify_and_route(a).category.label == classify_and_route(b).category.label);
    }

    TEST_CASE("hints {merchant, offline} route to Cancellation") {
        auto route = classify_and_route(hints_only({"merchant", "offline"}));
        CHECK(route.category.label == Category::Cancellation);
        CHECK(route.supervisor_id == "sup-logistics");
    }

    TEST_CASE("each routing row wins on its own keywords (keyword-table oracle)") {
        const auto table = RoutingTable::defaults();
        for (const auto& row : table.rules()) {
            if (row.keywords.empty()) continue;
            std::set<std::string> hints(row.keywords.begin(), row.keywords.end());
            auto route = classify_and_route(hints_only(hints), table);
            CHECK(route.category.label == row.category);
            CHECK(route.category.confidence == doctest::Approx(1.0));
            CHECK(route.supervisor_id == row.supervisor_id);
        }
    }

    TEST_CASE("classification matches an independent hit-count oracle on random hint sets") {
        const auto table = RoutingTable::defaults();
        auto keywords = table.all_keywords();
        keywords.push_back("noise");
        keywords.push_back("unclassified");
        Gen g(13);
        for (int trial = 0; trial < 2000; ++trial) {
            std::set<std::string> hints;
            const auto n = g.range(0, 6);
            for (long i = 0; i < n; ++i) hints.insert(g.pick(keywords));
            // Oracle: the row with strictly most hits, earliest row on ties.
            Category expect = Category::Unknown;
            std::size_t best = 0;
            double conf = 0.0;
            for (const auto& row : table.rules()) {
                std::size_t hits = 0;
                for (const auto& k : row.keywords) hits += hints.count(k);
                if (hits > best) {
                    best = hits;
                    expect = row.category;
                    conf = double(hits) / double(row.keywords.size());
                }
            }
            auto route = classify_and_route(hints_only(hints), table);
            CHECK(route.category.label == expect);
            CHECK(route.category.confidence == doctest::Approx(conf));
            CHECK(route.category.confidence >= 0.0);
            CHECK(route.category.confidence <= 1.0);
            if (route.category.label == Category::Unknown) CHECK(route.category.confidence == 0.0);
        }
    }

    TEST_CASE("a routing table missing the chosen category raises NoSupervisorRegistered") {
        auto table = RoutingTable::parse("Delay\tlate\tsup-logistics\n");
        CHECK_NOTHROW(classify_and_route(hints_only({"late"}), table));
        try {
            classify_and_route(hints_only({"unclassified"}), table);
            FAIL("expected NoSupervisorRegistered");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::NoSupervisorRegistered);
        }
    }

    TEST_CASE("routing table parse rejects malformed rows and accepts the shipped file") {
        CHECK_THROWS_AS(RoutingTable::parse("Delay\tlate\n"), Error);
        CHECK_THROWS_AS(RoutingTable::parse("Nonsense\tx\tsup\n"), Error);
        auto shipped = RoutingTable::load(std::string(LMR_DEFAULT_DATA_DIR) + "/routing.tsv");
        REQUIRE(shipped.find(Category::Unknown));
        CHECK(shipped.find(Category::Unknown)->supervisor_id == "sup-default");
        for (auto c : all_categories()) CHECK(shipped.find(c) != nullptr);
    }

    TEST_CASE("event and fact set JSON round-trip") {
        auto ev = make_event("Customer says drink spilled, but bag was sealed.", {{"order_id", "o-1"}});
        CHECK(DisruptionEvent::from_json(ev.to_json()).to_json() == ev.to_json());
        auto facts = extract_facts(ev);
        CHECK(FactSet::from_json(facts.to_json()).to_json() == facts.to_json());
    }
}
