#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <unordered_set>
#include <utility>
#include <variant>
#include <vector>

#include "lmr/common.hpp"

namespace lmr::core {

enum class Reporter { Customer, Driver, Merchant, System };

std::string_view to_string(Reporter r);
Reporter reporter_from_string(std::string_view s);

struct DisruptionEvent {
    std::string id;
    Reporter reporter = Reporter::Customer;
    std::string text;
    std::uint64_t received_at = 0;
    std::optional<std::string> scenario_ref;
    // Structured fields attached by the scenario corpus (field name -> raw value).
    std::map<std::string, std::string> fields;

    json to_json() const;
    static DisruptionEvent from_json(const json& j);
    std::string digest() const;
};

// Hands out events with unique ids and strictly increasing logical timestamps.
class EventIngestor {
public:
    explicit EventIngestor(Clock& clock) : clock_(&clock) {}

    DisruptionEvent ingest(std::string id, Reporter reporter, std::string text,
                           std::optional<std::string> scenario_ref = std::nullopt,
                           std::map<std::string, std::string> fields = {});

private:
    Clock* clock_;
    std::unordered_set<std::string> seen_;
};

using FactValue = std::variant<std::string, double, bool>;

json fact_value_to_json(const FactValue& v);
FactValue fact_value_from_json(const json& j);
std::string fact_value_text(const FactValue& v);
// "true"/"false" -> bool, numeric literal -> double, anything else -> string.
FactValue parse_fact_value(std::string_view raw);

struct Provenance {
    enum class Kind { Pattern, Field };
    Kind kind = Kind::Pattern;
    std::string source;  // pattern id or field name
    std::size_t offset = 0;
    std::size_t length = 0;
};

struct Fact {
    FactValue value;
    Provenance provenance;
};

struct FactSet {
    std::map<std::string, Fact> facts;
    std::set<std::string> hints;
    std::string source_event;

    bool has(const std::string& key) const { return facts.count(key) != 0; }
    std::optional<std::string> text(const std::string& key) const;
    json to_json() const;
    static FactSet from_json(const json& j);
};

enum class Category {
    SupportFailure,
    DriverBehaviour,
    Delay,
    Cancellation,
    Navigation,
    ComplexAdjudication,
    Unknown,
};

std::string_view to_string(Category c);
std::optional<Category> category_from_string(std::string_view s);
const std::vector<Category>& all_categories();

struct TaskCategory {
    Category label = Category::Unknown;
    double confidence = 0.0;
};

// One text pattern of the fact extractor. Emitted fact values and hints may use
// "$N" to refer to capture group N of the match.
struct ExtractionPattern {
    std::string id;
    std::regex re;
    std::vector<std::pair<std::string, std::string>> facts;
    std::vector<std::string> hints;
};

const std::vector<ExtractionPattern>& default_patterns();

struct RoutingRule {
    Category category;
    std::vector<std::string> keywords;
    std::string supervisor_id;
};

class RoutingTable {
public:
    RoutingTable() = default;
    explicit RoutingTable(std::vector<RoutingRule> rules) : rules_(std::move(rules)) {}

    static RoutingTable defaults();
    // category <TAB> keyword[,keyword...] <TAB> supervisor_id, one rule per line.
    static RoutingTable parse(std::string_view text);
    static RoutingTable load(const std::string& path);

    const std::vector<RoutingRule>& rules() const { return rules_; }
    const RoutingRule* find(Category c) const;
    // Every keyword across all rows, in table order.
    std::vector<std::string> all_keywords() const;

private:
    std::vector<RoutingRule> rules_;
};

FactSet extract_facts(const DisruptionEvent& event,
                      const RoutingTable& table = RoutingTable::defaults());

struct Route {
    TaskCategory category;
    std::string supervisor_id;
};

Route classify_and_route(const FactSet& facts, const RoutingTable& table = RoutingTable::defaults());

}  // namespace lmr::core
