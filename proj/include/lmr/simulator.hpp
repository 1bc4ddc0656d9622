#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "lmr/common.hpp"
#include "lmr/core.hpp"

namespace lmr::sim {

struct Merchant {
    std::string status = "online";
    std::string location;
    friend bool operator==(const Merchant&, const Merchant&) = default;
};

struct Driver {
    std::string location;
    std::string assignment;
    std::string route;
    std::string destination;
    bool exonerated = false;
    friend bool operator==(const Driver&, const Driver&) = default;
};

struct Customer {
    std::string address;
    std::string phone;
    std::string email;
    friend bool operator==(const Customer&, const Customer&) = default;
};

struct Order {
    std::string merchant;
    std::string driver;
    std::string customer;
    std::vector<std::string> items;
    std::string seal_state = "intact";
    std::string destination;
    std::string status = "in_transit";
    double total = 0.0;
    double refunded = 0.0;
    bool mediation = false;
    friend bool operator==(const Order&, const Order&) = default;
};

struct Traffic {
    double level = 0.0;
    bool closed = false;
    friend bool operator==(const Traffic&, const Traffic&) = default;
};

struct LedgerEntry {
    std::string order;
    std::string customer;
    double amount = 0.0;
    friend bool operator==(const LedgerEntry&, const LedgerEntry&) = default;
};

struct Notification {
    std::string recipient;
    std::string channel;
    std::string message;
    friend bool operator==(const Notification&, const Notification&) = default;
};

struct Feedback {
    std::string merchant;
    std::string order;
    std::string note;
    friend bool operator==(const Feedback&, const Feedback&) = default;
};

struct WorldState {
    std::map<std::string, Merchant> merchants;
    std::map<std::string, Driver> drivers;
    std::map<std::string, Customer> customers;
    std::map<std::string, Order> orders;
    std::map<std::string, Traffic> traffic;  // route name -> conditions
    std::map<std::string, std::string> lockers;  // locker id -> location
    std::vector<LedgerEntry> ledger;
    std::vector<Notification> outbox;
    std::vector<Feedback> feedback;

    json to_json() const;
    friend bool operator==(const WorldState&, const WorldState&) = default;
};

namespace effect {
struct Reroute { std::string driver, route, destination; };
struct Reassign { std::string order, driver, merchant; };
struct Exonerate { std::string driver, order; };
struct LogFeedback { std::string merchant, order, note; };
struct Refund { std::string order, customer; double amount = 0.0; };
struct Notify { std::string recipient, channel, message; };
struct StartMediation { std::string order; };
}  // namespace effect

using Effect = std::variant<effect::Reroute, effect::Reassign, effect::Exonerate, effect::LogFeedback,
                            effect::Refund, effect::Notify, effect::StartMediation>;

bool is_financial(const Effect& e);

// Returns a new state that differs from `world` only in the effect's target.
// The ledger grows iff the effect is financial.
WorldState apply_effect(WorldState world, const Effect& e);

struct FaultTrigger {
    enum class Kind { Any, Step, Call, Arg };
    Kind kind = Kind::Any;
    std::uint64_t value = 0;  // step or 1-based call index, armed from that point on
    std::string arg_key;
    std::string arg_value;
};

struct FaultSpec {
    enum class Behavior { FailOnce, FailN, FailAlways };
    std::string tool;
    FaultTrigger trigger;
    Behavior behavior = Behavior::FailOnce;
    std::uint32_t n = 1;
};

FaultSpec parse_fault(std::string_view line);

// Scripted stakeholder payloads: tool -> fields. "tool@N" keys apply only to
// the N-th call of that tool and take precedence over the plain entry.
using Responses = std::map<std::string, std::map<std::string, std::string>>;

struct Expected {
    std::vector<std::string> tools;
    std::optional<std::string> status;
};

struct Scenario {
    std::string key;
    std::string title;
    core::Category category = core::Category::Unknown;
    core::Reporter reporter = core::Reporter::Customer;
    std::string event_text;
    std::uint64_t seed = 0;
    std::map<std::string, std::string> fields;
    WorldState world_init;
    Responses responses;
    std::vector<FaultSpec> faults;
    std::optional<Expected> expected;
};

// Sections [META] [FIELDS] [WORLD] [RESPONSES] [FAULTS] [EXPECTED].
// `registered_tools` is the registry the scenario will run against; faults,
// responses and expected sequences may only name those tools.
Scenario parse_scenario(std::string_view text, const std::set<std::string>& registered_tools,
                        const std::string& origin = "<scenario>");
Scenario load_scenario(const std::string& path, const std::set<std::string>& registered_tools);

// Sorted list of *.scn files in a corpus directory.
std::vector<std::string> list_corpus(const std::string& dir);

// The mutable environment of one case. Tool invocations are serialized
// through it; it also keeps the (case_id, step) journal that makes tool
// effects exactly-once.
class World {
public:
    World(WorldState init, std::uint64_t seed, Responses responses = {},
          std::vector<FaultSpec> faults = {});
    static World from_scenario(const Scenario& s, std::optional<std::uint64_t> seed = std::nullopt);

    World(const World&) = delete;
    World& operator=(const World&) = delete;

    const WorldState& state() const { return state_; }
    void apply(const Effect& e) {
        state_ = apply_effect(std::move(state_), e);
        ++effects_applied_;
    }
    std::uint64_t effects_applied() const { return effects_applied_; }

    void inject_fault(FaultSpec fault);
    // Counts the call and reports whether an injected fault fires for it.
    std::optional<std::string> register_call(const std::string& tool, std::uint64_t step,
                                             const json& args);
    std::uint64_t call_count(const std::string& tool) const;

    // Scripted payload for the current call of `tool` (call_count must already
    // include this call).
    std::map<std::string, std::string> response(const std::string& tool) const;

    // Uniform draw in [0,1) from the world's seeded generator.
    double uniform();
    std::uint64_t seed() const { return seed_; }

    std::mutex& mutex() { return mu_; }

    const json* journal_lookup(const std::string& case_id, std::uint64_t step) const;
    void journal_record(const std::string& case_id, std::uint64_t step, json result);
    // Number of invocations that changed the world under each (case_id, step) key.
    const std::map<std::pair<std::string, std::uint64_t>, int>& mutation_counts() const {
        return mutations_;
    }
    void count_mutation(const std::string& case_id, std::uint64_t step) {
        ++mutations_[{case_id, step}];
    }

private:
    struct ArmedFault {
        FaultSpec spec;
        std::uint32_t fired = 0;
    };

    WorldState state_;
    std::uint64_t seed_;
    std::mt19937_64 rng_;
    Responses responses_;
    std::vector<ArmedFault> faults_;
    std::map<std::string, std::uint64_t> calls_;
    std::map<std::pair<std::string, std::uint64_t>, json> journal_;
    std::map<std::pair<std::string, std::uint64_t>, int> mutations_;
    std::uint64_t effects_applied_ = 0;
    std::mutex mu_;
};

}  // namespace lmr::sim
