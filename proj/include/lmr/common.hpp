#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace lmr {

using json = nlohmann::json;

enum class ErrorCode {
    // core
    EmptyText,
    NoSupervisorRegistered,
    ConfigParse,
    // dcg
    UnreachableTerminal,
    DanglingEdge,
    RuleWithoutEdge,
    UnknownStart,
    NoRuleMatches,
    MissingExecutor,
    // memory
    CorruptCheckpoint,
    DuplicateCaseId,
    ZeroVector,
    DimensionMismatch,
    DuplicateDocId,
    // agents
    UnplannableCategory,
    NoCapableAgent,
    NoAlternative,
    ReasonerUnavailable,
    AllowlistViolation,
    // toolkit
    DuplicateName,
    UnknownTool,
    SchemaViolation,
    // simulator
    ParseError,
    ValidationError,
    TargetMissing,
    // orchestrator
    EmptyLog,
    InvariantViolation,
    // evaluation
    JudgeUnavailable,
    EmptyScoreSet,
    InsufficientSamples,
    BiasViolation,
    // io
    Io,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

// 64-bit FNV-1a. Used for every digest in traces, episodes and checkpoints.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex_digest(std::uint64_t h);
// Digest of the canonical (sorted-key, compact) JSON dump.
std::string digest_of(const json& j);

// Logical clock: strictly increasing integer ticks.
class Clock {
public:
    explicit Clock(std::uint64_t start = 0) : now_(start) {}
    std::uint64_t tick() { return ++now_; }
    std::uint64_t now() const { return now_; }

private:
    std::uint64_t now_;
};

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep, bool keep_empty = false);
// Lowercased alphanumeric word tokens.
std::vector<std::string> word_tokens(std::string_view s);
bool iequals(std::string_view a, std::string_view b);

std::string read_file(const std::string& path);

}  // namespace lmr
