#include "lmr/common.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace lmr {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::EmptyText: return "EmptyText";
        case ErrorCode::NoSupervisorRegistered: return "NoSupervisorRegistered";
        case ErrorCode::ConfigParse: return "ConfigParse";
        case ErrorCode::UnreachableTerminal: return "UnreachableTerminal";
        case ErrorCode::DanglingEdge: return "DanglingEdge";
        case ErrorCode::RuleWithoutEdge: return "RuleWithoutEdge";
        case ErrorCode::UnknownStart: return "UnknownStart";
        case ErrorCode::NoRuleMatches: return "NoRuleMatches";
        case ErrorCode::MissingExecutor: return "MissingExecutor";
        case ErrorCode::CorruptCheckpoint: return "CorruptCheckpoint";
        case ErrorCode::DuplicateCaseId: return "DuplicateCaseId";
        case ErrorCode::ZeroVector: return "ZeroVector";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::DuplicateDocId: return "DuplicateDocId";
        case ErrorCode::UnplannableCategory: return "UnplannableCategory";
        case ErrorCode::NoCapableAgent: return "NoCapableAgent";
        case ErrorCode::NoAlternative: return "NoAlternative";
        case ErrorCode::ReasonerUnavailable: return "ReasonerUnavailable";
        case ErrorCode::AllowlistViolation: return "AllowlistViolation";
        case ErrorCode::DuplicateName: return "DuplicateName";
        case ErrorCode::UnknownTool: return "UnknownTool";
        case ErrorCode::SchemaViolation: return "SchemaViolation";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::ValidationError: return "ValidationError";
        case ErrorCode::TargetMissing: return "TargetMissing";
        case ErrorCode::EmptyLog: return "EmptyLog";
        case ErrorCode::InvariantViolation: return "InvariantViolation";
        case ErrorCode::JudgeUnavailable: return "JudgeUnavailable";
        case ErrorCode::EmptyScoreSet: return "EmptyScoreSet";
        case ErrorCode::InsufficientSamples: return "InsufficientSamples";
        case ErrorCode::BiasViolation: return "BiasViolation";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex_digest(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string digest_of(const json& j) { return hex_digest(fnv1a(j.dump())); }

std::string to_lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::vector<std::string> split(std::string_view s, char sep, bool keep_empty) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (start <= s.size()) {
        auto pos = s.find(sep, start);
        if (pos == std::string_view::npos) pos = s.size();
        auto piece = trim(s.substr(start, pos - start));
        if (keep_empty || !piece.empty()) parts.push_back(std::move(piece));
        start = pos + 1;
    }
    return parts;
}

std::vector<std::string> word_tokens(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        auto c = static_cast<unsigned char>(ch);
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

bool iequals(std::string_view a, std::string_view b) { return to_lower(a) == to_lower(b); }

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace lmr
