#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace perpetua {

enum class ErrorCode {
    NotIrreducible,
    NotAperiodic,
    RowSumError,
    MissingEdgeLaw,
    ExtraEdgeLaw,
    BadWeights,
    DuplicateLabel,
    BadShape,
    SingularSystem,
    ExplosionCap,
    NumericOverflow,
    ExcursionTimeout,
    NotConvergentRegime,
    PreconditionRegime,
    InsufficientSamples,
    UnclassifiedModel,
    AtomCap,
    NoConvergence,
    StandingAssumptionHolds,
    Inconclusive,
    ParseError,
};

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::NotIrreducible: return "NotIrreducible";
    case ErrorCode::NotAperiodic: return "NotAperiodic";
    case ErrorCode::RowSumError: return "RowSumError";
    case ErrorCode::MissingEdgeLaw: return "MissingEdgeLaw";
    case ErrorCode::ExtraEdgeLaw: return "ExtraEdgeLaw";
    case ErrorCode::BadWeights: return "BadWeights";
    case ErrorCode::DuplicateLabel: return "DuplicateLabel";
    case ErrorCode::BadShape: return "BadShape";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::ExplosionCap: return "ExplosionCap";
    case ErrorCode::NumericOverflow: return "NumericOverflow";
    case ErrorCode::ExcursionTimeout: return "ExcursionTimeout";
    case ErrorCode::NotConvergentRegime: return "NotConvergentRegime";
    case ErrorCode::PreconditionRegime: return "PreconditionRegime";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::UnclassifiedModel: return "UnclassifiedModel";
    case ErrorCode::AtomCap: return "AtomCap";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::StandingAssumptionHolds: return "StandingAssumptionHolds";
    case ErrorCode::Inconclusive: return "Inconclusive";
    case ErrorCode::ParseError: return "ParseError";
    }
    return "Unknown";
}

// Errors that mean the model itself is malformed (CLI exit code 2).
inline bool is_model_error(ErrorCode code) {
    switch (code) {
    case ErrorCode::NotIrreducible:
    case ErrorCode::NotAperiodic:
    case ErrorCode::RowSumError:
    case ErrorCode::MissingEdgeLaw:
    case ErrorCode::ExtraEdgeLaw:
    case ErrorCode::BadWeights:
    case ErrorCode::DuplicateLabel:
    case ErrorCode::BadShape:
    case ErrorCode::ParseError:
        return true;
    default:
        return false;
    }
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

struct Issue {
    ErrorCode code;
    std::string message;
};

// Thrown by validation with every violation found, not just the first.
class ModelError : public Error {
public:
    explicit ModelError(std::vector<Issue> issues)
        : Error(issues.empty() ? ErrorCode::BadShape : issues.front().code, summarize(issues)),
          issues_(std::move(issues)) {}

    const std::vector<Issue>& issues() const noexcept { return issues_; }

private:
    static std::string summarize(const std::vector<Issue>& issues) {
        std::string out;
        for (const auto& issue : issues) {
            if (!out.empty()) out += "; ";
            out += std::string(to_string(issue.code)) + " (" + issue.message + ")";
        }
        return out;
    }

    std::vector<Issue> issues_;
};

} // namespace perpetua
