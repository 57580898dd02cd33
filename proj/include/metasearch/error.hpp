#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace metasearch {

enum class ErrorKind {
    // corpus
    MissingColumn,
    DuplicateDocId,
    MalformedRow,
    // index
    EmptyCorpus,
    DuplicateSurrogateId,
    IoFailure,
    FormatVersionMismatch,
    // query
    MalformedXml,
    MissingField,
    // retrieval
    TokenizerMismatch,
    UnknownDocId,
    DimensionMismatch,
    MissingVector,
    InvalidParameter,
    // fusion
    EmptyRunList,
    TopicSetMismatch,
    WrongRunCount,
    WrongGroupShape,
    TooFewRuns,
    InvalidFraction,
    // eval
    MalformedLine,
    RankGap,
    InvalidGrade,
    DuplicateJudgment,
    NoOverlap,
    // cli
    ConfigInvalid,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::MissingColumn: return "MissingColumn";
        case ErrorKind::DuplicateDocId: return "DuplicateDocId";
        case ErrorKind::MalformedRow: return "MalformedRow";
        case ErrorKind::EmptyCorpus: return "EmptyCorpus";
        case ErrorKind::DuplicateSurrogateId: return "DuplicateSurrogateId";
        case ErrorKind::IoFailure: return "IoFailure";
        case ErrorKind::FormatVersionMismatch: return "FormatVersionMismatch";
        case ErrorKind::MalformedXml: return "MalformedXml";
        case ErrorKind::MissingField: return "MissingField";
        case ErrorKind::TokenizerMismatch: return "TokenizerMismatch";
        case ErrorKind::UnknownDocId: return "UnknownDocId";
        case ErrorKind::DimensionMismatch: return "DimensionMismatch";
        case ErrorKind::MissingVector: return "MissingVector";
        case ErrorKind::InvalidParameter: return "InvalidParameter";
        case ErrorKind::EmptyRunList: return "EmptyRunList";
        case ErrorKind::TopicSetMismatch: return "TopicSetMismatch";
        case ErrorKind::WrongRunCount: return "WrongRunCount";
        case ErrorKind::WrongGroupShape: return "WrongGroupShape";
        case ErrorKind::TooFewRuns: return "TooFewRuns";
        case ErrorKind::InvalidFraction: return "InvalidFraction";
        case ErrorKind::MalformedLine: return "MalformedLine";
        case ErrorKind::RankGap: return "RankGap";
        case ErrorKind::InvalidGrade: return "InvalidGrade";
        case ErrorKind::DuplicateJudgment: return "DuplicateJudgment";
        case ErrorKind::NoOverlap: return "NoOverlap";
        case ErrorKind::ConfigInvalid: return "ConfigInvalid";
    }
    return "Unknown";
}

/// Every failure raised by the library. `kind()` is stable and meant for
/// programmatic dispatch; `what()` carries the human-readable detail
/// (column name, row number, offending id, ...).
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& detail)
        : std::runtime_error(std::string(to_string(kind)) + ": " + detail), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace metasearch
