#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace flowcritic {

/// Stable error codes. The string forms are part of the CLI / log surface.
enum class ErrorCode {
    UnknownActionKind,
    MalformedAction,
    MissingArgument,
    InvalidArgument,
    MalformedJson,
    MissingKey,
    UnknownKey,
    TypeMismatch,
    StepMismatch,
    SchemaViolation,
    Unrepairable,
    Transport,
    BackendUnavailable,
    UnknownTemplate,
    ZeroAreaRegion,
    MissingManifest,
    UnresolvableImage,
    IndexGap,
    InvalidRange,
    MismatchedIds,
    WrongMode,
    SnapshotGap,
    Io,
    Usage,
};

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::UnknownActionKind: return "unknown-action-kind";
    case ErrorCode::MalformedAction: return "malformed-action";
    case ErrorCode::MissingArgument: return "missing-argument";
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::MalformedJson: return "malformed-json";
    case ErrorCode::MissingKey: return "missing-key";
    case ErrorCode::UnknownKey: return "unknown-key";
    case ErrorCode::TypeMismatch: return "type-mismatch";
    case ErrorCode::StepMismatch: return "step-mismatch";
    case ErrorCode::SchemaViolation: return "schema-violation";
    case ErrorCode::Unrepairable: return "unrepairable";
    case ErrorCode::Transport: return "transport";
    case ErrorCode::BackendUnavailable: return "backend-unavailable";
    case ErrorCode::UnknownTemplate: return "unknown-template";
    case ErrorCode::ZeroAreaRegion: return "zero-area-region";
    case ErrorCode::MissingManifest: return "missing-manifest";
    case ErrorCode::UnresolvableImage: return "unresolvable-image";
    case ErrorCode::IndexGap: return "index-gap";
    case ErrorCode::InvalidRange: return "invalid-range";
    case ErrorCode::MismatchedIds: return "mismatched-ids";
    case ErrorCode::WrongMode: return "wrong-mode";
    case ErrorCode::SnapshotGap: return "snapshot-gap";
    case ErrorCode::Io: return "io";
    case ErrorCode::Usage: return "usage";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message)
        , code_(code)
        , detail_(message)
    {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

/// Thrown by protocol parsers; carries the offending key or step when known.
class ProtocolError : public Error {
public:
    ProtocolError(ErrorCode code, const std::string& message, std::string key = {})
        : Error(code, message)
        , key_(std::move(key))
    {}

    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

} // namespace flowcritic
