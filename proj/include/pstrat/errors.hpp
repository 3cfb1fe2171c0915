#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pstrat {

enum class ErrorKind {
    MalformedRecord,
    EmptyArmAtLevel,
    DegenerateDenominator,
    EmptyCell,
    ZeroResponderMass,
    NoRootInBracket,
    TooManyFailedReplicates,
    InvalidArgument,
    ParseError,
    SchemaError,
    ConfigError,
    IoError,
};

inline std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::MalformedRecord: return "MalformedRecord";
    case ErrorKind::EmptyArmAtLevel: return "EmptyArmAtLevel";
    case ErrorKind::DegenerateDenominator: return "DegenerateDenominator";
    case ErrorKind::EmptyCell: return "EmptyCell";
    case ErrorKind::ZeroResponderMass: return "ZeroResponderMass";
    case ErrorKind::NoRootInBracket: return "NoRootInBracket";
    case ErrorKind::TooManyFailedReplicates: return "TooManyFailedReplicates";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::SchemaError: return "SchemaError";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::IoError: return "IoError";
    }
    return "Unknown";
}

// Estimation errors are the ones a bootstrap replicate may legitimately hit
// on a sparse resample; everything else indicates bad input or a bug.
inline bool is_estimation_failure(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::EmptyArmAtLevel:
    case ErrorKind::DegenerateDenominator:
    case ErrorKind::EmptyCell:
    case ErrorKind::ZeroResponderMass:
    case ErrorKind::NoRootInBracket:
        return true;
    default:
        return false;
    }
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

} // namespace pstrat
