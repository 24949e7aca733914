#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace octseg {

enum class ErrorCode {
    FileNotFound,
    UnsupportedFormat,
    EmptyImage,
    InvalidImage,
    InvalidArgument,
    Precondition,
    IoError,
    DimensionMismatch,
    Phase1Empty,
    DisconnectedRoi,
    NoPath,
    OrderingViolation,
    TooShortBelowIlm,
    ConfigError,
};

constexpr std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::FileNotFound: return "file not found";
        case ErrorCode::UnsupportedFormat: return "unsupported format";
        case ErrorCode::EmptyImage: return "empty image";
        case ErrorCode::InvalidImage: return "invalid image";
        case ErrorCode::InvalidArgument: return "invalid argument";
        case ErrorCode::Precondition: return "precondition violated";
        case ErrorCode::IoError: return "i/o error";
        case ErrorCode::DimensionMismatch: return "dimension mismatch";
        case ErrorCode::Phase1Empty: return "phase1 empty";
        case ErrorCode::DisconnectedRoi: return "disconnected ROI";
        case ErrorCode::NoPath: return "no admissible path";
        case ErrorCode::OrderingViolation: return "ordering violation";
        case ErrorCode::TooShortBelowIlm: return "image too short below ILM";
        case ErrorCode::ConfigError: return "config error";
    }
    return "unknown error";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& detail)
        : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

inline void require(bool condition, ErrorCode code, const std::string& detail) {
    if (!condition) throw Error(code, detail);
}

}  // namespace octseg
