#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace apixelhop {

enum class Errc {
    InvalidArgument,
    DecodeError,
    TooSmall,
    EmptyClass,
    InsufficientPatches,
    IndexOutOfRange,
    SingleClass,
    NonFinite,
    DimensionMismatch,
    NoPositives,
    IoError,
    FormatError,
    UnsupportedVersion,
    InvariantViolation,
};

constexpr std::string_view to_string(Errc code) {
    switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::DecodeError: return "DecodeError";
    case Errc::TooSmall: return "TooSmall";
    case Errc::EmptyClass: return "EmptyClass";
    case Errc::InsufficientPatches: return "InsufficientPatches";
    case Errc::IndexOutOfRange: return "IndexOutOfRange";
    case Errc::SingleClass: return "SingleClass";
    case Errc::NonFinite: return "NonFinite";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::NoPositives: return "NoPositives";
    case Errc::IoError: return "IoError";
    case Errc::FormatError: return "FormatError";
    case Errc::UnsupportedVersion: return "UnsupportedVersion";
    case Errc::InvariantViolation: return "InvariantViolation";
    }
    return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, Errc code, const std::string& what) {
    if (!cond) fail(code, what);
}

} // namespace apixelhop
