#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace driftbench {

enum class ErrorKind {
    kParse,
    kDuplicateId,
    kOutOfRange,
    kBadMagic,
    kSizeMismatch,
    kNonFinite,
    kUnmappedLabel,
    kInvalidArgument,
    kDimensionMismatch,
    kTooFewGroups,
    kUnknownDomain,
    kUnknownId,
    kDivergence,
    kIo,
};

std::string_view ErrorKindName(ErrorKind kind);

/// Every failure raised by the library carries a machine-readable kind so the
/// CLI can print a single parseable line.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace driftbench
