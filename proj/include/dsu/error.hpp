// Copyright 2026 The dsu-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dsu {

enum class ErrorCode {
    UnsupportedFormat,
    SampleRateMismatch,
    CorruptFile,
    EmptyFeatures,
    EmptyInput,
    DegenerateData,
    DimMismatch,
    UnknownUnit,
    MissingParam,
    InvalidLabel,
    StateMismatch,
    EmptyReference,
    InvalidArgument,
    Io,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI in particular) can map it to an exit status.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message);

    ErrorCode code() const noexcept { return code_; }
    const std::string& message() const noexcept { return message_; }

    // Same code, message prefixed with e.g. a file path or line number.
    Error with_context(const std::string& context) const;

private:
    ErrorCode code_;
    std::string message_;
};

[[noreturn]] void raise(ErrorCode code, const std::string& message);

inline void require(bool condition, ErrorCode code, const std::string& message) {
    if (!condition) raise(code, message);
}

}  // namespace dsu
