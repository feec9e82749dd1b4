// Copyright 2026 The dsu-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "dsu/error.hpp"

namespace dsu {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
        case ErrorCode::SampleRateMismatch: return "SampleRateMismatch";
        case ErrorCode::CorruptFile: return "CorruptFile";
        case ErrorCode::EmptyFeatures: return "EmptyFeatures";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::DegenerateData: return "DegenerateData";
        case ErrorCode::DimMismatch: return "DimMismatch";
        case ErrorCode::UnknownUnit: return "UnknownUnit";
        case ErrorCode::MissingParam: return "MissingParam";
        case ErrorCode::InvalidLabel: return "InvalidLabel";
        case ErrorCode::StateMismatch: return "StateMismatch";
        case ErrorCode::EmptyReference: return "EmptyReference";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), message_(message) {}

Error Error::with_context(const std::string& context) const { return Error(code_, context + ": " + message_); }

void raise(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace dsu
