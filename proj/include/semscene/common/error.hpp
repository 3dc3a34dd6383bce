// Copyright Contributors to the semscene Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace semscene {

enum class ErrorKind {
    kInvalidArgument,
    kFormat,
    kValidation,
    kDegenerateInput,
    kNumeric,
    kEmptyMesh,
    kUnsupported,
    kUndefinedMetric,
    kStageFailure,
};

const char* to_string(ErrorKind kind);

/// Single exception type for the whole library; `kind()` tells callers (and
/// the CLI exit-code mapping) what went wrong.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, const std::string& what) {
    if (!cond) fail(ErrorKind::kInvalidArgument, what);
}

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid argument";
    case ErrorKind::kFormat: return "format error";
    case ErrorKind::kValidation: return "validation error";
    case ErrorKind::kDegenerateInput: return "degenerate input";
    case ErrorKind::kNumeric: return "numeric error";
    case ErrorKind::kEmptyMesh: return "empty mesh";
    case ErrorKind::kUnsupported: return "unsupported";
    case ErrorKind::kUndefinedMetric: return "undefined metric";
    case ErrorKind::kStageFailure: return "stage failure";
    }
    return "error";
}

}  // namespace semscene
