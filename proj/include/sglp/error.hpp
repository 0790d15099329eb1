// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace sglp {

/// Broad failure classes. The CLI maps these onto its exit codes.
enum class ErrorKind {
    usage,     // bad arguments or infeasible request
    data,      // malformed or invalid input data
    internal,  // a violated internal invariant
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail_usage(const std::string& msg) { throw Error(ErrorKind::usage, msg); }
[[noreturn]] inline void fail_data(const std::string& msg) { throw Error(ErrorKind::data, msg); }
[[noreturn]] inline void fail_internal(const std::string& msg) {
    throw Error(ErrorKind::internal, msg);
}

}  // namespace sglp
