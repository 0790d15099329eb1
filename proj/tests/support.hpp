// SPDX-License-Identifier: Apache-2.0
//
// Shared helpers for the test suites.

#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "sglp/sglp.hpp"

namespace sglp::testing {

/// Fresh scratch directory under the system temp dir, removed on scope exit.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("sglp-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    [[nodiscard]] const std::filesystem::path& path() const { return path_; }
    [[nodiscard]] std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline Matrix random_matrix(std::size_t rows, std::size_t cols, CounterRng& rng) {
    Matrix m(rows, cols);
    for (auto& v : m.values()) v = rng.normal();
    return m;
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Expects `fn` to throw sglp::Error of `kind` whose message contains `needle`.
template <typename F>
::testing::AssertionResult throws_error(F&& fn, ErrorKind kind, const std::string& needle) {
    try {
        fn();
    } catch (const Error& e) {
        if (e.kind() != kind) return ::testing::AssertionFailure() << "wrong kind: " << e.what();
        if (std::string(e.what()).find(needle) == std::string::npos)
            return ::testing::AssertionFailure() << "message '" << e.what() << "' lacks '" << needle << "'";
        return ::testing::AssertionSuccess();
    }
    return ::testing::AssertionFailure() << "no exception";
}

}  // namespace sglp::testing
