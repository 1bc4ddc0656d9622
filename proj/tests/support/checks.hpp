#pragma once

#include <optional>

#include "lmr/common.hpp"

namespace lmr::testing {

// Error code raised by f, or nullopt when it returns normally.
template <class F>
std::optional<ErrorCode> error_code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return std::nullopt;
}

}  // namespace lmr::testing

#define CHECK_ERROR_CODE(expr, code) \
    CHECK(::lmr::testing::error_code_of([&] { (void)(expr); }) == std::optional<::lmr::ErrorCode>(code))
