// Copyright Contributors to the fsplat project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <stdexcept>
#include <string>

namespace fsplat {

enum class Errc {
    DegenerateQuaternion,
    ShapeMismatch,
    LayoutMismatch,
    IoFailure,
    FormatVersionMismatch,
    CorruptHeader,
    StaleAux,
    BadDirection,
    BadRange,
    EmptyAnchorSet,
    NonFiniteLoss,
    BadStride,
    TooLarge,
    NonFiniteHvp,
    BadConfig,
};

const char* to_string(Errc code);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

/// Throws `Error(code, what)` unless `cond` holds.
inline void check(bool cond, Errc code, const std::string& what) {
    if (!cond) throw Error(code, what);
}

}  // namespace fsplat
