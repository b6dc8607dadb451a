// Copyright Contributors to the fsplat project
// SPDX-License-Identifier: Apache-2.0
//
#include "fsplat/error.hpp"

namespace fsplat {

const char* to_string(Errc code) {
    switch (code) {
        case Errc::DegenerateQuaternion: return "DegenerateQuaternion";
        case Errc::ShapeMismatch: return "ShapeMismatch";
        case Errc::LayoutMismatch: return "LayoutMismatch";
        case Errc::IoFailure: return "IoFailure";
        case Errc::FormatVersionMismatch: return "FormatVersionMismatch";
        case Errc::CorruptHeader: return "CorruptHeader";
        case Errc::StaleAux: return "StaleAux";
        case Errc::BadDirection: return "BadDirection";
        case Errc::BadRange: return "BadRange";
        case Errc::EmptyAnchorSet: return "EmptyAnchorSet";
        case Errc::NonFiniteLoss: return "NonFiniteLoss";
        case Errc::BadStride: return "BadStride";
        case Errc::TooLarge: return "TooLarge";
        case Errc::NonFiniteHvp: return "NonFiniteHvp";
        case Errc::BadConfig: return "BadConfig";
    }
    return "Unknown";
}

}  // namespace fsplat
