// Copyright (c) 2026 The viewflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>

namespace viewflow {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidPose : Error { using Error::Error; };
struct InvalidIntrinsics : Error { using Error::Error; };
struct EmptyInput : Error { using Error::Error; };
struct InvalidDimension : Error { using Error::Error; };
struct ShapeError : Error { using Error::Error; };
struct NumericalError : Error { using Error::Error; };
struct InvalidParams : Error { using Error::Error; };
struct InvalidWeights : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };
struct CheckpointError : Error { using Error::Error; };
struct LengthMismatch : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

} // namespace viewflow
