// Copyright 2026 The selfstab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace selfstab {

/// Base class for every error raised by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
    virtual const char *kind() const noexcept { return "Error"; }
};

/// A Bloch vector or density matrix outside the physical ball.
struct NonPhysical : Error {
    using Error::Error;
    const char *kind() const noexcept override { return "NonPhysical"; }
};

/// Cramer-Rao bound requested for a non-positive Fisher information.
struct DegenerateBound : Error {
    using Error::Error;
    const char *kind() const noexcept override { return "DegenerateBound"; }
};

/// An integration step produced an eigenvalue below the clamp window.
/// Usually means dt is too large for the configured rates.
struct NonPhysicalDrift : Error {
    NonPhysicalDrift(const std::string &msg, long step = -1, long node = -1, long block = -1)
        : Error(msg), step(step), node(node), block(block) {}
    const char *kind() const noexcept override { return "NonPhysicalDrift"; }
    long step;
    long node;
    long block;
};

/// Every posterior weight underflowed (or was NaN).
struct AllZeroLikelihood : Error {
    using Error::Error;
    const char *kind() const noexcept override { return "AllZeroLikelihood"; }
};

/// Malformed configuration text.
struct ParseError : Error {
    ParseError(const std::string &msg, int line, std::string key)
        : Error(msg), line(line), key(std::move(key)) {}
    const char *kind() const noexcept override { return "ParseError"; }
    int line;
    std::string key;
};

/// Well-formed configuration that violates an invariant.
struct ValidationError : Error {
    ValidationError(const std::string &msg, std::string invariant)
        : Error(msg), invariant(std::move(invariant)) {}
    const char *kind() const noexcept override { return "ValidationError"; }
    std::string invariant;
};

}  // namespace selfstab
