// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace gpart {

/// Malformed layer list or shape/length mismatch against a manifest.
class ManifestError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Out-of-range construction parameter (d, rank, sizes, guards).
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Non-finite loss or activation surfaced from training or evaluation.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed checkpoint or CSV payload. Carries the byte offset of the fault.
class FormatError : public std::runtime_error {
public:
    FormatError(const std::string& what, std::uint64_t offset)
        : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

    std::uint64_t offset() const noexcept { return offset_; }

private:
    std::uint64_t offset_;
};

/// A well-formed artifact that does not fit the model it is applied to.
class CompatibilityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid run configuration; names the key and the line it came from.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace gpart
