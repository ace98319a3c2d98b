// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

namespace gpart {

struct PropertyResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct VerifyOptions {
    /// Substring match on property names; empty runs everything.
    std::string filter;
    /// Mutation check: the property suite projects with the 1/sqrt(n_j) scale removed.
    bool drop_projection_scale = false;
};

struct Property {
    std::string name;
    std::function<PropertyResult(const VerifyOptions&)> run;
};

/// Every cross-module invariant, in a fixed order.
const std::vector<Property>& property_registry();

/// Runs the matching properties; a thrown exception counts as a failure.
std::vector<PropertyResult> run_properties(const VerifyOptions& options);

}  // namespace gpart
