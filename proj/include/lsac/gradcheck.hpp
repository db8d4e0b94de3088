// SPDX-FileCopyrightText: Copyright 2026 The lsac Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lsac/graph.hpp"

namespace lsac {

// Builds a graph over leaf inputs and returns the node to differentiate.
// Non-scalar results are reduced to a scalar with fixed random weights.
using GraphBuilder = std::function<NodeRef(Graph&, std::span<const NodeRef>)>;

struct GradCheckOptions {
    double eps = 1e-5;
    // Relative error is |analytic - numeric| / max(|analytic|, |numeric|, floor).
    double floor = 1e-4;
    // Coordinates probed per input; 0 probes all of them.
    std::size_t max_coords_per_input = 0;
    std::uint64_t seed = 0;
};

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t coords_checked = 0;
    std::string worst;  // "input <i> element <j>: analytic a numeric n"
};

// Compares reverse-mode gradients against central differences
// (f(x+eps) - f(x-eps)) / (2 eps), probing each input element independently.
GradCheckResult check_gradients(const GraphBuilder& build, std::span<const Tensor> inputs,
                                const GradCheckOptions& options = {});

// Gradient check of a single primitive; every input is differentiated.
double finite_difference_check(OpKind op, std::span<const Tensor> inputs, double eps,
                               const OpAttrs& attrs = {});

}  // namespace lsac
