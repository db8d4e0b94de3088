// SPDX-FileCopyrightText: Copyright 2026 The lsac Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Central-difference checks over every primitive op and every composite
// layer the model is built from, at small sizes and fixed seeds.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace lsac {

struct GradientCase {
    std::string name;
    std::uint64_t seed = 0;
    double max_rel_error = 0.0;
    std::size_t coords = 0;
    std::string worst;
};

struct GradientSuiteResult {
    std::vector<GradientCase> cases;
    double seconds = 0.0;

    double max_rel_error() const;
    bool passed(double tolerance) const { return max_rel_error() < tolerance; }
};

inline constexpr double kGradientTolerance = 1e-4;

// Runs every case for seeds 0 .. seeds-1. `progress` gets one line per
// case name with its worst error over the seeds.
GradientSuiteResult run_gradient_suite(std::size_t seeds = 10, std::ostream* progress = nullptr);

}  // namespace lsac
