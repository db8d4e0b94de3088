// SPDX-FileCopyrightText: Copyright 2026 The lsac Authors
// SPDX-License-Identifier: Apache-2.0

#include "lsac/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace lsac {
namespace {

struct Evaluator {
    const GraphBuilder& build;
    Tensor weights;  // projection to a scalar, fixed across evaluations

    NodeRef scalar_of(Graph& g, std::span<const NodeRef> leaves) {
        NodeRef out = build(g, leaves);
        if (g.value(out).numel() == 1) return out;
        if (weights.empty() || weights.shape() != g.shape(out)) {
            throw Error("gradcheck: output shape changed between evaluations");
        }
        return g.sum(g.mul(out, g.constant(weights)));
    }

    double value(std::span<const Tensor> inputs) {
        Graph g;
        std::vector<NodeRef> leaves;
        for (const auto& t : inputs) leaves.push_back(g.constant(t));
        return g.value(scalar_of(g, leaves)).item();
    }
};

}  // namespace

GradCheckResult check_gradients(const GraphBuilder& build, std::span<const Tensor> inputs,
                                const GradCheckOptions& options) {
    std::mt19937_64 rng(options.seed);
    Evaluator eval{build, {}};

    // Analytic pass. The first build also fixes the projection weights.
    Graph g;
    std::vector<NodeRef> leaves;
    for (const auto& t : inputs) leaves.push_back(g.input(t.with_requires_grad(true)));
    NodeRef out = build(g, leaves);
    if (g.value(out).numel() != 1) {
        std::normal_distribution<double> normal(0.0, 1.0);
        std::vector<double> w(g.value(out).numel());
        for (auto& v : w) v = normal(rng);
        eval.weights = Tensor(g.shape(out), std::move(w));
    }
    NodeRef loss = g.value(out).numel() == 1 ? out : g.sum(g.mul(out, g.constant(eval.weights)));
    Gradients grads = g.backward(loss);

    GradCheckResult result;
    std::vector<Tensor> probe(inputs.begin(), inputs.end());
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const Tensor analytic = grads.of(leaves[i]);
        std::vector<std::size_t> coords(inputs[i].numel());
        std::iota(coords.begin(), coords.end(), 0);
        if (options.max_coords_per_input && coords.size() > options.max_coords_per_input) {
            std::shuffle(coords.begin(), coords.end(), rng);
            coords.resize(options.max_coords_per_input);
        }
        for (auto c : coords) {
            std::vector<double> data(inputs[i].data().begin(), inputs[i].data().end());
            const double orig = data[c];
            data[c] = orig + options.eps;
            probe[i] = Tensor(inputs[i].shape(), data);
            const double up = eval.value(probe);
            data[c] = orig - options.eps;
            probe[i] = Tensor(inputs[i].shape(), data);
            const double down = eval.value(probe);
            probe[i] = inputs[i];

            const double numeric = (up - down) / (2.0 * options.eps);
            const double a = analytic[c];
            const double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
            const double rel = std::abs(a - numeric) / denom;
            ++result.coords_checked;
            if (rel > result.max_rel_error || !std::isfinite(rel)) {
                result.max_rel_error = std::isfinite(rel) ? rel : INFINITY;
                std::ostringstream os;
                os << "input " << i << " element " << c << ": analytic " << a << " numeric " << numeric;
                result.worst = os.str();
            }
        }
    }
    return result;
}

double finite_difference_check(OpKind op, std::span<const Tensor> inputs, double eps,
                               const OpAttrs& attrs) {
    GraphBuilder build = [op, attrs](Graph& g, std::span<const NodeRef> leaves) {
        return g.apply(op, leaves, attrs);
    };
    GradCheckOptions options;
    options.eps = eps;
    return check_gradients(build, inputs, options).max_rel_error;
}

}  // namespace lsac
