// SPDX-FileCopyrightText: Copyright 2026 The lsac Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <random>
#include <string>
#include <unordered_map>

#include "lsac/graph.hpp"

namespace lsac {

using Rng = std::mt19937_64;

// The trainable parameter set, keyed by dotted names ("text.block0.attn.q.w").
// Iteration order is lexicographic, which fixes every reduction order that
// walks the set.
class ParameterSet {
public:
    using Map = std::map<std::string, Tensor>;

    void add(const std::string& name, Tensor value);
    const Tensor& get(const std::string& name) const;
    // Replaces a tensor; the shape must not change.
    void set(const std::string& name, Tensor value);
    bool contains(const std::string& name) const { return tensors_.count(name) != 0; }

    std::size_t size() const { return tensors_.size(); }
    std::size_t scalar_count() const;
    // Sum of scalar counts over names starting with prefix.
    std::size_t scalar_count(const std::string& prefix) const;

    Map::const_iterator begin() const { return tensors_.begin(); }
    Map::const_iterator end() const { return tensors_.end(); }

private:
    Map tensors_;
};

Tensor init_normal(Shape shape, double stddev, Rng& rng);
// Glorot normal. Extents past the first two form a receptive field that
// scales both fans, as for conv kernels [out, in, kh, kw].
Tensor init_glorot(Shape shape, Rng& rng);

// Places parameters into a graph on first use. Each parameter becomes one
// leaf, so repeated uses fan out and their gradients are summed.
class Binder {
public:
    Binder(Graph& graph, const ParameterSet& params, bool trainable = true);

    NodeRef operator()(const std::string& name);
    // Uses an existing node for a parameter, so callers can own its leaf.
    // The shape must match the stored tensor; a name binds at most once.
    void bind(const std::string& name, NodeRef node);
    Graph& graph() { return graph_; }
    const ParameterSet& params() const { return params_; }

    // Gradients of every bound parameter.
    std::map<std::string, Tensor> gradients(const Gradients& grads) const;

private:
    Graph& graph_;
    const ParameterSet& params_;
    bool trainable_;
    std::unordered_map<std::string, NodeRef> bound_;
};

}  // namespace lsac
