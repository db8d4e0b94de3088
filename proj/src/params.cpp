// SPDX-FileCopyrightText: Copyright 2026 The lsac Authors
// SPDX-License-Identifier: Apache-2.0

#include "lsac/params.hpp"

#include <cmath>

namespace lsac {

void ParameterSet::add(const std::string& name, Tensor value) {
    if (!tensors_.emplace(name, std::move(value)).second) {
        throw ConfigError("parameter '" + name + "' defined twice");
    }
}

const Tensor& ParameterSet::get(const std::string& name) const {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw ConfigError("unknown parameter '" + name + "'");
    return it->second;
}

void ParameterSet::set(const std::string& name, Tensor value) {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw ConfigError("unknown parameter '" + name + "'");
    if (it->second.shape() != value.shape()) {
        throw ShapeError("parameter '" + name + "': shape " + to_string(it->second.shape()) +
                         " cannot take " + to_string(value.shape()));
    }
    it->second = std::move(value);
}

std::size_t ParameterSet::scalar_count() const { return scalar_count(""); }

std::size_t ParameterSet::scalar_count(const std::string& prefix) const {
    std::size_t n = 0;
    for (const auto& [name, t] : tensors_) {
        if (name.compare(0, prefix.size(), prefix) == 0) n += t.numel();
    }
    return n;
}

Tensor init_normal(Shape shape, double stddev, Rng& rng) {
    std::normal_distribution<double> normal(0.0, stddev);
    std::vector<double> data(numel(shape));
    for (auto& v : data) v = normal(rng);
    return Tensor(std::move(shape), std::move(data));
}

Tensor init_glorot(Shape shape, Rng& rng) {
    if (shape.size() < 2) throw ShapeError("init_glorot: need rank >= 2, got " + to_string(shape));
    // For conv kernels [o,i,kh,kw] the receptive field scales both fans.
    double receptive = 1.0;
    for (std::size_t d = 2; d < shape.size(); ++d) receptive *= static_cast<double>(shape[d]);
    const double fan_a = static_cast<double>(shape[0]) * receptive;
    const double fan_b = static_cast<double>(shape[1]) * receptive;
    return init_normal(std::move(shape), std::sqrt(2.0 / (fan_a + fan_b)), rng);
}

Binder::Binder(Graph& graph, const ParameterSet& params, bool trainable)
    : graph_(graph), params_(params), trainable_(trainable) {}

NodeRef Binder::operator()(const std::string& name) {
    auto it = bound_.find(name);
    if (it != bound_.end()) return it->second;
    NodeRef node = graph_.input(params_.get(name).with_requires_grad(trainable_));
    bound_.emplace(name, node);
    return node;
}

void Binder::bind(const std::string& name, NodeRef node) {
    if (graph_.shape(node) != params_.get(name).shape()) {
        throw ShapeError("bind '" + name + "': node shape " + to_string(graph_.shape(node)) + ", parameter shape " +
                         to_string(params_.get(name).shape()));
    }
    if (!bound_.emplace(name, node).second) throw ConfigError("bind '" + name + "': already bound");
}

std::map<std::string, Tensor> Binder::gradients(const Gradients& grads) const {
    std::map<std::string, Tensor> out;
    for (const auto& [name, node] : bound_) out.emplace(name, grads.of(node));
    return out;
}

}  // namespace lsac
