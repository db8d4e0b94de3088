// SPDX-FileCopyrightText: Copyright 2026 The lsac Authors
// SPDX-License-Identifier: Apache-2.0

#include "lsac/graph.hpp"

namespace lsac {

Tensor Gradients::of(NodeRef node) const {
    const Tensor& value = graph_->value(node);
    if (node.id >= grads_.size() || grads_[node.id].empty()) return Tensor::zeros(value.shape());
    return Tensor(value.shape(), grads_[node.id]);
}

NodeRef Graph::input(Tensor value) {
    Node node;
    node.needs_grad = value.requires_grad();
    node.value = std::move(value);
    nodes_.push_back(std::move(node));
    return {nodes_.size() - 1};
}

NodeRef Graph::constant(Tensor value) { return input(value.with_requires_grad(false)); }

NodeRef Graph::apply(OpKind kind, std::initializer_list<NodeRef> inputs, OpAttrs attrs) {
    return apply(kind, std::span<const NodeRef>(inputs.begin(), inputs.size()), std::move(attrs));
}

NodeRef Graph::apply(OpKind kind, std::span<const NodeRef> inputs, OpAttrs attrs) {
    std::vector<Tensor> values;
    values.reserve(inputs.size());
    Node node;
    node.kind = kind;
    for (auto ref : inputs) {
        const Node& src = nodes_.at(ref.id);
        values.push_back(src.value);
        node.inputs.push_back(ref.id);
        node.needs_grad = node.needs_grad || src.needs_grad;
    }
    node.value = forward_op(kind, values, attrs);
    node.attrs = std::move(attrs);
    nodes_.push_back(std::move(node));
    return {nodes_.size() - 1};
}

Gradients Graph::backward(NodeRef loss) const {
    const Node& root = nodes_.at(loss.id);
    if (root.value.numel() != 1) {
        throw ShapeError("backward: loss must be a scalar, got shape " + to_string(root.value.shape()));
    }
    Gradients out;
    out.graph_ = this;
    out.grads_.resize(loss.id + 1);
    out.grads_[loss.id].assign(1, 1.0);

    std::vector<Tensor> inputs;
    std::vector<std::vector<double>*> input_grads;
    for (std::size_t id = loss.id + 1; id-- > 0;) {
        const Node& node = nodes_[id];
        if (node.kind == OpKind::leaf || !node.needs_grad || out.grads_[id].empty()) continue;
        inputs.clear();
        input_grads.clear();
        for (auto src : node.inputs) {
            inputs.push_back(nodes_[src].value);
            if (nodes_[src].needs_grad) {
                auto& buf = out.grads_[src];
                if (buf.empty()) buf.assign(nodes_[src].value.numel(), 0.0);
                input_grads.push_back(&buf);
            } else {
                input_grads.push_back(nullptr);
            }
        }
        backward_op(node.kind, inputs, node.value, out.grads_[id], node.attrs, input_grads);
        // Interior buffers are dead once propagated; leaves keep theirs.
        std::vector<double>().swap(out.grads_[id]);
    }
    return out;
}

NodeRef Graph::matmul(NodeRef a, NodeRef b) { return apply(OpKind::matmul, {a, b}); }

NodeRef Graph::conv2d(NodeRef input, NodeRef kernel, std::size_t stride, std::size_t padding) {
    OpAttrs attrs;
    attrs.stride = stride;
    attrs.padding = padding;
    return apply(OpKind::conv2d, {input, kernel}, std::move(attrs));
}

NodeRef Graph::add(NodeRef a, NodeRef b) { return apply(OpKind::add, {a, b}); }
NodeRef Graph::mul(NodeRef a, NodeRef b) { return apply(OpKind::mul, {a, b}); }

NodeRef Graph::scale(NodeRef a, double factor) { return mul(a, constant(Tensor::scalar(factor))); }

NodeRef Graph::layer_norm(NodeRef x, NodeRef gamma, NodeRef beta, double eps) {
    OpAttrs attrs;
    attrs.eps = eps;
    return apply(OpKind::layer_norm, {x, gamma, beta}, std::move(attrs));
}

NodeRef Graph::softmax(NodeRef x) { return apply(OpKind::softmax, {x}); }
NodeRef Graph::gelu(NodeRef x) { return apply(OpKind::gelu, {x}); }
NodeRef Graph::sigmoid(NodeRef x) { return apply(OpKind::sigmoid, {x}); }

NodeRef Graph::mean_pool(NodeRef x, int axis) {
    OpAttrs attrs;
    attrs.axis = axis;
    return apply(OpKind::mean_pool, {x}, std::move(attrs));
}

NodeRef Graph::max_pool(NodeRef x, int axis) {
    OpAttrs attrs;
    attrs.axis = axis;
    return apply(OpKind::max_pool, {x}, std::move(attrs));
}

NodeRef Graph::reshape(NodeRef x, Shape shape) {
    OpAttrs attrs;
    attrs.shape = std::move(shape);
    return apply(OpKind::reshape, {x}, std::move(attrs));
}

NodeRef Graph::transpose(NodeRef x, std::vector<std::size_t> perm) {
    OpAttrs attrs;
    attrs.perm = std::move(perm);
    return apply(OpKind::transpose, {x}, std::move(attrs));
}

NodeRef Graph::embed_lookup(NodeRef table, std::vector<std::size_t> ids) {
    OpAttrs attrs;
    attrs.indices = std::move(ids);
    return apply(OpKind::embed_lookup, {table}, std::move(attrs));
}

NodeRef Graph::concat(std::span<const NodeRef> parts, int axis) {
    OpAttrs attrs;
    attrs.axis = axis;
    return apply(OpKind::concat, parts, std::move(attrs));
}

NodeRef Graph::sum(NodeRef x) { return apply(OpKind::sum, {x}); }
NodeRef Graph::exp(NodeRef x) { return apply(OpKind::exp, {x}); }
NodeRef Graph::l2_normalize(NodeRef x) { return apply(OpKind::l2_normalize, {x}); }

NodeRef Graph::softmax_cross_entropy(NodeRef logits, std::vector<std::size_t> targets) {
    OpAttrs attrs;
    attrs.indices = std::move(targets);
    return apply(OpKind::softmax_cross_entropy, {logits}, std::move(attrs));
}

}  // namespace lsac
