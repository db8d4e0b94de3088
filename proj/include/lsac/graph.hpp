// SPDX-FileCopyrightText: Copyright 2026 The lsac Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <initializer_list>
#include <span>
#include <string_view>
#include <vector>

#include "lsac/tensor.hpp"

namespace lsac {

// The differentiable primitives. Every model in the project is composed from
// these; each has a hand-written adjoint in ops.cpp.
enum class OpKind {
    leaf,
    matmul,        // [m,k]x[k,n], [b,m,k]x[b,k,n], or [b,m,k]x[k,n]
    conv2d,        // input [c,h,w] or [b,c,h,w], kernel [o,c,kh,kw]; attrs.stride, attrs.padding
    add,           // numpy-style broadcasting
    mul,           // numpy-style broadcasting
    layer_norm,    // (x, gamma, beta) over the last axis; attrs.eps
    softmax,       // over the last axis
    gelu,          // exact erf form
    sigmoid,
    mean_pool,     // over attrs.axis, kept with extent 1
    max_pool,      // over attrs.axis, kept with extent 1
    reshape,       // to attrs.shape
    transpose,     // axis permutation attrs.perm
    embed_lookup,  // rows attrs.indices of a [v,d] table
    concat,        // along attrs.axis
    sum,           // full reduction to [1]
    exp,
    l2_normalize,  // rows along the last axis; norm < 1e-12 is an error
    softmax_cross_entropy,  // mean over rows of -log softmax(logits)[target]; attrs.indices
};

std::string_view op_name(OpKind kind);

struct OpAttrs {
    int axis = -1;
    std::size_t stride = 1;
    std::size_t padding = 0;
    std::vector<std::size_t> perm;
    Shape shape;
    std::vector<std::size_t> indices;
    double eps = 1e-5;
};

// Pure forward evaluation of one primitive. Throws ShapeError naming the op
// and the offending shapes.
Tensor forward_op(OpKind kind, std::span<const Tensor> inputs, const OpAttrs& attrs = {});

// Adds the vector-Jacobian product of one primitive into `input_grads`.
// Entries that are null are skipped.
void backward_op(OpKind kind, std::span<const Tensor> inputs, const Tensor& output,
                 std::span<const double> grad_output, const OpAttrs& attrs,
                 std::span<std::vector<double>*> input_grads);

struct NodeRef {
    std::size_t id = 0;
};

class Graph;

class Gradients {
public:
    // Gradient of the loss with respect to a node; zeros when the node has no
    // path to the loss.
    Tensor of(NodeRef node) const;

private:
    friend class Graph;
    const Graph* graph_ = nullptr;
    std::vector<std::vector<double>> grads_;
};

// A tape of op applications. Nodes are appended in evaluation order, which
// is also the topological order, so the graph is acyclic by construction.
// A Graph is confined to one thread while it is being built.
class Graph {
public:
    NodeRef input(Tensor value);
    NodeRef constant(Tensor value);
    NodeRef apply(OpKind kind, std::initializer_list<NodeRef> inputs, OpAttrs attrs = {});
    NodeRef apply(OpKind kind, std::span<const NodeRef> inputs, OpAttrs attrs = {});

    const Tensor& value(NodeRef node) const { return nodes_.at(node.id).value; }
    const Shape& shape(NodeRef node) const { return value(node).shape(); }
    std::size_t size() const { return nodes_.size(); }
    bool requires_grad(NodeRef node) const { return nodes_.at(node.id).needs_grad; }

    // Reverse sweep from a scalar node. Fan-out contributions are summed in
    // reverse topological order.
    Gradients backward(NodeRef loss) const;

    NodeRef matmul(NodeRef a, NodeRef b);
    NodeRef conv2d(NodeRef input, NodeRef kernel, std::size_t stride, std::size_t padding);
    NodeRef add(NodeRef a, NodeRef b);
    NodeRef mul(NodeRef a, NodeRef b);
    NodeRef scale(NodeRef a, double factor);
    NodeRef layer_norm(NodeRef x, NodeRef gamma, NodeRef beta, double eps = 1e-5);
    NodeRef softmax(NodeRef x);
    NodeRef gelu(NodeRef x);
    NodeRef sigmoid(NodeRef x);
    NodeRef mean_pool(NodeRef x, int axis);
    NodeRef max_pool(NodeRef x, int axis);
    NodeRef reshape(NodeRef x, Shape shape);
    NodeRef transpose(NodeRef x, std::vector<std::size_t> perm);
    NodeRef embed_lookup(NodeRef table, std::vector<std::size_t> ids);
    NodeRef concat(std::span<const NodeRef> parts, int axis);
    NodeRef sum(NodeRef x);
    NodeRef exp(NodeRef x);
    NodeRef l2_normalize(NodeRef x);
    NodeRef softmax_cross_entropy(NodeRef logits, std::vector<std::size_t> targets);

private:
    struct Node {
        OpKind kind = OpKind::leaf;
        std::vector<std::size_t> inputs;
        OpAttrs attrs;
        Tensor value;
        bool needs_grad = false;
    };
    friend class Gradients;
    std::vector<Node> nodes_;
};

}  // namespace lsac
