// SPDX-FileCopyrightText: Copyright 2026 The lsac Authors
// SPDX-License-Identifier: Apache-2.0

#include "lsac/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace lsac {

std::string to_string(const Shape& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

std::size_t numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : shape_(std::move(shape)), requires_grad_(requires_grad) {
    if (shape_.empty()) throw ShapeError("tensor: rank-0 shapes are not supported, use [1]");
    for (auto extent : shape_) {
        if (extent == 0) throw ShapeError("tensor: zero extent in shape " + to_string(shape_));
    }
    if (lsac::numel(shape_) != data.size()) {
        throw ShapeError("tensor: shape " + to_string(shape_) + " holds " +
                         std::to_string(lsac::numel(shape_)) + " values, got " +
                         std::to_string(data.size()));
    }
    data_ = std::make_shared<const std::vector<double>>(std::move(data));
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
    auto n = lsac::numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

Tensor Tensor::vector(std::vector<double> values) {
    Shape shape{values.size()};
    return Tensor(std::move(shape), std::move(values));
}

std::span<const double> Tensor::data() const {
    if (!data_) return {};
    return {data_->data(), data_->size()};
}

double Tensor::item() const {
    if (numel() != 1) throw ShapeError("item: tensor of shape " + to_string(shape_) + " is not a scalar");
    return (*data_)[0];
}

Tensor Tensor::with_requires_grad(bool flag) const {
    Tensor copy = *this;
    copy.requires_grad_ = flag;
    return copy;
}

Tensor Tensor::reshaped(Shape shape) const {
    if (lsac::numel(shape) != numel()) {
        throw ShapeError("reshape: cannot view " + to_string(shape_) + " as " + to_string(shape));
    }
    Tensor copy = *this;
    copy.shape_ = std::move(shape);
    return copy;
}

bool Tensor::identical(const Tensor& other) const {
    if (shape_ != other.shape_) return false;
    auto a = data();
    auto b = other.data();
    return std::equal(a.begin(), a.end(), b.begin(), b.end());
}

}  // namespace lsac
