// SPDX-FileCopyrightText: Copyright 2026 The lsac Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace lsac {

using Shape = std::vector<std::size_t>;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Incompatible tensor shapes for an op; the message names the op and shapes.
struct ShapeError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

// Malformed or truncated file contents.
struct FormatError : Error {
    using Error::Error;
};

std::string to_string(const Shape& shape);
std::size_t numel(const Shape& shape);

// Dense row-major tensor of doubles. The data buffer is shared and never
// mutated after construction, so copies are cheap and safe to share across
// threads.
class Tensor {
public:
    Tensor() = default;
    Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, double value);
    static Tensor scalar(double value);
    static Tensor vector(std::vector<double> values);

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t numel() const { return data_ ? data_->size() : 0; }
    bool empty() const { return !data_; }

    std::span<const double> data() const;
    double operator[](std::size_t i) const { return (*data_)[i]; }
    // Value of a single-element tensor.
    double item() const;

    bool requires_grad() const { return requires_grad_; }
    Tensor with_requires_grad(bool flag) const;
    Tensor reshaped(Shape shape) const;

    // Element-for-element equality of shape and values.
    bool identical(const Tensor& other) const;

private:
    Shape shape_;
    std::shared_ptr<const std::vector<double>> data_;
    bool requires_grad_ = false;
};

}  // namespace lsac
