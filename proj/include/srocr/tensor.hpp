#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "srocr/errors.hpp"

namespace srocr::tensor {

/// NCHW extents. Vectors are stored as (1, 1, 1, len) and matrices as
/// (1, 1, rows, cols).
struct Shape {
    std::int64_t n = 0;
    std::int64_t c = 0;
    std::int64_t h = 0;
    std::int64_t w = 0;

    constexpr std::size_t size() const noexcept {
        return static_cast<std::size_t>(n * c * h * w);
    }
    friend constexpr bool operator==(const Shape&, const Shape&) = default;

    std::string str() const;

    static constexpr Shape vector(std::int64_t len) { return {1, 1, 1, len}; }
    static constexpr Shape matrix(std::int64_t rows, std::int64_t cols) { return {1, 1, rows, cols}; }
};

/// Dense row-major NCHW array. `float` is the working precision; `double`
/// exists for gradient verification.
template <typename T>
class BasicTensor {
public:
    using value_type = T;

    BasicTensor() = default;

    explicit BasicTensor(Shape shape, T fill = T{0}) : shape_(shape), data_(checked_size(shape), fill) {}

    BasicTensor(Shape shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
        if (data_.size() != checked_size(shape)) {
            throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape.str());
        }
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<T> data() noexcept { return data_; }
    std::span<const T> data() const noexcept { return data_; }
    const std::vector<T>& values() const noexcept { return data_; }

    T& operator[](std::size_t i) noexcept { return data_[i]; }
    const T& operator[](std::size_t i) const noexcept { return data_[i]; }

    std::size_t index(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) const noexcept {
        return static_cast<std::size_t>(((n * shape_.c + c) * shape_.h + h) * shape_.w + w);
    }
    T& at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) noexcept {
        return data_[index(n, c, h, w)];
    }
    const T& at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) const noexcept {
        return data_[index(n, c, h, w)];
    }

    /// Same data, new extents with an equal element count.
    BasicTensor reshaped(Shape shape) const {
        if (shape.size() != data_.size()) {
            throw ShapeError("cannot reshape " + shape_.str() + " to " + shape.str());
        }
        return BasicTensor(shape, data_);
    }

    template <typename U>
    BasicTensor<U> cast() const {
        std::vector<U> out(data_.begin(), data_.end());
        return BasicTensor<U>(shape_, std::move(out));
    }

    friend bool operator==(const BasicTensor&, const BasicTensor&) = default;

private:
    static std::size_t checked_size(const Shape& s) {
        if (s.n < 0 || s.c < 0 || s.h < 0 || s.w < 0) {
            throw ShapeError("negative extent in shape " + s.str());
        }
        return s.size();
    }

    Shape shape_{};
    std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

}  // namespace srocr::tensor
