#pragma once

#include <cassert>
#include <cstdint>
#include <numeric>
#include <vector>

#include "mnistcnn/errors.hpp"

namespace mcnn {

/// Dense row-major float tensor. The sole numeric currency of the engine.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
        data_.assign(numel_of(shape_), 0.0f);
    }

    Tensor(std::vector<int> shape, std::vector<float> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (numel_of(shape_) != data_.size())
            throw ShapeMismatch("tensor data length does not match shape");
    }

    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

    static Tensor full(std::vector<int> shape, float value) {
        Tensor t(std::move(shape));
        std::fill(t.data_.begin(), t.data_.end(), value);
        return t;
    }

    const std::vector<int>& shape() const { return shape_; }
    int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    int ndim() const { return static_cast<int>(shape_.size()); }
    size_t numel() const { return data_.size(); }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }

    float& operator[](size_t i) { return data_[i]; }
    float operator[](size_t i) const { return data_[i]; }

    // 4-d accessor (N,C,H,W)
    float& at(int n, int c, int h, int w) {
        return data_[((static_cast<size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
    }
    float at(int n, int c, int h, int w) const {
        return data_[((static_cast<size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
    }

    // 2-d accessor (N,F)
    float& at(int n, int f) { return data_[static_cast<size_t>(n) * shape_[1] + f]; }
    float at(int n, int f) const { return data_[static_cast<size_t>(n) * shape_[1] + f]; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    Tensor reshaped(std::vector<int> new_shape) const {
        if (numel_of(new_shape) != data_.size())
            throw ShapeMismatch("reshape changes element count");
        return Tensor(std::move(new_shape), data_);
    }

    void fill(float v) { std::fill(data_.begin(), data_.end(), v); }

    bool all_finite() const;

    double sum() const;  // accumulated in double

    static size_t numel_of(const std::vector<int>& shape) {
        size_t n = 1;
        for (int d : shape) {
            if (d <= 0) throw ShapeMismatch("non-positive tensor extent");
            n *= static_cast<size_t>(d);
        }
        return n;
    }

private:
    std::vector<int> shape_;
    std::vector<float> data_;
};

}  // namespace mcnn
