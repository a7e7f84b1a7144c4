#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ad1d/error.hpp"

namespace ad1d::nn {

/// A mini-batch of 1-D feature maps laid out as [batch][channel][length].
/// The gradient buffer is allocated on demand and always mirrors `values`.
template <typename T>
struct Tensor1D {
    int batch = 0;
    int channels = 0;
    int length = 0;
    std::vector<T> values;
    std::vector<T> grad;

    Tensor1D() = default;
    Tensor1D(int batch_, int channels_, int length_)
        : batch(batch_), channels(channels_), length(length_),
          values(static_cast<std::size_t>(batch_) * channels_ * length_, T(0)) {}

    std::size_t size() const { return values.size(); }
    std::size_t sample_stride() const { return static_cast<std::size_t>(channels) * length; }

    void reshape(int b, int c, int l) {
        batch = b;
        channels = c;
        length = l;
        values.assign(static_cast<std::size_t>(b) * c * l, T(0));
        if (!grad.empty()) grad.assign(values.size(), T(0));
    }

    bool has_grad() const { return !grad.empty(); }
    void enable_grad() { grad.assign(values.size(), T(0)); }
    void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }

    T& at(int b, int c, int x) { return values[index(b, c, x)]; }
    const T& at(int b, int c, int x) const { return values[index(b, c, x)]; }

    std::span<T> row(int b, int c) { return {values.data() + index(b, c, 0), static_cast<std::size_t>(length)}; }
    std::span<const T> row(int b, int c) const {
        return {values.data() + index(b, c, 0), static_cast<std::size_t>(length)};
    }
    std::span<T> grad_row(int b, int c) { return {grad.data() + index(b, c, 0), static_cast<std::size_t>(length)}; }
    std::span<const T> grad_row(int b, int c) const {
        return {grad.data() + index(b, c, 0), static_cast<std::size_t>(length)};
    }

    bool same_shape(const Tensor1D& o) const {
        return batch == o.batch && channels == o.channels && length == o.length;
    }

private:
    std::size_t index(int b, int c, int x) const {
        return (static_cast<std::size_t>(b) * channels + c) * length + x;
    }
};

inline std::string shape_string(int b, int c, int l) {
    return std::to_string(b) + "x" + std::to_string(c) + "x" + std::to_string(l);
}

template <typename T>
std::string shape_string(const Tensor1D<T>& t) {
    return shape_string(t.batch, t.channels, t.length);
}

/// A learnable (or running-statistic) parameter block with its gradient.
template <typename T>
struct ParamBlock {
    std::string name;
    std::vector<T> value;
    std::vector<T> grad;
    bool learnable = true;
    bool decay = false;  // weight decay applies to conv kernels only

    void resize(std::size_t n, T fill = T(0)) {
        value.assign(n, fill);
        grad.assign(learnable ? n : 0, T(0));
    }
};

}  // namespace ad1d::nn
