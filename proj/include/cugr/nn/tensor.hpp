#pragma once

#include "cugr/common.hpp"

#include <numeric>
#include <string>
#include <vector>

namespace cugr::nn {

// Dense float tensor, row-major, CHW layout for feature maps.
struct Tensor {
    std::vector<int> shape;
    std::vector<float> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)), data(count(shape), 0.0f) {}

    static size_t count(const std::vector<int>& s) {
        size_t n = 1;
        for (int d : s) n *= static_cast<size_t>(d);
        return n;
    }

    size_t size() const { return data.size(); }
    int dim(int i) const { return shape[static_cast<size_t>(i)]; }
    float* ptr() { return data.data(); }
    const float* ptr() const { return data.data(); }

    void zero() { std::fill(data.begin(), data.end(), 0.0f); }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

// Learnable parameter with gradient and momentum buffers.
struct Param {
    std::string name;
    Tensor value;
    Tensor grad;
    Tensor vel;

    Param() = default;
    Param(std::string n, std::vector<int> shape)
        : name(std::move(n)), value(shape), grad(shape), vel(std::move(shape)) {}

    void zero_grad() { grad.zero(); }
};

} // namespace cugr::nn
